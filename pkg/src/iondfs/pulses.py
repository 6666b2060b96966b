"""Spin-dependent force schedules, phase integrals and closure residuals.

A schedule drives a set of target ions with a common pulse profile f(t)
(per-ion sign and Pauli axis configurable), repeated over one or more
cycles with per-cycle sign flags.  The quantities evaluated here:

* closure residuals  eta_mu^k(T) = integral of g_mu^k(t) exp(-i w_k t) dt,
  with g_mu^k(t) = Dtilde_{mu k} f_mu(t) the sideband coupling of mode k;
* the two-ion coupling kernel
  J_ij^k(t) = integral_0^t [g_i(t) g_j(t') + g_i(t') g_j(t)]
              sin w_k (t' - t) dt'
  and the accumulated gate phase Phi(T) = sum_k integral_0^T J_ij^k dt;
* the adiabatic closed form Phi = -sum_k (2/w_k) integral g_i g_j dt.

All integrals use composite Simpson on the schedule grid, evaluated per
smooth block, with a stride-2 refinement check.  The J kernel is expanded
via sin w(t'-t) = sin wt' cos wt - cos wt' sin wt so the double integral
costs O(grid) using cumulative transforms of g.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    AdiabaticityViolatedError,
    GridResolutionError,
    IncommensurateModesError,
    QuadratureNotConvergedError,
)
from .modes import ModeSpectrum
from .quadrature import blockwise_cumulative, blockwise_integral, check_refinement

__all__ = [
    "ForceSchedule",
    "PhaseReport",
    "AdiabaticWindowReport",
    "eval_g",
    "residual_eta",
    "eta_trajectory",
    "coupling_phase",
    "adiabatic_phase",
    "design_adiabatic_schedule",
    "design_refocused_schedule",
    "check_adiabatic_window",
]

AXES = ("x", "y", "z")
SHAPES = ("smooth_bump", "constant", "kick_train", "sampled")

TWO_PI = 2.0 * np.pi


@dataclass(eq=False)
class ForceSchedule:
    """Per-ion, Pauli-axis-labelled force samples on a uniform grid.

    Parameters
    ----------
    targets : sequence of (ion, axis)
        Driven ions and the Pauli axis of each force.  An ion may appear
        at most once.
    shape : {"smooth_bump", "constant", "kick_train", "sampled"}
        smooth_bump is A sin^2(pi t / T) per cycle; kick_train is a train
        of equal-length constant segments with relative levels ``segments``;
        sampled takes explicit values on the cycle grid.
    amplitude : float
        Peak force A.
    duration : float
        Duration of one cycle.
    cycles : int
        Number of repeated cycles; reversal_flags gives each cycle's sign.
    target_signs : per-target sign of the force (+1/-1).
    samples_per_cycle : grid resolution (multiple of 4; for kick trains a
        multiple of 4 * len(segments) so segment edges sit on Simpson
        panel boundaries).
    """

    targets: tuple
    shape: str
    amplitude: float
    duration: float
    cycles: int = 1
    reversal_flags: tuple = None
    target_signs: tuple = None
    samples_per_cycle: int = 4096
    segments: tuple = None
    samples: np.ndarray = None

    def __post_init__(self):
        self.targets = tuple((int(i), str(ax)) for i, ax in self.targets)
        if not self.targets:
            raise ValueError("schedule needs at least one target")
        ions = [i for i, _ in self.targets]
        if len(set(ions)) != len(ions):
            raise ValueError("each ion may appear at most once in targets")
        for _, ax in self.targets:
            if ax not in AXES:
                raise ValueError(f"unknown Pauli axis {ax!r}")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.duration <= 0:
            raise ValueError("duration must be > 0")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")
        if self.reversal_flags is None:
            self.reversal_flags = (1,) * self.cycles
        self.reversal_flags = tuple(int(s) for s in self.reversal_flags)
        if len(self.reversal_flags) != self.cycles or any(
            s not in (1, -1) for s in self.reversal_flags
        ):
            raise ValueError("reversal_flags must be +/-1 per cycle")
        if self.target_signs is None:
            self.target_signs = (1,) * len(self.targets)
        self.target_signs = tuple(int(s) for s in self.target_signs)
        if len(self.target_signs) != len(self.targets) or any(
            s not in (1, -1) for s in self.target_signs
        ):
            raise ValueError("target_signs must be +/-1 per target")
        spc = int(self.samples_per_cycle)
        if spc < 8 or spc % 4:
            raise ValueError("samples_per_cycle must be a multiple of 4, >= 8")
        self.samples_per_cycle = spc
        if self.shape == "kick_train":
            if not self.segments:
                raise ValueError("kick_train needs segments")
            self.segments = tuple(float(v) for v in self.segments)
            if spc % (4 * len(self.segments)):
                raise ValueError(
                    "samples_per_cycle must be a multiple of 4 * len(segments)"
                )
        elif self.segments is not None:
            raise ValueError("segments only apply to kick_train")
        if self.shape == "sampled":
            vals = np.asarray(self.samples, dtype=float)
            if vals.shape != (spc + 1,):
                raise ValueError("samples must have samples_per_cycle + 1 values")
            self.samples = vals
        elif self.samples is not None:
            raise ValueError("samples only apply to the sampled shape")

    # -- grid -----------------------------------------------------------

    @property
    def dt(self) -> float:
        return self.duration / self.samples_per_cycle

    @property
    def span(self) -> float:
        return self.duration * self.cycles

    @property
    def n_intervals(self) -> int:
        return self.cycles * self.samples_per_cycle

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n_intervals + 1) * self.dt

    def block_edges(self, stride: int = 1):
        """Sample indices bounding the smooth pieces of the profile."""
        per_cycle = self.samples_per_cycle // stride
        n_seg = len(self.segments) if self.shape == "kick_train" else 1
        step = per_cycle // n_seg
        return list(range(0, self.cycles * per_cycle + 1, step))

    # -- profile --------------------------------------------------------

    def _base_profile(self, u: np.ndarray) -> np.ndarray:
        """Unit-amplitude single-cycle profile at cycle-local times u."""
        T = self.duration
        if self.shape == "smooth_bump":
            vals = np.sin(np.pi * u / T) ** 2
            return np.where((u <= 0.0) | (u >= T), 0.0, vals)
        if self.shape == "constant":
            return np.ones_like(u)
        if self.shape == "kick_train":
            n_seg = len(self.segments)
            idx = np.minimum((u / (T / n_seg)).astype(int), n_seg - 1)
            return np.asarray(self.segments, dtype=float)[idx]
        return np.interp(u, np.linspace(0.0, T, self.samples_per_cycle + 1), self.samples)

    def profile(self, t) -> np.ndarray:
        """Shared force profile (amplitude and cycle flags applied) at t."""
        t = np.asarray(t, dtype=float)
        cyc = np.minimum((t / self.duration).astype(int), self.cycles - 1)
        u = t - cyc * self.duration
        flags = np.asarray(self.reversal_flags, dtype=float)[cyc]
        return self.amplitude * flags * self._base_profile(u)

    def force(self, t, target_index: int = None):
        """f_mu(t) for one target (or all targets stacked on axis 0)."""
        base = self.profile(t)
        if target_index is not None:
            return self.target_signs[target_index] * base
        signs = np.asarray(self.target_signs, dtype=float)
        return signs.reshape((-1,) + (1,) * np.ndim(base)) * base

    def force_samples(self, stride: int = 1) -> np.ndarray:
        """(n_targets, n_points) force values on the (possibly strided) grid."""
        return self.force(self.times[::stride])

    def max_slope(self) -> float:
        """max_t |df/dt|; infinite for discontinuous shapes."""
        a = abs(self.amplitude)
        if a == 0.0:
            return 0.0
        if self.shape == "smooth_bump":
            return np.pi * a / self.duration
        if self.shape == "sampled":
            interior = float(np.max(np.abs(np.diff(self.samples)))) / self.dt * a
            jumps = self.samples[0] != 0.0 or self.samples[-1] != 0.0
            return np.inf if jumps else interior
        return np.inf

    def target_index(self, ion: int) -> int:
        for idx, (i, _) in enumerate(self.targets):
            if i == ion:
                return idx
        raise IndexError(f"ion {ion} is not a schedule target")

    # -- serialization ---------------------------------------------------

    def to_record_text(self) -> str:
        """Flat key = value text record (the CLI schedule format)."""
        lines = [
            f"shape = {self.shape}",
            f"amplitude = {self.amplitude!r}",
            f"duration = {self.duration!r}",
            f"cycles = {self.cycles}",
            f"samples_per_cycle = {self.samples_per_cycle}",
            "targets = " + ",".join(f"{i}:{ax}" for i, ax in self.targets),
            "target_signs = " + ",".join(str(s) for s in self.target_signs),
            "reversal_flags = " + ",".join(str(s) for s in self.reversal_flags),
        ]
        if self.segments is not None:
            lines.append("segments = " + ",".join(repr(v) for v in self.segments))
        if self.samples is not None:
            lines.append("samples = " + ",".join(repr(v) for v in self.samples))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_record_text(cls, text: str) -> "ForceSchedule":
        fields = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
        targets = tuple(
            (int(tok.split(":")[0]), tok.split(":")[1])
            for tok in fields["targets"].split(",")
        )
        kwargs = dict(
            targets=targets,
            shape=fields["shape"],
            amplitude=float(fields["amplitude"]),
            duration=float(fields["duration"]),
            cycles=int(fields.get("cycles", 1)),
            samples_per_cycle=int(fields.get("samples_per_cycle", 4096)),
        )
        if "target_signs" in fields:
            kwargs["target_signs"] = tuple(int(v) for v in fields["target_signs"].split(","))
        if "reversal_flags" in fields:
            kwargs["reversal_flags"] = tuple(int(v) for v in fields["reversal_flags"].split(","))
        if "segments" in fields:
            kwargs["segments"] = tuple(float(v) for v in fields["segments"].split(","))
        if "samples" in fields:
            kwargs["samples"] = np.array([float(v) for v in fields["samples"].split(",")])
        return cls(**kwargs)


@dataclass(eq=False)
class PhaseReport:
    """Phase integrals and closure residuals of a two-ion schedule."""

    eta: np.ndarray                 # (n_targets, n_modes) residuals
    phase_per_mode: np.ndarray      # integral of J_ij^k over the span
    phase_total: float
    phase_adiabatic: float
    adiabaticity: float             # max|df/dt| / omega_min
    global_phase: float = None      # filled by the propagation oracle

    @property
    def max_abs_eta(self) -> float:
        return float(np.max(np.abs(self.eta)))


@dataclass(frozen=True)
class AdiabaticWindowReport:
    """Advisory check of the adiabatic validity window."""

    max_slope: float
    omega_low: float
    relaxation_rate: float
    slow_enough: bool       # max|df/dt| < 0.1 * omega_low
    fast_enough: bool       # max|df/dt| > relaxation rate

    @property
    def ok(self) -> bool:
        return self.slow_enough and self.fast_enough


# -- guards ----------------------------------------------------------------


def _check_resolution(schedule: ForceSchedule, modes: ModeSpectrum):
    limit = (TWO_PI / modes.omega_max) / 40.0
    if schedule.dt > limit * (1.0 + 1e-12):
        raise GridResolutionError(
            f"grid step {schedule.dt:.4g} exceeds (2 pi / omega_max)/40 = {limit:.4g}"
        )


def _g_samples(schedule: ForceSchedule, modes: ModeSpectrum, stride: int = 1):
    """g_mu^k on the grid: (n_targets, n_modes, n_points)."""
    f = schedule.force_samples(stride)
    ions = [i for i, _ in schedule.targets]
    weights = modes.coupling_matrix[ions, :]          # (n_targets, n_modes)
    return weights[:, :, None] * f[:, None, :]


# -- operations --------------------------------------------------------------


def eval_g(schedule: ForceSchedule, modes: ModeSpectrum, mu: int, k: int, t):
    """Sideband coupling g_mu^k(t) = Dtilde_{mu k} f_mu(t)."""
    if not 0 <= k < modes.n_modes:
        raise IndexError(f"mode index {k} out of range")
    idx = schedule.target_index(mu)
    return modes.coupling_matrix[mu, k] * schedule.force(t, idx)


def residual_eta(
    schedule: ForceSchedule,
    modes: ModeSpectrum,
    rel_tol: float = 1e-6,
) -> np.ndarray:
    """Closure residuals eta_mu^k over the full span, (n_targets, n_modes).

    Raises QuadratureNotConvergedError if the stride-2 refinement check
    moves any entry by more than rel_tol relative to the integral of |g|.
    """
    _check_resolution(schedule, modes)
    eta_f, eta_c, scale = _eta_fine_coarse(schedule, modes)
    check_refinement(eta_f, eta_c, scale, rel_tol, "residual_eta")
    return eta_f


def _eta_fine_coarse(schedule, modes):
    omega = modes.frequencies
    dt = schedule.dt
    results = []
    for stride in (1, 2):
        t = schedule.times[::stride]
        g = _g_samples(schedule, modes, stride)
        kernel = np.exp(-1j * omega[None, :, None] * t[None, None, :])
        results.append(
            blockwise_integral(g * kernel, dt * stride, schedule.block_edges(stride))
        )
    f_abs = np.abs(schedule.force_samples())
    abs_int = blockwise_integral(f_abs, dt, schedule.block_edges())  # (n_targets,)
    ions = [i for i, _ in schedule.targets]
    scale = np.abs(modes.coupling_matrix[ions, :]) * abs_int[:, None]
    return results[0], results[1], max(float(scale.max()), 1e-300)


def eta_trajectory(schedule: ForceSchedule, modes: ModeSpectrum) -> np.ndarray:
    """Running residual eta_mu^k(t) on the grid: (n_targets, n_modes, n_points)."""
    omega = modes.frequencies
    t = schedule.times
    g = _g_samples(schedule, modes)
    kernel = np.exp(-1j * omega[None, :, None] * t[None, None, :])
    return blockwise_cumulative(g * kernel, schedule.dt, schedule.block_edges())


def adiabatic_phase(schedule: ForceSchedule, modes: ModeSpectrum, pair) -> float:
    """Closed-form slow-pulse phase -sum_k (2/w_k) integral g_i g_j dt."""
    i, j = pair
    fi = schedule.force(schedule.times, schedule.target_index(i))
    fj = schedule.force(schedule.times, schedule.target_index(j))
    overlap = blockwise_integral(fi * fj, schedule.dt, schedule.block_edges())
    dtil = modes.coupling_matrix
    per_mode = -2.0 / modes.frequencies * dtil[i, :] * dtil[j, :] * overlap
    return float(np.sum(per_mode))


def coupling_phase(
    schedule: ForceSchedule,
    modes: ModeSpectrum,
    pair,
    rel_tol: float = 1e-6,
) -> PhaseReport:
    """Evaluate the J kernel and the accumulated phase for an ion pair.

    The schedule must target exactly the two ions of ``pair``.  The report
    carries per-mode phase integrals, their sum, the closure residuals, the
    adiabatic estimate and the slope-based adiabaticity figure.
    """
    i, j = pair
    if set(ion for ion, _ in schedule.targets) != {i, j}:
        raise ValueError("schedule must target exactly the ions of `pair`")
    _check_resolution(schedule, modes)

    omega = modes.frequencies
    dtil = modes.coupling_matrix
    dt = schedule.dt
    totals = []
    scale = 0.0
    for stride in (1, 2):
        t = schedule.times[::stride]
        edges = schedule.block_edges(stride)
        fi = schedule.force(t, schedule.target_index(i))
        fj = schedule.force(t, schedule.target_index(j))
        per_mode = np.empty(modes.n_modes)
        for k in range(modes.n_modes):
            w = omega[k]
            gi = dtil[i, k] * fi
            gj = dtil[j, k] * fj
            sin_wt = np.sin(w * t)
            cos_wt = np.cos(w * t)
            cum_sin_j = blockwise_cumulative(gj * sin_wt, dt * stride, edges)
            cum_cos_j = blockwise_cumulative(gj * cos_wt, dt * stride, edges)
            cum_sin_i = blockwise_cumulative(gi * sin_wt, dt * stride, edges)
            cum_cos_i = blockwise_cumulative(gi * cos_wt, dt * stride, edges)
            kernel = gi * (cos_wt * cum_sin_j - sin_wt * cum_cos_j) + gj * (
                cos_wt * cum_sin_i - sin_wt * cum_cos_i
            )
            per_mode[k] = blockwise_integral(kernel, dt * stride, edges)
            if stride == 1:
                scale += blockwise_integral(np.abs(kernel), dt, edges)
        totals.append(per_mode)
    check_refinement(
        totals[0].sum(), totals[1].sum(), max(scale, 1e-300), rel_tol, "coupling_phase"
    )

    eta = residual_eta(schedule, modes, rel_tol)
    return PhaseReport(
        eta=eta,
        phase_per_mode=totals[0],
        phase_total=float(np.sum(totals[0])),
        phase_adiabatic=adiabatic_phase(schedule, modes, pair),
        adiabaticity=schedule.max_slope() / modes.omega_min,
    )


def design_adiabatic_schedule(
    modes: ModeSpectrum,
    pair,
    target_phase: float,
    periods: int,
    axis: str = "z",
    samples_per_period: int = 512,
    adiabaticity_bound: float = 0.1,
) -> ForceSchedule:
    """Smooth-bump schedule whose adiabatic phase equals target_phase.

    Duration is ``periods`` full periods of the slowest mode.  The bump
    amplitude follows from the quadratic amplitude scaling of the phase;
    flipping the sign of one ion's force selects the phase sign.

    Raises AdiabaticityViolatedError when max|df/dt| / omega_min would
    exceed ``adiabaticity_bound``.
    """
    if target_phase == 0.0:
        raise ValueError("target_phase must be nonzero")
    i, j = pair
    duration = periods * TWO_PI / modes.omega_min
    spc = _grid_for(duration, modes, samples_per_period)
    probe = ForceSchedule(
        targets=((i, axis), (j, axis)),
        shape="smooth_bump",
        amplitude=1.0,
        duration=duration,
        samples_per_cycle=spc,
    )
    unit_phase = adiabatic_phase(probe, modes, pair)
    if unit_phase == 0.0:
        raise ValueError("pair has no net mode-mediated coupling")
    signs = (1, 1)
    if np.sign(unit_phase) != np.sign(target_phase):
        signs = (1, -1)
        unit_phase = -unit_phase
    amplitude = float(np.sqrt(target_phase / unit_phase))
    slope_ratio = np.pi * amplitude / duration / modes.omega_min
    if slope_ratio >= adiabaticity_bound:
        raise AdiabaticityViolatedError(
            f"max|df/dt|/omega_min = {slope_ratio:.3g} >= {adiabaticity_bound}; "
            "increase periods"
        )
    return replace(probe, amplitude=amplitude, target_signs=signs)


def design_refocused_schedule(
    modes: ModeSpectrum,
    pair,
    target_phase: float,
    half_cycle_periods: int,
    axis: str = "x",
    balanced: bool = None,
    samples_per_period: int = 512,
) -> ForceSchedule:
    """Two-cycle schedule with g(t + T/2) = -g(t) and the requested phase.

    Each half-cycle lasts ``half_cycle_periods`` full periods of every
    addressed mode (IncommensurateModesError otherwise), so the residual
    eta closes at the half-cycle boundary and the sign-reversed second
    cycle cancels the first-order noise terms.

    With ``balanced`` (default when the period count is even) each
    half-cycle is itself split into +/- constant segments of equal full
    periods, which additionally zeroes the odd eta moments within each
    half and suppresses the residual dephasing coupling by one more order.
    """
    if target_phase == 0.0:
        raise ValueError("target_phase must be nonzero")
    i, j = pair
    half = half_cycle_periods * TWO_PI / modes.omega_min
    ratios = modes.frequencies * half / TWO_PI
    if np.max(np.abs(ratios - np.round(ratios))) > 1e-9:
        raise IncommensurateModesError(
            f"half-cycle of {half_cycle_periods} periods of the slowest mode is "
            f"not a common period of all addressed modes (ratios {ratios})"
        )
    if balanced is None:
        balanced = half_cycle_periods % 2 == 0
    if balanced and half_cycle_periods % 2:
        raise IncommensurateModesError(
            "balanced half-cycles need an even number of periods"
        )
    spc = _grid_for(half, modes, samples_per_period)
    kwargs = dict(
        targets=((i, axis), (j, axis)),
        duration=half,
        cycles=2,
        reversal_flags=(1, -1),
        samples_per_cycle=spc,
    )
    if balanced:
        spc = spc + (-spc) % 8
        probe = ForceSchedule(
            shape="kick_train", segments=(1.0, -1.0), amplitude=1.0,
            **{**kwargs, "samples_per_cycle": spc},
        )
    else:
        probe = ForceSchedule(shape="constant", amplitude=1.0, **kwargs)
    unit_phase = adiabatic_phase(probe, modes, pair)  # exact for commensurate pieces
    if unit_phase == 0.0:
        raise ValueError("pair has no net mode-mediated coupling")
    signs = (1, 1)
    if np.sign(unit_phase) != np.sign(target_phase):
        signs = (1, -1)
        unit_phase = -unit_phase
    amplitude = float(np.sqrt(target_phase / unit_phase))
    return replace(probe, amplitude=amplitude, target_signs=signs)


def check_adiabatic_window(
    schedule: ForceSchedule,
    modes: ModeSpectrum,
    relaxation_rate: float = 0.0,
) -> AdiabaticWindowReport:
    """Advisory report on the slow-but-not-too-slow drive window."""
    slope = schedule.max_slope()
    omega_low = modes.omega_min
    return AdiabaticWindowReport(
        max_slope=slope,
        omega_low=omega_low,
        relaxation_rate=relaxation_rate,
        slow_enough=bool(slope < 0.1 * omega_low),
        fast_enough=bool(slope > relaxation_rate),
    )


def _grid_for(duration: float, modes: ModeSpectrum, samples_per_period: int) -> int:
    """Samples per cycle resolving the fastest mode, rounded up to x4."""
    n = int(np.ceil(samples_per_period * duration * modes.omega_max / TWO_PI))
    return max(n + (-n) % 4, 8)
