"""Harmonic model of a microtrap ion array and its normal-mode spectrum.

Each ion sits in its own local well (frequency ``omega0``) and couples to
its neighbours through the curvature of the pair Coulomb potential at the
equilibrium separation.  Units are dimensionless with hbar = 1; frequencies
are quoted in units of the local trap frequency unless overridden.

Sign convention for the curvature ``kappa``: positive for displacements
along the array axis (longitudinal), negative for transverse displacements,
where the Coulomb curvature softens the trap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonPositiveModeError

__all__ = [
    "IonArrayConfig",
    "ModeSpectrum",
    "build_hessian",
    "diagonalize_modes",
    "analyze_array",
    "pair_curvatures",
    "potential_energy",
    "finite_difference_hessian",
]


@dataclass(frozen=True)
class IonArrayConfig:
    """Geometry and stiffness parameters of a microtrap ion array.

    Parameters
    ----------
    n_ions : int
        Number of ions, >= 1.
    omega0 : float or sequence of float
        Local trap frequency per ion (scalar broadcasts to all ions).
    kappa : float
        Second derivative of the pair Coulomb potential at the
        nearest-neighbour separation.  Positive = longitudinal axis.
    spacing : float
        Nearest-neighbour equilibrium separation.
    mass : float
        Ion mass (dimensionless, default 1).
    positions : sequence of float, optional
        Equilibrium positions, strictly increasing.  Defaults to a uniform
        chain ``j * spacing``.
    topology : {"chain", "ring"}
        Open chain or periodic ring.  On a ring the coordinate is the arc
        length with period ``n_ions * spacing``.
    coupling : {"nearest", "inverse_cube"}
        Nearest-neighbour constant curvature, or all-pair curvatures scaled
        by ``(spacing / r)**3`` with ``r`` the pair separation.
    """

    n_ions: int
    omega0: tuple[float, ...] | float = 1.0
    kappa: float = 0.1
    spacing: float = 1.0
    mass: float = 1.0
    positions: tuple[float, ...] | None = None
    topology: str = "chain"
    coupling: str = "nearest"

    def __post_init__(self):
        if self.n_ions < 1:
            raise ValueError("n_ions must be >= 1")
        if self.mass <= 0:
            raise ValueError("mass must be > 0")
        if self.spacing <= 0:
            raise ValueError("spacing must be > 0")
        if self.topology not in ("chain", "ring"):
            raise ValueError(f"unknown topology {self.topology!r}")
        if self.coupling not in ("nearest", "inverse_cube"):
            raise ValueError(f"unknown coupling {self.coupling!r}")
        om = np.atleast_1d(np.asarray(self.omega0, dtype=float))
        if om.size == 1:
            om = np.full(self.n_ions, om[0])
        if om.size != self.n_ions:
            raise ValueError("omega0 must be scalar or length n_ions")
        if np.any(om <= 0):
            raise ValueError("all trap frequencies must be > 0")
        object.__setattr__(self, "omega0", tuple(om))
        if self.positions is None:
            pos = np.arange(self.n_ions, dtype=float) * self.spacing
        else:
            pos = np.asarray(self.positions, dtype=float)
            if pos.size != self.n_ions:
                raise ValueError("positions must have length n_ions")
            if np.any(np.diff(pos) <= 0):
                raise ValueError("positions must be strictly increasing")
        object.__setattr__(self, "positions", tuple(pos))

    @property
    def trap_frequencies(self) -> np.ndarray:
        return np.asarray(self.omega0, dtype=float)

    def separation(self, i: int, j: int) -> float:
        """Equilibrium separation of ions i and j (minimal image on a ring)."""
        d = abs(self.positions[i] - self.positions[j])
        if self.topology == "ring":
            period = self.n_ions * self.spacing
            d = min(d, period - d)
        return d


def pair_curvatures(cfg: IonArrayConfig) -> list[tuple[int, int, float]]:
    """Coupled ion pairs (i < j) and their curvature kappa_ij."""
    pairs = []
    n = cfg.n_ions
    if cfg.coupling == "nearest":
        for j in range(n - 1):
            pairs.append((j, j + 1, cfg.kappa))
        if cfg.topology == "ring" and n > 2:
            pairs.append((0, n - 1, cfg.kappa))
    else:
        for i in range(n):
            for j in range(i + 1, n):
                r = cfg.separation(i, j)
                pairs.append((i, j, cfg.kappa * (cfg.spacing / r) ** 3))
    return pairs


def build_hessian(cfg: IonArrayConfig) -> np.ndarray:
    """Assemble the (symmetric) Hessian of the harmonic array model.

    Diagonal: m * omega0_j**2 plus the curvature of every pair the ion
    participates in; off-diagonal: -kappa_ij for coupled pairs.
    """
    om = cfg.trap_frequencies
    v = np.diag(cfg.mass * om**2)
    for i, j, kap in pair_curvatures(cfg):
        v[i, i] += kap
        v[j, j] += kap
        v[i, j] -= kap
        v[j, i] -= kap
    return v


@dataclass(frozen=True, eq=False)
class ModeSpectrum:
    """Normal-mode frequencies and coupling coefficients of an ion array.

    ``mode_matrix`` columns are the orthonormal modes, frequencies ascending,
    the largest-magnitude entry of each column positive.  ``coupling_matrix``
    holds D_{mu k} / sqrt(2 m omega_k), the per-ion sideband coupling weight
    of mode k.
    """

    frequencies: np.ndarray
    mode_matrix: np.ndarray
    coupling_matrix: np.ndarray
    mass: float = 1.0

    @property
    def n_modes(self) -> int:
        return len(self.frequencies)

    @property
    def n_ions(self) -> int:
        return self.mode_matrix.shape[0]

    @property
    def omega_min(self) -> float:
        return float(self.frequencies.min())

    @property
    def omega_max(self) -> float:
        return float(self.frequencies.max())

    def restrict(self, mode_indices) -> "ModeSpectrum":
        """Keep only the selected mode columns (sideband addressing).

        The result is no longer a complete spectrum (its mode matrix is
        rectangular), but carries exactly the data the driven dynamics of
        the selected modes needs.
        """
        idx = np.atleast_1d(np.asarray(mode_indices, dtype=int))
        return ModeSpectrum(
            frequencies=self.frequencies[idx].copy(),
            mode_matrix=self.mode_matrix[:, idx].copy(),
            coupling_matrix=self.coupling_matrix[:, idx].copy(),
            mass=self.mass,
        )


def diagonalize_modes(hessian: np.ndarray, mass: float = 1.0) -> ModeSpectrum:
    """Diagonalize a Hessian into a ModeSpectrum.

    Raises
    ------
    NonPositiveModeError
        If any eigenvalue of the Hessian is <= 0 (unstable configuration).
    """
    v = np.asarray(hessian, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ValueError("hessian must be a square matrix")
    if not np.allclose(v, v.T, atol=1e-12):
        raise ValueError("hessian must be symmetric")
    evals, vecs = np.linalg.eigh(v)
    if np.any(evals <= 0):
        raise NonPositiveModeError(
            f"non-positive mode eigenvalue(s): {evals[evals <= 0]}"
        )
    omega = np.sqrt(evals / mass)
    order = np.argsort(omega, kind="stable")
    omega = omega[order]
    vecs = vecs[:, order]
    for k in range(vecs.shape[1]):
        pivot = np.argmax(np.abs(vecs[:, k]))
        if vecs[pivot, k] < 0:
            vecs[:, k] = -vecs[:, k]
    coupling = vecs / np.sqrt(2.0 * mass * omega)[None, :]
    return ModeSpectrum(
        frequencies=omega,
        mode_matrix=vecs,
        coupling_matrix=coupling,
        mass=mass,
    )


def analyze_array(cfg: IonArrayConfig) -> ModeSpectrum:
    """Build the Hessian of an array and diagonalize it."""
    return diagonalize_modes(build_hessian(cfg), cfg.mass)


def potential_energy(cfg: IonArrayConfig, displacements) -> float:
    """Explicit (anharmonic) potential at given displacements from equilibrium.

    Local wells are harmonic; each coupled pair contributes a Coulomb-form
    term whose second derivative at zero displacement equals kappa_ij:
    C / r for positive curvature (longitudinal, C = kappa r0^3 / 2) and
    C / sqrt(r0^2 + u^2) for negative curvature (transverse, C = -kappa r0^3).
    Used as the independent reference for finite-difference Hessian checks.
    """
    u = np.asarray(displacements, dtype=float)
    if u.size != cfg.n_ions:
        raise ValueError("displacements must have length n_ions")
    om = cfg.trap_frequencies
    total = 0.5 * cfg.mass * float(np.sum(om**2 * u**2))
    for i, j, kap in pair_curvatures(cfg):
        r0 = cfg.separation(i, j)
        if kap >= 0:
            c = kap * r0**3 / 2.0
            total += c / abs(r0 + u[j] - u[i])
        else:
            c = -kap * r0**3
            total += c / np.hypot(r0, u[i] - u[j])
    return total


def finite_difference_hessian(cfg: IonArrayConfig, step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian of potential_energy at equilibrium."""
    n = cfg.n_ions
    h = step * cfg.spacing
    hess = np.zeros((n, n))
    e = np.eye(n)
    v0 = potential_energy(cfg, np.zeros(n))
    for i in range(n):
        vp = potential_energy(cfg, h * e[i])
        vm = potential_energy(cfg, -h * e[i])
        hess[i, i] = (vp - 2.0 * v0 + vm) / h**2
    for i in range(n):
        for j in range(i + 1, n):
            vpp = potential_energy(cfg, h * (e[i] + e[j]))
            vpm = potential_energy(cfg, h * (e[i] - e[j]))
            vmp = potential_energy(cfg, h * (e[j] - e[i]))
            vmm = potential_energy(cfg, -h * (e[i] + e[j]))
            hess[i, j] = hess[j, i] = (vpp - vpm - vmp + vmm) / (4.0 * h**2)
    return hess
