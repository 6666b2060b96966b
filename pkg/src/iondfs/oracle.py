"""Brute-force propagation of the driven spin (x) phonon system.

This module is the independent check on everything the phase machinery in
``pulses`` claims: it time-orders midpoint-rule step exponentials of the
full rotating-frame Hamiltonian

    H(t) = - sum_k sum_mu g_mu^k(t) sigma_alpha^(mu)
           (a_k e^{-i w_k t} + a_k^dag e^{+i w_k t})

on a truncated Fock space and compares against the analytic spin-only gate
exp(-i Phi sigma sigma).  Nothing here reuses the gauge factorization being
verified.

Basis ordering (test-pinned): the composite index is

    index = spin + 2**n_qubits * (m_0 + (n_max+1) m_1 + ...)

with the qubit part varying fastest; within the spin block qubit 0 is the
least-significant bit, and mode occupations ascend after the qubits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .errors import (
    DimensionGuardError,
    DimensionMismatchError,
    FockCutoffError,
    NotConvergedError,
    ZeroTraceError,
)
from .modes import ModeSpectrum
from .pulses import ForceSchedule

__all__ = [
    "PAULI",
    "HilbertSpace",
    "build_hamiltonian",
    "propagate",
    "propagate_states",
    "analytic_gate",
    "pauli_product_gate",
    "fidelity_mod_phase",
    "fock_block",
    "fock_tail_population",
    "check_fock_tail",
]

DIM_GUARD = 2**20
TWO_PI = 2.0 * np.pi

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


@dataclass(frozen=True)
class HilbertSpace:
    """Qubits (x) truncated Fock modes, with the pinned basis ordering."""

    n_qubits: int
    n_modes: int
    fock_cutoff: int

    def __post_init__(self):
        if self.n_qubits < 1 or self.n_modes < 0 or self.fock_cutoff < 1:
            raise ValueError("need n_qubits >= 1, n_modes >= 0, fock_cutoff >= 1")
        if self.dim > DIM_GUARD:
            raise DimensionGuardError(
                f"dimension {self.dim} exceeds the 2**20 guard"
            )

    @property
    def mode_dim(self) -> int:
        return self.fock_cutoff + 1

    @property
    def spin_dim(self) -> int:
        return 2**self.n_qubits

    @property
    def dim(self) -> int:
        return self.spin_dim * self.mode_dim**self.n_modes

    def basis_index(self, qubit_bits, occupations=()) -> int:
        """Composite index of |bits; occupations> (qubit 0 = LSB)."""
        bits = tuple(qubit_bits)
        occ = tuple(occupations)
        if len(bits) != self.n_qubits or len(occ) != self.n_modes:
            raise ValueError("wrong number of qubit bits or mode occupations")
        spin = sum(int(b) << q for q, b in enumerate(bits))
        mode = 0
        for n in reversed(occ):
            if not 0 <= n <= self.fock_cutoff:
                raise ValueError("occupation outside the Fock cutoff")
            mode = mode * self.mode_dim + n
        return spin + self.spin_dim * mode

    def fock_slice(self, occupations) -> np.ndarray:
        """Indices of the spin block at fixed mode occupations."""
        base = self.basis_index((0,) * self.n_qubits, occupations)
        return base + np.arange(self.spin_dim)

    # -- operator builders ------------------------------------------------

    def qubit_operator(self, mat2: np.ndarray, qubit: int) -> np.ndarray:
        """Embed a single-qubit operator (identity on modes)."""
        if not 0 <= qubit < self.n_qubits:
            raise IndexError(f"qubit {qubit} out of range")
        op = np.eye(1, dtype=complex)
        for q in range(self.n_qubits):
            op = np.kron(mat2 if q == qubit else PAULI["i"], op)
        eye_modes = np.eye(self.mode_dim**self.n_modes, dtype=complex)
        return np.kron(eye_modes, op)

    def pauli(self, axis: str, qubit: int) -> np.ndarray:
        return self.qubit_operator(PAULI[axis], qubit)

    def lowering(self, mode: int) -> np.ndarray:
        """Annihilation operator of one mode (identity elsewhere)."""
        if not 0 <= mode < self.n_modes:
            raise IndexError(f"mode {mode} out of range")
        a = np.zeros((self.mode_dim, self.mode_dim), dtype=complex)
        ns = np.arange(1, self.mode_dim)
        a[ns - 1, ns] = np.sqrt(ns)
        op = np.eye(self.spin_dim, dtype=complex)
        for k in range(self.n_modes):
            op = np.kron(a if k == mode else np.eye(self.mode_dim, dtype=complex), op)
        return op

    def identity(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def basis_state(self, qubit_bits, occupations=()) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.basis_index(qubit_bits, occupations)] = 1.0
        return psi


class _ForceTerms:
    """Pre-assembled sigma (x) a operators for one schedule on one space."""

    def __init__(self, schedule: ForceSchedule, modes: ModeSpectrum, space: HilbertSpace):
        if space.n_modes != modes.n_modes:
            raise DimensionMismatchError(
                f"space has {space.n_modes} modes, spectrum has {modes.n_modes}"
            )
        for ion, _ in schedule.targets:
            if ion >= space.n_qubits:
                raise DimensionMismatchError(
                    f"target ion {ion} outside the {space.n_qubits}-qubit space"
                )
        self.schedule = schedule
        self.omega = modes.frequencies
        self.weights = []   # Dtilde_{mu k} per (target, mode)
        self.ops = []       # sigma_axis^(mu) @ a_k  (commuting factors)
        for t_idx, (ion, axis) in enumerate(schedule.targets):
            sig = space.pauli(axis, ion)
            for k in range(modes.n_modes):
                self.weights.append((t_idx, k, modes.coupling_matrix[ion, k]))
                self.ops.append(sig @ space.lowering(k))
        self.dim = space.dim
        self.fock_cutoff = space.fock_cutoff

    def hamiltonian(self, t: float) -> np.ndarray:
        forces = self.schedule.force(t)          # (n_targets,)
        h = np.zeros((self.dim, self.dim), dtype=complex)
        for (t_idx, k, w), op in zip(self.weights, self.ops):
            g = w * forces[t_idx]
            if g != 0.0:
                h += (-g * np.exp(-1j * self.omega[k] * t)) * op
        return h + h.conj().T

    def norm_bound(self) -> float:
        """Triangle-inequality bound on ||H(t)|| (||a|| = sqrt(n_max))."""
        amax = abs(self.schedule.amplitude)
        ladder = np.sqrt(self.fock_cutoff)
        return sum(2.0 * abs(w) * amax * ladder for (_, _, w) in self.weights)


def build_hamiltonian(
    schedule: ForceSchedule, modes: ModeSpectrum, space: HilbertSpace, t: float
) -> np.ndarray:
    """Rotating-frame Hamiltonian matrix at time t (Hermitian by construction)."""
    return _ForceTerms(schedule, modes, space).hamiltonian(t)


def _default_steps(schedule: ForceSchedule, modes: ModeSpectrum, per_period: int = 40) -> int:
    return max(int(np.ceil(per_period * schedule.span * modes.omega_max / TWO_PI)), 16)


def _step_product(terms: _ForceTerms, span: float, steps: int,
                  static: np.ndarray = None) -> np.ndarray:
    dt = span / steps
    u = np.eye(terms.dim, dtype=complex)
    for s in range(steps):
        h = terms.hamiltonian((s + 0.5) * dt)
        if static is not None:
            h = h + static
        u = expm(-1j * dt * h) @ u
    return u


def propagate(
    schedule: ForceSchedule,
    modes: ModeSpectrum,
    space: HilbertSpace,
    steps: int = None,
    doubling_tol: float = 1e-6,
    unitary_tol: float = 1e-8,
    static: np.ndarray = None,
) -> np.ndarray:
    """Time-ordered product of midpoint-rule step exponentials over the span.

    Runs at ``steps`` and ``2 * steps`` and raises NotConvergedError when the
    max-abs entry difference exceeds ``doubling_tol`` (pass a looser value for
    long schedules where only subspace fidelities are consumed -- the entry
    difference bounds the amplitude error, whose square is the infidelity).
    Returns the doubled-step propagator after a unitarity check.

    ``static`` optionally adds a constant Hermitian term to every step
    (used by the dephasing module).
    """
    terms = _ForceTerms(schedule, modes, space)
    if steps is None:
        steps = _default_steps(schedule, modes)
    coarse = _step_product(terms, schedule.span, steps, static)
    fine = _step_product(terms, schedule.span, 2 * steps, static)
    diff = float(np.max(np.abs(fine - coarse)))
    if diff > doubling_tol:
        raise NotConvergedError(
            f"step doubling changed the propagator by {diff:.3e} > {doubling_tol:.1e} "
            f"(steps={steps})"
        )
    dev = float(np.max(np.abs(fine.conj().T @ fine - np.eye(terms.dim))))
    if dev > unitary_tol:
        raise NotConvergedError(f"propagator unitarity deviation {dev:.3e}")
    return fine


def propagate_states(
    schedule: ForceSchedule,
    modes: ModeSpectrum,
    space: HilbertSpace,
    states: np.ndarray,
    steps: int = None,
    static_op: np.ndarray = None,
    static_weights: np.ndarray = None,
) -> np.ndarray:
    """Propagate a batch of state columns with the same midpoint stepping.

    ``states`` has shape (dim, n_batch).  ``static_op`` adds a constant
    Hermitian term whose per-column strength is ``static_weights`` (one
    Monte Carlo noise realization per column); the step exponential acts
    through a truncated Taylor series with automatic substepping, accurate
    to machine precision for the small step generators used here.
    """
    terms = _ForceTerms(schedule, modes, space)
    if steps is None:
        steps = _default_steps(schedule, modes)
    psi = np.array(states, dtype=complex)
    flat = psi.reshape(space.dim, -1)
    nb = flat.shape[1]
    if static_op is not None:
        if static_weights is None:
            static_weights = np.ones(nb)
        wmax = float(np.max(np.abs(static_weights)))
        static_norm = float(np.linalg.norm(static_op, 2)) * wmax
        weights = np.asarray(static_weights, dtype=float)[None, :]
    else:
        static_norm = 0.0
        weights = None
    dt = schedule.span / steps
    h_norm = terms.norm_bound() + static_norm
    substeps = max(1, int(np.ceil(h_norm * dt / 0.3)))
    sub_dt = dt / substeps
    n_terms = 14
    for s in range(steps):
        h = terms.hamiltonian((s + 0.5) * dt)
        for _ in range(substeps):
            acc = flat.copy()
            term = flat
            for j in range(1, n_terms + 1):
                hv = h @ term
                if weights is not None:
                    hv = hv + weights * (static_op @ term)
                term = (-1j * sub_dt / j) * hv
                acc = acc + term
            flat = acc
    return flat.reshape(psi.shape)


def analytic_gate(phase: float, axes=("z", "z")) -> np.ndarray:
    """Exact two-qubit gate exp(-i phase sigma_a^(0) sigma_b^(1))."""
    prod = np.kron(PAULI[axes[1]], PAULI[axes[0]])   # qubit 0 = LSB
    return np.cos(phase) * np.eye(4, dtype=complex) - 1j * np.sin(phase) * prod


def pauli_product_gate(phase: float, n_qubits: int, term_i, term_j) -> np.ndarray:
    """exp(-i phase sigma_a^(i) sigma_b^(j)) on an n-qubit register."""
    space = HilbertSpace(n_qubits, 0, 1)
    prod = space.pauli(term_i[1], term_i[0]) @ space.pauli(term_j[1], term_j[0])
    dim = 2**n_qubits
    return np.cos(phase) * np.eye(dim, dtype=complex) - 1j * np.sin(phase) * prod


def fidelity_mod_phase(u: np.ndarray, v: np.ndarray, projector: np.ndarray = None):
    """Subspace overlap fidelity, insensitive to a global phase.

    Returns (|tr(P U^dag V P)| / tr P, arg tr(P U^dag V P)).
    """
    if projector is None:
        projector = np.eye(u.shape[0], dtype=complex)
    weight = float(np.real(np.trace(projector)))
    if weight <= 1e-12:
        raise ZeroTraceError("projector has zero trace")
    t = np.trace(projector @ u.conj().T @ v @ projector)
    return float(np.abs(t)) / weight, float(np.angle(t))


def fock_block(u: np.ndarray, space: HilbertSpace, occupations) -> np.ndarray:
    """Spin block of an operator at fixed in/out mode occupations."""
    idx = space.fock_slice(occupations)
    return u[np.ix_(idx, idx)]


def fock_tail_population(states: np.ndarray, space: HilbertSpace, top_levels: int = 2) -> float:
    """Largest total population of the top Fock levels over the state batch."""
    if space.n_modes == 0:
        return 0.0
    flat = states.reshape(space.dim, -1)
    nb = flat.shape[1]
    # C-order multi-index, slowest first: (m_{K-1}, ..., m_0, spin, batch)
    shape = (space.mode_dim,) * space.n_modes + (space.spin_dim, nb)
    pops = (np.abs(flat) ** 2).reshape(shape)
    worst = 0.0
    for k in range(space.n_modes):
        axis = space.n_modes - 1 - k
        sel = [slice(None)] * pops.ndim
        sel[axis] = slice(space.mode_dim - top_levels, None)
        tail = pops[tuple(sel)].sum(axis=tuple(range(pops.ndim - 1)))
        worst = max(worst, float(tail.max()))
    return worst


def check_fock_tail(states: np.ndarray, space: HilbertSpace, tol: float = 1e-8):
    """Raise FockCutoffError if truncation-level population exceeds tol."""
    pop = fock_tail_population(states, space)
    if pop > tol:
        raise FockCutoffError(
            f"top-two Fock level population {pop:.3e} > {tol:.1e}; raise the cutoff"
        )
    return pop
