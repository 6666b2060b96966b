"""Composite-Simpson helpers on uniform grids, block-wise over smooth pieces.

Force schedules are piecewise smooth (cycle and kick-segment boundaries sit
on grid points), so integrals are evaluated per smooth block and summed.
Convergence is estimated by comparing against the stride-2 subgrid, which
works for analytic and sampled shapes alike.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import cumulative_simpson, simpson

from .errors import QuadratureNotConvergedError

__all__ = [
    "blockwise_integral",
    "blockwise_cumulative",
    "check_refinement",
]


def blockwise_integral(y: np.ndarray, dx: float, block_edges) -> np.ndarray:
    """Simpson integral of y over [0, T], split at the given index edges.

    ``y`` may have leading batch axes; integration runs along the last axis.
    ``block_edges`` is an increasing list of sample indices starting at 0 and
    ending at y.shape[-1] - 1; each block must span an even interval count.
    """
    total = 0.0
    for lo, hi in zip(block_edges[:-1], block_edges[1:]):
        total = total + simpson(y[..., lo : hi + 1], dx=dx, axis=-1)
    return total


def blockwise_cumulative(y: np.ndarray, dx: float, block_edges) -> np.ndarray:
    """Cumulative Simpson antiderivative of y, continuous across blocks."""

    def cumulative(seg):
        # scipy's cumulative_simpson drops imaginary parts, so split
        if np.iscomplexobj(seg):
            return cumulative(seg.real) + 1j * cumulative(seg.imag)
        return cumulative_simpson(seg, dx=dx, axis=-1, initial=0.0)

    out = np.zeros_like(y)
    offset = np.zeros(y.shape[:-1], dtype=y.dtype)
    for lo, hi in zip(block_edges[:-1], block_edges[1:]):
        out[..., lo : hi + 1] = cumulative(y[..., lo : hi + 1]) + offset[..., None]
        offset = out[..., hi]
    return out


def check_refinement(fine, coarse, scale, rel_tol, context: str):
    """Raise QuadratureNotConvergedError if |fine - coarse| exceeds rel_tol.

    ``scale`` sets the magnitude against which the difference is judged
    (typically the integral of |integrand|), so near-zero results such as
    closed phase-space loops do not trip a spurious relative test.
    """
    diff = np.max(np.abs(np.asarray(fine) - np.asarray(coarse)))
    ref = max(float(np.max(scale)), 1e-300)
    if diff > rel_tol * ref:
        raise QuadratureNotConvergedError(
            f"{context}: grid-refinement change {diff:.3e} exceeds "
            f"{rel_tol:.1e} x scale {ref:.3e}"
        )
    return diff / ref
