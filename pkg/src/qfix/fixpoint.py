"""Fixed-point solvers for quantum channels.

Two routes to a fixed point:

* :func:`cesaro_iterate` averages the orbit ``S^k(ρ0)``; the residual of
  the mean of ``N+1`` iterates is bounded by ``2/(N+1)`` because the
  difference ``S(ρ(N)) − ρ(N)`` telescopes to
  ``(S^{N+1}(ρ0) − ρ0)/(N+1)``.
* :func:`spectral_fixed_point` projects the maximally mixed state onto
  the eigenvalue-1 cluster of the superoperator (the algebraic limit of
  the Cesàro average) and repairs rounding with a PSD truncation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .channels import Channel, apply, to_superop, unvec, vec
from .operators import DensityOperator, as_matrix, matrix_to_json, trace_norm

#: Superoperator eigenvalues within this distance of 1 count as fixed directions.
EIG_CLUSTER_TOL = 1e-8

#: Relative floor below which eigenvalues of a repaired candidate state are
#: treated as numerical dust and discarded (the discarded trace norm is
#: charged against the solver tolerance).
PSD_FLOOR_REL = 1e-12


class FixedPointError(RuntimeError):
    """The spectral solver could not certify a fixed point."""


@dataclass(frozen=True, eq=False)
class FixedPointResult:
    """A certified fixed-point candidate with its trace-norm residual."""

    rho: DensityOperator
    residual: float
    method: str  # "cesaro" | "spectral"
    iterations_or_multiplicity: int

    def to_json(self) -> dict:
        return {
            "method": self.method,
            "residual": self.residual,
            "iterations_or_multiplicity": self.iterations_or_multiplicity,
            "rho": matrix_to_json(self.rho.matrix),
        }


def residual(channel: Channel, rho) -> float:
    """Trace norm of ``S(ρ) − ρ``."""
    a = as_matrix(rho)
    return trace_norm(apply(channel, a) - a)


def cesaro_iterate(channel: Channel, rho0, n: int) -> FixedPointResult:
    """Running average ``(1/(N+1)) Σ_{k=0}^{N} S^k(ρ0)``.

    Keeps only the current iterate and the running sum, so memory is
    O(d²) regardless of ``n``.  The returned residual obeys
    ``residual ≤ 2/(n+1)`` up to rounding.
    """
    if n < 0:
        raise ValueError("iteration count must be non-negative")
    current = as_matrix(rho0)
    if current.shape[0] != channel.dim:
        raise ValueError(
            f"initial state dim {current.shape[0]} does not match channel dim {channel.dim}"
        )
    total = current.copy()
    for _ in range(n):
        current = apply(channel, current)
        total += current
    mean = total / (n + 1)
    return FixedPointResult(
        rho=DensityOperator(mean),
        residual=residual(channel, mean),
        method="cesaro",
        iterations_or_multiplicity=int(n),
    )


def fixed_point_multiplicity(channel: Channel, tol: float = EIG_CLUSTER_TOL) -> int:
    """Number of superoperator eigenvalues within ``tol`` of 1 (with
    multiplicity): the dimension of the fixed-point set."""
    eigenvalues = np.linalg.eigvals(to_superop(channel).matrix)
    return int(np.sum(np.abs(eigenvalues - 1.0) <= tol))


def _eigenvalue_one_projector(m: np.ndarray, cluster_tol: float) -> tuple[np.ndarray, int]:
    """Spectral projector onto the eigenvalue cluster near 1.

    Computed from a sorted Schur form; the coupling block is removed by a
    Sylvester solve, which keeps the projector accurate even when the rest
    of the spectrum is defective.
    """
    t, z, sdim = scipy.linalg.schur(
        m, output="complex", sort=lambda lam: abs(lam - 1.0) <= cluster_tol
    )
    size = m.shape[0]
    if sdim == 0:
        eigenvalues = np.diag(t)
        nearest = eigenvalues[np.argmin(np.abs(eigenvalues - 1.0))]
        raise FixedPointError(
            "no fixed point at this tolerance: no superoperator eigenvalue within "
            f"{cluster_tol:.1e} of 1 (nearest is {nearest:.12g})"
        )
    if sdim == size:
        return np.eye(size, dtype=complex), int(sdim)
    t11 = t[:sdim, :sdim]
    t12 = t[:sdim, sdim:]
    t22 = t[sdim:, sdim:]
    coupling = scipy.linalg.solve_sylvester(t11, -t22, t12)
    block = np.zeros((size, size), dtype=complex)
    block[:sdim, :sdim] = np.eye(sdim)
    block[:sdim, sdim:] = coupling
    return z @ block @ z.conj().T, int(sdim)


def spectral_fixed_point(
    channel: Channel,
    tol: float = 1e-8,
    eig_cluster_tol: float = EIG_CLUSTER_TOL,
) -> FixedPointResult:
    """Fixed point from the superoperator spectrum.

    The candidate is the projection of the maximally mixed state onto the
    eigenvalue-1 cluster (the Cesàro limit of its orbit), symmetrized and
    split into positive and negative parts; if the repair discards more
    than ``tol`` of trace norm, or the certified residual exceeds ``tol``,
    the solver falls back to Cesàro iteration with ``N = ceil(2/tol)``.
    """
    d = channel.dim
    superop = to_superop(channel)
    projector, cluster_size = _eigenvalue_one_projector(superop.matrix, eig_cluster_tol)
    candidate = unvec(projector @ vec(np.eye(d) / d), d)
    candidate = (candidate + candidate.conj().T) / 2.0

    weights, vectors = np.linalg.eigh(candidate)
    floor = PSD_FLOOR_REL * max(float(weights[-1]), 0.0)
    keep = weights > floor
    discarded = float(np.abs(weights[~keep]).sum())
    if not keep.any() or discarded > tol:
        return _cesaro_fallback(channel, tol)
    kept = weights[keep] / weights[keep].sum()
    repaired = (vectors[:, keep] * kept) @ vectors[:, keep].conj().T

    r = residual(channel, repaired)
    if r > tol:
        return _cesaro_fallback(channel, tol)
    return FixedPointResult(
        rho=DensityOperator(repaired),
        residual=r,
        method="spectral",
        iterations_or_multiplicity=cluster_size,
    )


def _cesaro_fallback(channel: Channel, tol: float) -> FixedPointResult:
    steps = math.ceil(2.0 / tol)
    return cesaro_iterate(channel, DensityOperator.maximally_mixed(channel.dim), steps)
