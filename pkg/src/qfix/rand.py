"""Seeded random generators for states, unitaries, channels and projections.

All functions take an explicit ``numpy.random.Generator`` so callers
control determinism.
"""

from __future__ import annotations

import numpy as np

from .channels import KrausChannel
from .operators import DensityOperator, Projection


def ginibre_matrix(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2.0)


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase fixing."""
    q, r = np.linalg.qr(ginibre_matrix(dim, dim, rng))
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def random_unit_vector(dim: int, rng: np.random.Generator) -> np.ndarray:
    v = ginibre_matrix(dim, 1, rng).reshape(-1)
    return v / np.linalg.norm(v)


def ginibre_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> DensityOperator:
    """Random full-rank (or fixed-rank) mixed state."""
    g = ginibre_matrix(dim, rank or dim, rng)
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real)


def random_kraus_channel(dim: int, n_kraus: int, rng: np.random.Generator) -> KrausChannel:
    """Random CPTP channel: Ginibre blocks normalized to completeness."""
    blocks = [ginibre_matrix(dim, dim, rng) for _ in range(n_kraus)]
    total = sum(b.conj().T @ b for b in blocks)
    w, v = np.linalg.eigh(total)
    inv_root = v @ np.diag(1.0 / np.sqrt(w)) @ v.conj().T
    return KrausChannel(dim, tuple(b @ inv_root for b in blocks))


def random_subset_projection(dim: int, rng: np.random.Generator) -> Projection:
    """Random nonempty proper coordinate projection."""
    rank = int(rng.integers(1, dim))
    indices = rng.choice(dim, size=rank, replace=False)
    return Projection.from_basis_indices(dim, indices)


def random_subspace_projection(dim: int, rng: np.random.Generator) -> Projection:
    """Random nonempty proper projection onto a Haar-rotated subspace."""
    rank = int(rng.integers(1, dim))
    u = haar_unitary(dim, rng)
    basis = u[:, :rank]
    return Projection(basis @ basis.conj().T)
