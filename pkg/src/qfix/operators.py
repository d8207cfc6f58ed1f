"""Dense complex operator algebra for finite-dimensional quantum systems.

Conventions used by the whole package:

* Operators are dense square complex numpy arrays.
* In every tensor product the FIRST factor is the slow (outer) index:
  ``tensor(a, b)[(i, j), (k, l)] = a[i, k] * b[j, l]``.  All partial
  traces, Stinespring dilations and CTC constructions rely on this one
  convention.
* The trace norm is the sum of singular values; the operator norm is the
  largest singular value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Default certification tolerance for density operators and projections.
DEFAULT_CERT_TOL = 1e-9

#: Hermiticity defect above which ``hermitian_eig`` refuses to symmetrize.
DEFAULT_SYMMETRIZE_TOL = 1e-8

#: Idempotency / self-adjointness tolerance for projections.
PROJECTION_TOL = 1e-10


class CertificationError(ValueError):
    """An operator failed its structural certification."""


def as_matrix(m) -> np.ndarray:
    """Coerce to a validated square complex matrix.

    Accepts array-likes as well as wrapper types exposing a ``matrix``
    attribute (:class:`DensityOperator`, :class:`Projection`).  Rejects
    non-square shapes and non-finite entries.
    """
    inner = getattr(m, "matrix", m)
    a = np.asarray(inner, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix entries must be finite (no NaN/Inf)")
    return a


def tensor(a, b) -> np.ndarray:
    """Kronecker product; the first factor carries the outer index."""
    return np.kron(as_matrix(a), as_matrix(b))


def partial_trace(m, dims: tuple[int, int], keep: str) -> np.ndarray:
    """Trace out one factor of a bipartite operator.

    Parameters
    ----------
    m : array-like
        Operator on the product space, dimension ``dims[0] * dims[1]``.
    dims : (int, int)
        Dimensions of the two tensor factors (first factor outer).
    keep : {"first", "second"}
        Which factor the reduced operator lives on.

    The total trace is preserved: ``Tr(result) == Tr(m)``.
    """
    a = as_matrix(m)
    d1, d2 = int(dims[0]), int(dims[1])
    if d1 < 1 or d2 < 1 or d1 * d2 != a.shape[0]:
        raise ValueError(
            f"factor dims {dims} incompatible with operator of dim {a.shape[0]}"
        )
    blocks = a.reshape(d1, d2, d1, d2)
    if keep == "first":
        return np.einsum("ijkj->ik", blocks)
    if keep == "second":
        return np.einsum("ijil->jl", blocks)
    raise ValueError(f"keep must be 'first' or 'second', got {keep!r}")


def trace_norm(m) -> float:
    """Sum of singular values.  Equals the sum of |eigenvalues| for
    Hermitian input."""
    return float(np.linalg.svd(as_matrix(m), compute_uv=False).sum())


def operator_norm(m) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(as_matrix(m), 2))


def hermitian_eig(
    m, symmetrize_tol: float = DEFAULT_SYMMETRIZE_TOL
) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a (numerically) Hermitian matrix.

    The input is symmetrized to ``(m + m†)/2`` before factorization and
    rejected if its Hermiticity defect exceeds ``symmetrize_tol``.

    Returns
    -------
    (eigenvalues, eigenvectors)
        Real eigenvalues in ascending order and the unitary matrix of
        eigenvectors as columns, so ``m ≈ V @ diag(w) @ V†``.
    """
    a = as_matrix(m)
    defect = operator_norm(a - a.conj().T)
    if defect > symmetrize_tol:
        raise ValueError(
            f"hermiticity defect {defect:.3e} exceeds symmetrize "
            f"tolerance {symmetrize_tol:.3e}"
        )
    sym = (a + a.conj().T) / 2.0
    try:
        return np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"eigensolver did not converge on a {a.shape[0]}x{a.shape[0]} "
            f"Hermitian matrix: {exc}"
        ) from exc


def min_eigenvalue(m) -> float:
    """Smallest eigenvalue of the symmetrized input.  Used for
    positivity certification."""
    a = as_matrix(m)
    return float(np.linalg.eigvalsh((a + a.conj().T) / 2.0)[0])


def _frozen_copy(a: np.ndarray) -> np.ndarray:
    out = a.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """A certified quantum state.

    Certification (performed at construction):

    * Hermiticity defect ``‖M − M†‖_op ≤ cert_tol``,
    * minimum eigenvalue ``≥ −cert_tol``,
    * ``|Tr(M) − 1| ≤ cert_tol``.
    """

    matrix: np.ndarray
    cert_tol: float = DEFAULT_CERT_TOL

    def __post_init__(self):
        tol = float(self.cert_tol)
        if tol < 0:
            raise ValueError("cert_tol must be non-negative")
        a = as_matrix(self.matrix)
        herm = operator_norm(a - a.conj().T)
        if herm > tol:
            raise CertificationError(
                f"hermiticity defect {herm:.3e} exceeds cert_tol {tol:.3e}"
            )
        lo = min_eigenvalue(a)
        if lo < -tol:
            raise CertificationError(
                f"minimum eigenvalue {lo:.3e} below -cert_tol {-tol:.3e}"
            )
        tr = complex(np.trace(a))
        if abs(tr - 1.0) > tol:
            raise CertificationError(f"trace {tr:.12g} deviates from 1 beyond {tol:.3e}")
        object.__setattr__(self, "matrix", _frozen_copy(a))
        object.__setattr__(self, "cert_tol", tol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, dim: int, cert_tol: float = DEFAULT_CERT_TOL) -> "DensityOperator":
        return cls(np.eye(dim, dtype=complex) / dim, cert_tol)

    @classmethod
    def from_pure(cls, vec, cert_tol: float = DEFAULT_CERT_TOL) -> "DensityOperator":
        """State ``|v⟩⟨v|`` for a (normalized) vector ``v``."""
        v = np.asarray(vec, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / norm
        return cls(np.outer(v, v.conj()), cert_tol)


@dataclass(frozen=True, eq=False)
class Projection:
    """An orthogonal projection, optionally flagged as diagonal.

    ``basis_indices``, when given, asserts that the matrix is exactly the
    0/1 diagonal selecting those basis vectors.
    """

    matrix: np.ndarray
    basis_indices: tuple[int, ...] | None = None

    def __post_init__(self):
        a = as_matrix(self.matrix)
        idem = operator_norm(a @ a - a)
        herm = operator_norm(a - a.conj().T)
        if idem > PROJECTION_TOL or herm > PROJECTION_TOL:
            raise CertificationError(
                f"not a projection: idempotency defect {idem:.3e}, "
                f"hermiticity defect {herm:.3e}"
            )
        indices = self.basis_indices
        if indices is not None:
            indices = tuple(sorted(int(i) for i in indices))
            diag = np.zeros(a.shape[0])
            diag[list(indices)] = 1.0
            if not np.array_equal(a, np.diag(diag).astype(complex)):
                raise CertificationError(
                    "basis_indices given but the matrix is not the matching 0/1 diagonal"
                )
        object.__setattr__(self, "matrix", _frozen_copy(a))
        object.__setattr__(self, "basis_indices", indices)

    @classmethod
    def from_basis_indices(cls, dim: int, indices) -> "Projection":
        indices = tuple(sorted(int(i) for i in indices))
        if any(i < 0 or i >= dim for i in indices):
            raise ValueError(f"basis index out of range for dim {dim}")
        diag = np.zeros(dim)
        diag[list(indices)] = 1.0
        return cls(np.diag(diag).astype(complex), indices)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


def matrix_to_json(m) -> dict:
    """Serialize a matrix as ``{"dim": d, "entries": [[re, im], ...]}``
    in row-major order."""
    a = as_matrix(m)
    flat = a.reshape(-1)
    return {
        "dim": int(a.shape[0]),
        "entries": [[float(z.real), float(z.imag)] for z in flat],
    }


def matrix_from_json(obj) -> np.ndarray:
    """Parse the matrix JSON format.  Strict: unknown keys, wrong-length
    entry arrays and non-finite values are rejected."""
    if not isinstance(obj, dict):
        raise ValueError("matrix JSON must be an object")
    extra = set(obj) - {"dim", "entries"}
    if extra:
        raise ValueError(f"unknown keys in matrix JSON: {sorted(extra)}")
    if "dim" not in obj or "entries" not in obj:
        raise ValueError("matrix JSON requires 'dim' and 'entries'")
    dim = obj["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValueError(f"matrix dim must be a positive integer, got {dim!r}")
    entries = obj["entries"]
    if not isinstance(entries, list) or len(entries) != dim * dim:
        raise ValueError(
            f"entries must be a list of length {dim * dim}, "
            f"got length {len(entries) if isinstance(entries, list) else 'n/a'}"
        )
    data = np.empty(dim * dim, dtype=complex)
    for pos, entry in enumerate(entries):
        if (
            not isinstance(entry, (list, tuple))
            or len(entry) != 2
            or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in entry)
        ):
            raise ValueError(f"entry {pos} is not a [re, im] pair")
        data[pos] = complex(entry[0], entry[1])
    out = data.reshape(dim, dim)
    return as_matrix(out)
