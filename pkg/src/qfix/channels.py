"""Quantum channels: Kraus, superoperator and Stinespring representations.

Vectorization convention: ``vec`` is row-major (C-order) flattening, so
``vec(A X B) = (A ⊗ Bᵀ) vec(X)`` and the superoperator of a Kraus map
``ρ ↦ Σ K ρ K†`` is ``Σ K ⊗ conj(K)``.  The Choi matrix is
``Σ_ij S(|i⟩⟨j|) ⊗ |i⟩⟨j|`` (trace = dim for a trace-preserving map);
its positivity at this single dilation dimension certifies complete
positivity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .operators import (
    CertificationError,
    DensityOperator,
    as_matrix,
    hermitian_eig,
    matrix_from_json,
    matrix_to_json,
    operator_norm,
    partial_trace,
    tensor,
    _frozen_copy,
)

#: Default tolerance for trace-preservation and Choi-positivity defects.
CPTP_TOL = 1e-8

#: Eigenvalues of a Stinespring environment state below this weight are
#: dropped when deriving Kraus operators.
KRAUS_DROP_TOL = 1e-12

#: Unitarity defect tolerance for Stinespring dilations.
UNITARY_TOL = 1e-10


def vec(m) -> np.ndarray:
    """Row-major flattening of a matrix to a vector."""
    return as_matrix(m).reshape(-1)


def unvec(v, dim: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`."""
    a = np.asarray(v, dtype=complex).reshape(-1)
    if dim is None:
        dim = int(round(np.sqrt(a.size)))
    if dim * dim != a.size:
        raise ValueError(f"vector of length {a.size} is not a flattened square matrix")
    return a.reshape(dim, dim)


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Channel given by Kraus operators ``{K_i}`` with ``Σ K†K ≈ I``."""

    dim: int
    kraus: tuple[np.ndarray, ...]

    def __post_init__(self):
        dim = int(self.dim)
        ops = tuple(_frozen_copy(as_matrix(k)) for k in self.kraus)
        if not ops:
            raise ValueError("a Kraus channel needs at least one operator")
        if any(k.shape != (dim, dim) for k in ops):
            raise ValueError(f"all Kraus operators must be {dim}x{dim}")
        total = sum(k.conj().T @ k for k in ops)
        defect = operator_norm(total - np.eye(dim))
        if defect > CPTP_TOL:
            raise CertificationError(
                f"Kraus completeness defect {defect:.3e} exceeds {CPTP_TOL:.1e}"
            )
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "kraus", ops)


@dataclass(frozen=True, eq=False)
class SuperoperatorMatrix:
    """Channel as a ``d² × d²`` matrix acting on vectorized operators."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = int(self.dim)
        a = as_matrix(self.matrix)
        if a.shape != (dim * dim, dim * dim):
            raise ValueError(f"superoperator must be {dim * dim}x{dim * dim}")
        # Trace preservation certified on the maximally mixed state.
        out = unvec(a @ vec(np.eye(dim) / dim), dim)
        defect = abs(complex(np.trace(out)) - 1.0)
        if defect > CPTP_TOL:
            raise CertificationError(
                f"superoperator does not preserve trace on I/d (defect {defect:.3e})"
            )
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "matrix", _frozen_copy(a))


@dataclass(frozen=True, eq=False)
class StinespringChannel:
    """Channel ``ρ ↦ Tr_env(U (ρ_env ⊗ ρ) U†)``.

    The environment is the first tensor factor (outer index).
    """

    env_dim: int
    sys_dim: int
    u: np.ndarray
    rho_env: DensityOperator

    def __post_init__(self):
        env_dim = int(self.env_dim)
        sys_dim = int(self.sys_dim)
        u = as_matrix(self.u)
        full = env_dim * sys_dim
        if u.shape != (full, full):
            raise ValueError(f"dilation unitary must be {full}x{full}")
        defect = operator_norm(u.conj().T @ u - np.eye(full))
        if defect > UNITARY_TOL:
            raise CertificationError(f"unitarity defect {defect:.3e} exceeds {UNITARY_TOL:.1e}")
        if not isinstance(self.rho_env, DensityOperator):
            object.__setattr__(self, "rho_env", DensityOperator(self.rho_env))
        if self.rho_env.dim != env_dim:
            raise ValueError("environment state dimension mismatch")
        object.__setattr__(self, "env_dim", env_dim)
        object.__setattr__(self, "sys_dim", sys_dim)
        object.__setattr__(self, "u", _frozen_copy(u))

    @property
    def dim(self) -> int:
        return self.sys_dim


Channel = Union[KrausChannel, SuperoperatorMatrix, StinespringChannel]


@dataclass(frozen=True, eq=False)
class ChoiMatrix:
    """Choi matrix ``Σ_ij S(|i⟩⟨j|) ⊗ |i⟩⟨j|`` of a Hermiticity-preserving map."""

    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = int(self.dim)
        a = as_matrix(self.matrix)
        if a.shape != (dim * dim, dim * dim):
            raise ValueError(f"Choi matrix must be {dim * dim}x{dim * dim}")
        herm = operator_norm(a - a.conj().T)
        if herm > UNITARY_TOL:
            raise CertificationError(f"Choi hermiticity defect {herm:.3e}")
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "matrix", _frozen_copy(a))


@dataclass(frozen=True)
class CptpReport:
    """Result of :func:`verify_cptp`."""

    trace_preserving_defect: float
    choi_min_eigenvalue: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "trace_preserving_defect": self.trace_preserving_defect,
            "choi_min_eigenvalue": self.choi_min_eigenvalue,
            "pass": self.passed,
        }


def channel_dim(channel: Channel) -> int:
    return channel.dim


def apply(channel: Channel, rho) -> np.ndarray:
    """Apply a channel to an operator (not necessarily a state)."""
    a = as_matrix(rho)
    if a.shape[0] != channel.dim:
        raise ValueError(f"operator dim {a.shape[0]} does not match channel dim {channel.dim}")
    if isinstance(channel, KrausChannel):
        out = np.zeros_like(a)
        for k in channel.kraus:
            out += k @ a @ k.conj().T
        return out
    if isinstance(channel, SuperoperatorMatrix):
        return unvec(channel.matrix @ vec(a), channel.dim)
    if isinstance(channel, StinespringChannel):
        full = channel.u @ tensor(channel.rho_env.matrix, a) @ channel.u.conj().T
        return partial_trace(full, (channel.env_dim, channel.sys_dim), keep="second")
    raise TypeError(f"not a channel representation: {type(channel).__name__}")


def stinespring_kraus(channel: StinespringChannel, drop_tol: float = KRAUS_DROP_TOL) -> KrausChannel:
    """Derive Kraus operators from a Stinespring triple.

    Spectral-decomposes the environment state ``ρ_env = Σ p_k |f_k⟩⟨f_k|``
    and builds ``K_{jk} = √p_k (⟨e_j| ⊗ I) U (|f_k⟩ ⊗ I)`` over the
    computational environment basis; weights below ``drop_tol`` are dropped.
    """
    env, sys = channel.env_dim, channel.sys_dim
    weights, vectors = hermitian_eig(channel.rho_env.matrix)
    u4 = channel.u.reshape(env, sys, env, sys)
    ops = []
    for k in range(env):
        p = float(weights[k])
        if p < drop_tol:
            continue
        # (env, sys, sys): T[j] = (⟨e_j| ⊗ I) U (|f_k⟩ ⊗ I)
        t = np.tensordot(u4, vectors[:, k], axes=([2], [0]))
        root = np.sqrt(p)
        for j in range(env):
            ops.append(root * t[j])
    return KrausChannel(sys, tuple(ops))


def to_kraus(channel: Channel, drop_tol: float = KRAUS_DROP_TOL) -> KrausChannel:
    """Convert any representation to Kraus form."""
    if isinstance(channel, KrausChannel):
        return channel
    if isinstance(channel, StinespringChannel):
        return stinespring_kraus(channel, drop_tol)
    if isinstance(channel, SuperoperatorMatrix):
        return choi_to_kraus(choi(channel), drop_tol)
    raise TypeError(f"not a channel representation: {type(channel).__name__}")


def kraus_to_superop(channel: KrausChannel) -> SuperoperatorMatrix:
    """Superoperator matrix ``Σ K ⊗ conj(K)`` of a Kraus channel."""
    d = channel.dim
    m = np.zeros((d * d, d * d), dtype=complex)
    for k in channel.kraus:
        m += np.kron(k, k.conj())
    return SuperoperatorMatrix(d, m)


def to_superop(channel: Channel) -> SuperoperatorMatrix:
    """Convert any representation to superoperator form."""
    if isinstance(channel, SuperoperatorMatrix):
        return channel
    if isinstance(channel, KrausChannel):
        return kraus_to_superop(channel)
    if isinstance(channel, StinespringChannel):
        return kraus_to_superop(stinespring_kraus(channel))
    raise TypeError(f"not a channel representation: {type(channel).__name__}")


def choi(channel: Channel) -> ChoiMatrix:
    """Choi matrix of a channel (any representation)."""
    if isinstance(channel, KrausChannel):
        d = channel.dim
        c = np.zeros((d * d, d * d), dtype=complex)
        for k in channel.kraus:
            w = vec(k)
            c += np.outer(w, w.conj())
    elif isinstance(channel, SuperoperatorMatrix):
        d = channel.dim
        # Reshuffle: C[(a,i),(b,j)] = M[(a,b),(i,j)].
        c = channel.matrix.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    elif isinstance(channel, StinespringChannel):
        return choi(stinespring_kraus(channel))
    else:
        raise TypeError(f"not a channel representation: {type(channel).__name__}")
    c = (c + c.conj().T) / 2.0
    return ChoiMatrix(d, c)


def choi_to_kraus(choi_matrix: ChoiMatrix, drop_tol: float = KRAUS_DROP_TOL) -> KrausChannel:
    """Kraus operators from the eigendecomposition of a PSD Choi matrix."""
    d = choi_matrix.dim
    weights, vectors = hermitian_eig(choi_matrix.matrix)
    if weights[0] < -CPTP_TOL:
        raise CertificationError(
            f"Choi matrix has negative eigenvalue {weights[0]:.3e}; map is not completely positive"
        )
    floor = max(drop_tol, drop_tol * float(weights[-1]))
    ops = []
    for lam, v in zip(weights, vectors.T):
        if lam > floor:
            ops.append(np.sqrt(lam) * unvec(v, d))
    return KrausChannel(d, tuple(ops))


def verify_cptp(channel_or_matrix, tol: float = CPTP_TOL) -> CptpReport:
    """Certify trace preservation and complete positivity.

    Accepts any channel representation, or a raw ``d² × d²`` array taken
    as a superoperator (useful for maps, such as the transpose, that are
    not channels and would be rejected by the typed constructors).
    """
    if isinstance(channel_or_matrix, (KrausChannel, SuperoperatorMatrix, StinespringChannel)):
        channel = channel_or_matrix
        if isinstance(channel, KrausChannel):
            total = sum(k.conj().T @ k for k in channel.kraus)
            defect = operator_norm(total - np.eye(channel.dim))
        elif isinstance(channel, StinespringChannel):
            derived = stinespring_kraus(channel)
            total = sum(k.conj().T @ k for k in derived.kraus)
            defect = operator_norm(total - np.eye(channel.dim))
        else:
            defect = _superop_tp_defect(channel.matrix, channel.dim)
        choi_matrix = choi(channel)
    else:
        a = as_matrix(channel_or_matrix)
        d = int(round(np.sqrt(a.shape[0])))
        if d * d != a.shape[0]:
            raise ValueError("raw superoperator must have square dimension d²")
        defect = _superop_tp_defect(a, d)
        c = a.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
        choi_matrix = ChoiMatrix(d, (c + c.conj().T) / 2.0)
    eigenvalues, _ = hermitian_eig(choi_matrix.matrix)
    lo = float(eigenvalues[0])
    passed = bool(defect <= tol and lo >= -tol)
    return CptpReport(float(defect), lo, passed)


def _superop_tp_defect(m: np.ndarray, dim: int) -> float:
    # Trace preservation for all inputs: Σ_i M[(i,i),(k,l)] = δ_kl.
    t = np.einsum("iikl->kl", m.reshape(dim, dim, dim, dim))
    return operator_norm(t - np.eye(dim))


def deutsch_channel(
    u,
    rho_in: DensityOperator,
    env_dim: int,
    sys_dim: int,
    kraus_drop_tol: float = KRAUS_DROP_TOL,
) -> tuple[StinespringChannel, KrausChannel]:
    """Once-around map ``ρ ↦ Tr_in(U (ρ_in ⊗ ρ) U†)`` of a causality-violating
    region, with the chronology-respecting input as environment.

    Returns the Stinespring triple together with its derived Kraus form.
    """
    if not isinstance(rho_in, DensityOperator):
        rho_in = DensityOperator(rho_in)
    stine = StinespringChannel(env_dim, sys_dim, u, rho_in)
    return stine, stinespring_kraus(stine, kraus_drop_tol)


def truncated_shift_channel(d: int) -> KrausChannel:
    """Finite truncation of the right-shift map, with a sink.

    ``V|i⟩ = |i+1⟩`` for ``i < d−1`` and ``V|d−1⟩ = 0``; the sink Kraus
    operator ``|d−1⟩⟨d−1|`` keeps the channel exactly trace preserving.
    The infinite shift has no fixed point; the truncation's unique fixed
    point piles all mass onto the sink state, which is the finite shadow
    of that escape to infinity.
    """
    if d < 2:
        raise ValueError("truncated shift needs dimension at least 2")
    v = np.zeros((d, d), dtype=complex)
    for i in range(d - 1):
        v[i + 1, i] = 1.0
    sink = np.zeros((d, d), dtype=complex)
    sink[d - 1, d - 1] = 1.0
    return KrausChannel(d, (v, sink))


def compose(s1: Channel, s2: Channel) -> SuperoperatorMatrix:
    """Composition "apply ``s1`` first, then ``s2``" as a superoperator."""
    if s1.dim != s2.dim:
        raise ValueError(f"cannot compose channels of dims {s1.dim} and {s2.dim}")
    m = to_superop(s2).matrix @ to_superop(s1).matrix
    return SuperoperatorMatrix(s1.dim, m)


def channel_to_json(channel: Channel) -> dict:
    """Serialize a channel; the representation tag is preserved."""
    if isinstance(channel, KrausChannel):
        return {
            "dim": channel.dim,
            "repr": "kraus",
            "kraus": [matrix_to_json(k) for k in channel.kraus],
        }
    if isinstance(channel, SuperoperatorMatrix):
        return {"dim": channel.dim, "repr": "superop", "matrix": matrix_to_json(channel.matrix)}
    if isinstance(channel, StinespringChannel):
        return {
            "dim": channel.sys_dim,
            "repr": "stinespring",
            "env_dim": channel.env_dim,
            "u": matrix_to_json(channel.u),
            "rho_env": matrix_to_json(channel.rho_env.matrix),
        }
    raise TypeError(f"not a channel representation: {type(channel).__name__}")


def channel_from_json(obj) -> Channel:
    """Parse the channel JSON format (strict keys per representation)."""
    if not isinstance(obj, dict):
        raise ValueError("channel JSON must be an object")
    repr_tag = obj.get("repr")
    if repr_tag == "kraus":
        _require_keys(obj, {"dim", "repr", "kraus"})
        ops = obj["kraus"]
        if not isinstance(ops, list) or not ops:
            raise ValueError("kraus channel JSON needs a nonempty 'kraus' list")
        return KrausChannel(obj["dim"], tuple(matrix_from_json(k) for k in ops))
    if repr_tag == "superop":
        _require_keys(obj, {"dim", "repr", "matrix"})
        return SuperoperatorMatrix(obj["dim"], matrix_from_json(obj["matrix"]))
    if repr_tag == "stinespring":
        _require_keys(obj, {"dim", "repr", "env_dim", "u", "rho_env"})
        return StinespringChannel(
            obj["env_dim"],
            obj["dim"],
            matrix_from_json(obj["u"]),
            DensityOperator(matrix_from_json(obj["rho_env"])),
        )
    raise ValueError(f"unknown channel repr {repr_tag!r}")


def _require_keys(obj: dict, allowed: set):
    extra = set(obj) - allowed
    if extra:
        raise ValueError(f"unknown keys in channel JSON: {sorted(extra)}")
    missing = allowed - set(obj)
    if missing:
        raise ValueError(f"missing keys in channel JSON: {sorted(missing)}")
