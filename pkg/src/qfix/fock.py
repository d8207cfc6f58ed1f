"""Truncated Fock spaces, cost observables, and the bounded-cost state set.

A :class:`FockSpace` enumerates bosonic or fermionic occupation vectors
below hard particle-number and energy cutoffs; every basis vector carries
its ``(n, e)`` label, realizing the joint projection-valued measure of
the number and energy operators on a finite grid.

A :class:`ConstraintSet` is a family of commuting diagonal positive
observables with a bound box: a state belongs to the set when its
expectation vector stays inside the box.  The truncation machinery
(:func:`truncation_projection`, :func:`markov_mass_check`,
:func:`truncation_defect`, :func:`rank_one_truncation_norm`) provides
finite-rank approximations of such states with explicit trace-norm error
bounds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    DensityOperator,
    Projection,
    as_matrix,
    trace_norm,
    _frozen_copy,
)

#: Boundary slack for membership decisions.
K_TOL = 1e-9

#: Hard cap on enumerated basis sizes (dense operators downstream).
DEFAULT_BASIS_CAP = 4096

#: Relative slack when comparing accumulated mode energies to the cutoff,
#: so that exact-boundary states survive float rounding.
_ENERGY_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class FockSpace:
    """Enumerated occupation basis with per-state particle and energy labels."""

    mode_energies: tuple[float, ...]
    statistics: str  # "boson" | "fermion"
    n_max: int
    e_max: float
    basis: tuple[tuple[int, ...], ...]
    particle_counts: np.ndarray
    energies: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def vacuum_index(self) -> int:
        # Lexicographic enumeration puts the all-zero occupation first.
        return 0

    def index_of(self, occupation) -> int:
        occ = tuple(int(x) for x in occupation)
        try:
            return self.basis.index(occ)
        except ValueError:
            raise KeyError(f"occupation {occ} is not in the truncated basis") from None


def build_fock(
    mode_energies,
    statistics: str,
    n_max: int,
    e_max: float,
    basis_cap: int = DEFAULT_BASIS_CAP,
) -> FockSpace:
    """Enumerate all occupation vectors with total particle number at most
    ``n_max`` and total energy at most ``e_max``, in lexicographic order.

    Raises if the enumeration would exceed ``basis_cap`` basis vectors.
    """
    energies = tuple(float(e) for e in mode_energies)
    if not energies or any(e <= 0 for e in energies):
        raise ValueError("mode energies must be positive")
    if any(b < a for a, b in zip(energies, energies[1:])):
        raise ValueError("mode energies must be ascending")
    if statistics not in ("boson", "fermion"):
        raise ValueError(f"statistics must be 'boson' or 'fermion', got {statistics!r}")
    if n_max < 0 or e_max < 0:
        raise ValueError("cutoffs must be non-negative")

    slack = _ENERGY_SLACK * max(1.0, float(e_max))
    per_mode_cap = 1 if statistics == "fermion" else int(n_max)
    basis: list[tuple[int, ...]] = []

    def extend(prefix: list[int], used_n: int, used_e: float):
        if len(prefix) == len(energies):
            if len(basis) >= basis_cap:
                raise ValueError(
                    f"Fock basis exceeds cap of {basis_cap} states; "
                    "reduce n_max/e_max or raise basis_cap"
                )
            basis.append(tuple(prefix))
            return
        energy = energies[len(prefix)]
        occupancy = 0
        while occupancy <= min(per_mode_cap, n_max - used_n):
            total_e = used_e + occupancy * energy
            if total_e > e_max + slack:
                break
            prefix.append(occupancy)
            extend(prefix, used_n + occupancy, total_e)
            prefix.pop()
            occupancy += 1

    extend([], 0, 0.0)
    occ = np.array(basis, dtype=int)
    counts = occ.sum(axis=1)
    labels = occ @ np.array(energies)
    counts.setflags(write=False)
    labels.setflags(write=False)
    return FockSpace(
        mode_energies=energies,
        statistics=statistics,
        n_max=int(n_max),
        e_max=float(e_max),
        basis=tuple(basis),
        particle_counts=counts,
        energies=labels,
    )


def number_operator(space: FockSpace) -> np.ndarray:
    """Diagonal total particle-number operator."""
    return np.diag(space.particle_counts.astype(float)).astype(complex)


def energy_operator(space: FockSpace) -> np.ndarray:
    """Diagonal free Hamiltonian (sum of occupied mode energies)."""
    return np.diag(space.energies).astype(complex)


def one_particle_level_count(space: FockSpace, energy_bound: float) -> int:
    """Number of 1-particle levels (with multiplicity) at or below the bound."""
    return int(sum(1 for e in space.mode_energies if e <= energy_bound))


def spectral_subspace_dim(space: FockSpace, a1: float, a2: float) -> int:
    """Dimension of the joint spectral subspace ``{n ≤ a1, e ≤ a2}``.

    Always finite here, and bounded by the combinatorial estimate
    ``Σ_{n=0}^{⌊a1⌋} i(a2)ⁿ`` where ``i`` counts 1-particle levels.
    """
    if a1 < 0 or a2 < 0:
        raise ValueError("spectral bounds must be non-negative")
    inside = (space.particle_counts <= a1) & (space.energies <= a2)
    return int(np.count_nonzero(inside))


def subspace_dim_bound(space: FockSpace, a1: float, a2: float) -> float:
    """Combinatorial upper bound ``Σ_{n=0}^{⌊a1⌋} i(a2)ⁿ`` on the joint
    subspace dimension."""
    levels = one_particle_level_count(space, a2)
    return float(sum(levels**n for n in range(int(np.floor(a1)) + 1)))


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """Commuting diagonal positive observables with a bound box.

    A state is a member when every expectation ``Tr(ρ A_i)`` lies in
    ``[0, b_i]`` (up to the membership tolerance).
    """

    observables: tuple[np.ndarray, ...]
    bounds: tuple[float, ...]

    def __post_init__(self):
        obs = tuple(_frozen_copy(as_matrix(a)) for a in self.observables)
        bounds = tuple(float(b) for b in self.bounds)
        if not obs or len(obs) != len(bounds):
            raise ValueError("need one bound per observable")
        dim = obs[0].shape[0]
        for a in obs:
            if a.shape[0] != dim:
                raise ValueError("observables must share one dimension")
            if np.count_nonzero(a - np.diag(np.diag(a))):
                raise ValueError("observables must be diagonal in the working basis")
            diag = np.diag(a)
            if np.abs(diag.imag).max(initial=0.0) > 0 or diag.real.min(initial=0.0) < 0:
                raise ValueError("observable diagonals must be real and non-negative")
        if any(b <= 0 for b in bounds):
            raise ValueError("bounds must be positive")
        object.__setattr__(self, "observables", obs)
        object.__setattr__(self, "bounds", bounds)

    @property
    def m(self) -> int:
        return len(self.observables)

    @property
    def dim(self) -> int:
        return self.observables[0].shape[0]

    @property
    def diagonals(self) -> np.ndarray:
        """(dim, m) array of observable diagonals."""
        return np.column_stack([np.diag(a).real for a in self.observables])


def fock_constraints(space: FockSpace, bounds) -> ConstraintSet:
    """Bounded particle-number and energy budgets on a Fock space."""
    return ConstraintSet(
        observables=(number_operator(space), energy_operator(space)),
        bounds=tuple(float(b) for b in bounds),
    )


@dataclass(frozen=True, eq=False)
class PvmGrid:
    """Per-basis-vector value vectors of the joint diagonal observables."""

    points: np.ndarray  # (dim, m), all coordinates >= 0

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError("grid points must be a (dim, m) array")
        if pts.min(initial=0.0) < 0:
            raise ValueError("grid coordinates must be non-negative")
        pts = pts.copy()
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def pvm_grid(constraints: ConstraintSet) -> PvmGrid:
    return PvmGrid(constraints.diagonals)


@dataclass(frozen=True)
class KMembership:
    member: bool
    expectations: tuple[float, ...]


def expectations(rho, constraints: ConstraintSet) -> tuple[float, ...]:
    """Expectation vector ``(Tr(ρ A_1), …, Tr(ρ A_m))``."""
    a = as_matrix(rho)
    state_diag = np.diag(a).real
    return tuple(float(state_diag @ np.diag(obs).real) for obs in constraints.observables)


def k_membership(rho, constraints: ConstraintSet, k_tol: float = K_TOL) -> KMembership:
    """Test whether the expectation vector lies inside the bound box."""
    exps = expectations(rho, constraints)
    member = all(-k_tol <= e <= b + k_tol for e, b in zip(exps, constraints.bounds))
    return KMembership(bool(member), exps)


def convexity_check(rho_a, rho_b, alpha: float, constraints: ConstraintSet) -> bool:
    """Check that a convex mixture of two members is a member with the
    linearly interpolated expectation vector."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    mem_a = k_membership(rho_a, constraints)
    mem_b = k_membership(rho_b, constraints)
    if not (mem_a.member and mem_b.member):
        raise ValueError("convexity_check requires two members")
    mix = alpha * as_matrix(rho_a) + (1.0 - alpha) * as_matrix(rho_b)
    mem_mix = k_membership(mix, constraints)
    blended = alpha * np.array(mem_a.expectations) + (1.0 - alpha) * np.array(mem_b.expectations)
    linear = np.abs(np.array(mem_mix.expectations) - blended).max() <= 1e-12
    return bool(mem_mix.member and linear)


def cutoff_for(bound: float, m: int, epsilon: float) -> int:
    """Least positive integer ``n`` with ``4·m·bound/n < ε²``, by scan."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    n = 1
    while not 4.0 * m * bound / n < epsilon**2:
        n += 1
    return n


@dataclass(frozen=True, eq=False)
class TruncationProjection:
    """Finite-rank projection onto grid boxes sized by the Markov cutoffs."""

    epsilon: float
    n_cutoffs: tuple[int, ...]
    projection: Projection
    covers_whole_basis: bool  # the hard model truncation is already tighter


def truncation_projection(
    constraints: ConstraintSet, grid: PvmGrid, epsilon: float
) -> TruncationProjection:
    """Projection onto basis vectors with every coordinate below its cutoff.

    When the cutoffs exceed the enumerated grid in every coordinate the
    projection degenerates to the identity and is flagged, since the hard
    model cutoffs already truncate more aggressively.
    """
    m = constraints.m
    cutoffs = tuple(cutoff_for(b, m, epsilon) for b in constraints.bounds)
    pts = grid.points
    if pts.shape[1] != m:
        raise ValueError("grid coordinate count does not match the constraint set")
    inside = np.all(pts <= np.array(cutoffs), axis=1)
    projection = Projection.from_basis_indices(pts.shape[0], np.nonzero(inside)[0])
    covers = bool(inside.all())
    return TruncationProjection(float(epsilon), cutoffs, projection, covers)


@dataclass(frozen=True)
class MarkovMassReport:
    mass: float
    passed: bool


def markov_mass_check(rho, p_eps: TruncationProjection) -> MarkovMassReport:
    """Mass retained by the truncation; members must keep at least
    ``1 − ε²/4``."""
    a = as_matrix(rho)
    mass = float(np.real(np.trace(p_eps.projection.matrix @ a)))
    passed = mass >= 1.0 - p_eps.epsilon**2 / 4.0 - 1e-12
    return MarkovMassReport(mass, bool(passed))


@dataclass(frozen=True)
class TruncationDefectReport:
    defect: float
    jensen_bound: float
    passed: bool


def truncation_defect(rho, p_eps: TruncationProjection) -> TruncationDefectReport:
    """Trace-norm error of compressing a state with the truncation.

    ``defect = ‖PρP − ρ‖₁`` never exceeds ``2√(Tr((1−P)ρ))``; chaining
    with the Markov mass bound gives ``defect ≤ ε`` for members.
    """
    a = as_matrix(rho)
    p = p_eps.projection.matrix
    defect = trace_norm(p @ a @ p - a)
    leaked = max(float(np.real(np.trace(a - p @ a @ p))), 0.0)
    jensen = 2.0 * np.sqrt(leaked)
    return TruncationDefectReport(float(defect), float(jensen), bool(defect <= jensen + 1e-10))


@dataclass(frozen=True)
class RankOneTruncationReport:
    numeric: float
    closed_form: float
    two_beta_bound: float
    beta: float


def rank_one_truncation_norm(psi, projection) -> RankOneTruncationReport:
    """Exact trace norm of ``P|ψ⟩⟨ψ|P − |ψ⟩⟨ψ|`` for a unit vector.

    With ``β = ‖(1−P)ψ‖`` the norm is exactly ``β√(4−3β²)``, which never
    exceeds ``2β``.  The degenerate branches return exact values:
    ``Pψ = 0`` gives 1, ``(1−P)ψ = 0`` gives 0.
    """
    v = np.asarray(psi, dtype=complex).reshape(-1)
    norm = float(np.linalg.norm(v))
    if abs(norm - 1.0) > 1e-12:
        raise ValueError(f"psi must be a unit vector, got norm {norm!r}")
    p = as_matrix(projection)
    if p.shape[0] != v.size:
        raise ValueError("projection dimension does not match the vector")
    inside = p @ v
    outside = v - inside
    alpha = float(np.linalg.norm(inside))
    beta = float(np.linalg.norm(outside))
    if alpha == 0.0:
        return RankOneTruncationReport(1.0, 1.0, 2.0 * beta, beta)
    if beta == 0.0:
        return RankOneTruncationReport(0.0, 0.0, 0.0, 0.0)
    rank_one = np.outer(v, v.conj())
    numeric = trace_norm(p @ rank_one @ p - rank_one)
    clipped = min(beta, 1.0)
    closed = clipped * np.sqrt(4.0 - 3.0 * clipped**2)
    return RankOneTruncationReport(float(numeric), float(closed), 2.0 * beta, beta)


def sample_k(
    constraints: ConstraintSet,
    space: FockSpace,
    count: int,
    seed: int,
) -> list[DensityOperator]:
    """Deterministic sample of member states.

    Every draw is either a random mixed state supported on the basis
    vectors whose grid point lies inside the bound box (such states are
    members automatically), or a convex mixture of one of those with a
    random excited state at a weight small enough to respect the bounds.
    """
    if count < 0:
        raise ValueError("count must be non-negative")
    if constraints.dim != space.dim:
        raise ValueError("constraint set does not act on this Fock space")
    rng = np.random.default_rng(seed)
    pts = constraints.diagonals
    bounds = np.array(constraints.bounds)
    interior = np.nonzero(np.all(pts <= bounds, axis=1))[0]
    if interior.size == 0:
        raise ValueError("K sampler has no support: no basis vector lies inside the bound box")

    # Low-excitation pool: basis vectors sorted by how far they overshoot
    # the box, used as mixture partners.
    overshoot = np.max(pts / bounds, axis=1)
    low_order = np.argsort(overshoot, kind="stable")
    low_pool = low_order[: max(interior.size + 4, min(space.dim, 8))]

    dim = space.dim
    samples: list[DensityOperator] = []
    for trial in range(count):
        base = _embedded_ginibre(dim, interior, rng)
        if trial % 2 == 1:
            pool = low_pool if trial % 4 == 1 else np.arange(dim)
            excited = _embedded_ginibre(dim, pool, rng)
            weight = _mixture_weight(base, excited, constraints, rng)
            state = (1.0 - weight) * base + weight * excited
        else:
            state = base
        membership = k_membership(state, constraints)
        if not membership.member:
            raise AssertionError("sampler produced a non-member; this is a bug")
        samples.append(DensityOperator(state))
    return samples


def _embedded_ginibre(dim: int, support: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    r = len(support)
    g = rng.standard_normal((r, r)) + 1j * rng.standard_normal((r, r))
    block = g @ g.conj().T
    block /= np.trace(block).real
    out = np.zeros((dim, dim), dtype=complex)
    out[np.ix_(support, support)] = block
    return out


def _mixture_weight(base, excited, constraints: ConstraintSet, rng) -> float:
    e_base = np.array(expectations(base, constraints))
    e_exc = np.array(expectations(excited, constraints))
    bounds = np.array(constraints.bounds)
    cap = 1.0
    for lo, hi, b in zip(e_base, e_exc, bounds):
        if hi > b:
            cap = min(cap, (b - lo) / (hi - lo))
    return 0.9 * cap * rng.uniform(0.0, 1.0)


def fock_to_json(space: FockSpace) -> dict:
    return {
        "energies": list(space.mode_energies),
        "statistics": space.statistics,
        "n_max": space.n_max,
        "e_max": space.e_max,
    }


def fock_from_json(obj, basis_cap: int = DEFAULT_BASIS_CAP) -> FockSpace:
    """Parse ``{"energies": [...], "statistics": ..., "n_max": ..., "e_max": ...}``."""
    if not isinstance(obj, dict):
        raise ValueError("Fock JSON must be an object")
    required = {"energies", "statistics", "n_max", "e_max"}
    extra = set(obj) - required
    if extra:
        raise ValueError(f"unknown keys in Fock JSON: {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise ValueError(f"missing keys in Fock JSON: {sorted(missing)}")
    return build_fock(
        obj["energies"], obj["statistics"], obj["n_max"], obj["e_max"], basis_cap=basis_cap
    )


def constraints_from_json(obj, space: FockSpace) -> ConstraintSet:
    """Parse ``{"bounds": [N, E]}`` against a Fock space."""
    if not isinstance(obj, dict):
        raise ValueError("constraint JSON must be an object")
    extra = set(obj) - {"bounds"}
    if extra:
        raise ValueError(f"unknown keys in constraint JSON: {sorted(extra)}")
    bounds = obj.get("bounds")
    if not isinstance(bounds, list) or len(bounds) != 2:
        raise ValueError("constraint JSON needs 'bounds': [N, E]")
    return fock_constraints(space, bounds)


def constraints_to_json(constraints: ConstraintSet) -> dict:
    return {"bounds": list(constraints.bounds)}
