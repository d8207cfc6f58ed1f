"""End-to-end consistency of quantum dynamics through a causality-violating
region.

A scenario fixes a chronology-respecting factor, a Fock factor that gets
identified with its own past, the unitary acting between the two gluing
surfaces, and the state just before the first surface.  The once-around
map is a channel on the Fock factor; a consistent history is built from
one of its fixed points.  Factor ordering is everywhere
``chronology-respecting ⊗ Fock``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channels import (
    Channel,
    KrausChannel,
    apply,
    deutsch_channel,
    verify_cptp,
)
from .fixpoint import (
    EIG_CLUSTER_TOL,
    cesaro_iterate,
    fixed_point_multiplicity,
    spectral_fixed_point,
)
from .fock import ConstraintSet, FockSpace, expectations, k_membership, sample_k, fock_to_json
from .operators import (
    DensityOperator,
    as_matrix,
    hermitian_eig,
    matrix_from_json,
    matrix_to_json,
    operator_norm,
    partial_trace,
    tensor,
    trace_norm,
    _frozen_copy,
)

#: Tolerance for matching unitary eigenphases to multiples of 2π/period.
PHASE_TOL = 1e-9

POST_T2_RULES = ("vacuum_splice", "recycle_splice")


@dataclass(frozen=True, eq=False)
class CtcScenario:
    """Scenario data for one pass through the causality-violating region."""

    h_in_dim: int
    fock: FockSpace
    u: np.ndarray
    rho_t1_minus: DensityOperator
    post_t2_rule: str

    def __post_init__(self):
        h_in_dim = int(self.h_in_dim)
        if h_in_dim < 1:
            raise ValueError("h_in_dim must be positive")
        full = h_in_dim * self.fock.dim
        u = as_matrix(self.u)
        if u.shape != (full, full):
            raise ValueError(f"scenario unitary must be {full}x{full}")
        defect = operator_norm(u.conj().T @ u - np.eye(full))
        if defect > 1e-10:
            raise ValueError(f"scenario unitary defect {defect:.3e} exceeds 1e-10")
        if not isinstance(self.rho_t1_minus, DensityOperator):
            object.__setattr__(self, "rho_t1_minus", DensityOperator(self.rho_t1_minus))
        if self.rho_t1_minus.dim != full:
            raise ValueError("rho_t1_minus must live on the full space")
        if self.post_t2_rule not in POST_T2_RULES:
            raise ValueError(f"post_t2_rule must be one of {POST_T2_RULES}")
        object.__setattr__(self, "h_in_dim", h_in_dim)
        object.__setattr__(self, "u", _frozen_copy(u))

    @property
    def full_dim(self) -> int:
        return self.h_in_dim * self.fock.dim


@dataclass(frozen=True, eq=False)
class ConsistentHistory:
    """A solved history: the fixed point and the reassembled full states."""

    rho_in: DensityOperator
    rho1: DensityOperator
    rho_t2_minus: DensityOperator
    rho_t2_plus: DensityOperator
    consistency_residual: float
    multiplicity: int

    def to_json(self) -> dict:
        return {
            "rho_in": matrix_to_json(self.rho_in.matrix),
            "rho1": matrix_to_json(self.rho1.matrix),
            "rho_t2_minus": matrix_to_json(self.rho_t2_minus.matrix),
            "rho_t2_plus": matrix_to_json(self.rho_t2_plus.matrix),
            "consistency_residual": self.consistency_residual,
            "multiplicity": self.multiplicity,
        }


def derive_rho_in(scenario: CtcScenario) -> DensityOperator:
    """Reduced state on the chronology-respecting factor before the region."""
    reduced = partial_trace(
        scenario.rho_t1_minus.matrix,
        (scenario.h_in_dim, scenario.fock.dim),
        keep="first",
    )
    return DensityOperator(reduced)


def build_ctc_channel(scenario: CtcScenario, cptp_tol: float = 1e-8) -> KrausChannel:
    """Once-around channel of the scenario, certified CPTP."""
    rho_in = derive_rho_in(scenario)
    _, kraus = deutsch_channel(
        scenario.u, rho_in, env_dim=scenario.h_in_dim, sys_dim=scenario.fock.dim
    )
    report = verify_cptp(kraus, tol=cptp_tol)
    if not report.passed:
        raise ValueError(
            "scenario channel failed CPTP certification: "
            f"tp defect {report.trace_preserving_defect:.3e}, "
            f"choi min eigenvalue {report.choi_min_eigenvalue:.3e}"
        )
    return kraus


def solve_history(
    scenario: CtcScenario,
    tol: float = 1e-8,
    method: str = "spectral",
    cesaro_steps: int = 10_000,
) -> ConsistentHistory:
    """Solve the self-consistency condition and assemble the history.

    The Fock-factor state is the canonical fixed point of the once-around
    channel; the post-region state follows the scenario's splice rule.
    When several fixed points exist only a canonical representative is
    returned, with the multiplicity attached.
    """
    rho_in = derive_rho_in(scenario)
    channel = build_ctc_channel(scenario)

    if method == "spectral":
        result = spectral_fixed_point(channel, tol=tol)
    elif method == "cesaro":
        result = cesaro_iterate(
            channel, DensityOperator.maximally_mixed(channel.dim), cesaro_steps
        )
    else:
        raise ValueError(f"unknown solver method {method!r}")
    rho1 = result.rho
    multiplicity = (
        result.iterations_or_multiplicity
        if result.method == "spectral"
        else fixed_point_multiplicity(channel, EIG_CLUSTER_TOL)
    )

    dims = (scenario.h_in_dim, scenario.fock.dim)
    rho_t1_plus = tensor(rho_in.matrix, rho1.matrix)
    rho_t2_minus = scenario.u @ rho_t1_plus @ scenario.u.conj().T
    rho2 = partial_trace(rho_t2_minus, dims, keep="second")
    consistency = trace_norm(rho2 - rho1.matrix)

    out_chrono = partial_trace(rho_t2_minus, dims, keep="first")
    if scenario.post_t2_rule == "vacuum_splice":
        vacuum = np.zeros(scenario.fock.dim, dtype=complex)
        vacuum[scenario.fock.vacuum_index] = 1.0
        fock_part = np.outer(vacuum, vacuum.conj())
    else:  # recycle_splice
        fock_part = partial_trace(scenario.rho_t1_minus.matrix, dims, keep="second")
    rho_t2_plus = tensor(out_chrono, fock_part)

    return ConsistentHistory(
        rho_in=rho_in,
        rho1=rho1,
        rho_t2_minus=DensityOperator(rho_t2_minus),
        rho_t2_plus=DensityOperator(rho_t2_plus),
        consistency_residual=float(consistency),
        multiplicity=int(multiplicity),
    )


@dataclass(frozen=True, eq=False)
class CylinderFixedPoints:
    """Fixed-point data for unitary evolution around a closed time loop."""

    diagonal_fixed_state: DensityOperator
    pure_state_condition: tuple[int, ...]


def cylinder_fixed_points(
    hamiltonian, period: float, phase_tol: float = PHASE_TOL
) -> CylinderFixedPoints:
    """Fixed points of conjugation by ``exp(−iHt)`` on a closed time loop.

    Any state diagonal in the Hamiltonian eigenbasis is invariant; the
    canonical representative returned is the maximally mixed state.  Pure
    invariant *vectors* exist only at resonant eigenvalues ``2πk/t``; the
    matching integers ``k`` are reported (generically none).
    """
    if period <= 0:
        raise ValueError("period must be positive")
    energies, _ = hermitian_eig(hamiltonian)
    dim = len(energies)

    step = 2.0 * np.pi / period
    matches = set()
    for energy in energies:
        k = int(round(energy / step))
        if abs(energy - step * k) <= phase_tol:
            matches.add(k)

    return CylinderFixedPoints(
        diagonal_fixed_state=DensityOperator.maximally_mixed(dim),
        pure_state_condition=tuple(sorted(matches)),
    )


@dataclass(frozen=True)
class ProbeSample:
    before: tuple[float, ...]
    after: tuple[float, ...]
    member_after: bool


@dataclass(frozen=True, eq=False)
class KInvarianceProbe:
    """Sampled evidence for or against the bounded-cost invariance of a
    channel.  A falsifier, not a prover."""

    violations: int
    worst_excess: float
    per_sample: tuple[ProbeSample, ...]

    def to_json(self) -> dict:
        return {
            "violations": self.violations,
            "worst_excess": self.worst_excess,
            "per_sample": [
                {
                    "before": list(s.before),
                    "after": list(s.after),
                    "member_after": s.member_after,
                }
                for s in self.per_sample
            ],
        }


def k_invariance_probe(
    channel: Channel,
    constraints: ConstraintSet,
    space: FockSpace,
    samples: int,
    seed: int,
) -> KInvarianceProbe:
    """Draw member states, push them through the channel, and re-test
    membership."""
    if channel.dim != space.dim:
        raise ValueError("channel does not act on the Fock factor")
    records = []
    violations = 0
    worst = -np.inf
    for rho in sample_k(constraints, space, samples, seed):
        before = expectations(rho.matrix, constraints)
        image = apply(channel, rho.matrix)
        after_membership = k_membership(image, constraints)
        after = after_membership.expectations
        excess = max(e - b for e, b in zip(after, constraints.bounds))
        worst = max(worst, excess)
        if not after_membership.member:
            violations += 1
        records.append(ProbeSample(before, after, after_membership.member))
    if not records:
        worst = 0.0
    return KInvarianceProbe(violations, float(worst), tuple(records))


def scenario_to_json(scenario: CtcScenario) -> dict:
    return {
        "h_in_dim": scenario.h_in_dim,
        "fock": fock_to_json(scenario.fock),
        "u": matrix_to_json(scenario.u),
        "rho_t1_minus": matrix_to_json(scenario.rho_t1_minus.matrix),
        "post_t2_rule": scenario.post_t2_rule,
    }


def scenario_from_json(obj) -> CtcScenario:
    """Parse the scenario JSON format (strict keys)."""
    if not isinstance(obj, dict):
        raise ValueError("scenario JSON must be an object")
    required = {"h_in_dim", "fock", "u", "rho_t1_minus", "post_t2_rule"}
    extra = set(obj) - required
    if extra:
        raise ValueError(f"unknown keys in scenario JSON: {sorted(extra)}")
    missing = required - set(obj)
    if missing:
        raise ValueError(f"missing keys in scenario JSON: {sorted(missing)}")
    from .fock import fock_from_json

    return CtcScenario(
        h_in_dim=obj["h_in_dim"],
        fock=fock_from_json(obj["fock"]),
        u=matrix_from_json(obj["u"]),
        rho_t1_minus=DensityOperator(matrix_from_json(obj["rho_t1_minus"])),
        post_t2_rule=obj["post_t2_rule"],
    )
