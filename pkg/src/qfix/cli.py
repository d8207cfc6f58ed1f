"""Command-line front end: load JSON specs, run solvers and verifiers,
emit machine-readable reports.

Reports are deterministic for fixed inputs, flags and seed: they embed no
timestamps, floats serialize with full round-trip precision, and keys are
sorted.  Exit codes: 0 all checks passed, 1 a check or solver failed,
2 malformed input, 3 dimension cap exceeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .channels import (
    KrausChannel,
    SuperoperatorMatrix,
    channel_from_json,
    verify_cptp,
)
from .ctc import build_ctc_channel, k_invariance_probe, scenario_from_json, solve_history
from .fixpoint import FixedPointError, cesaro_iterate, spectral_fixed_point, EIG_CLUSTER_TOL
from .fock import (
    constraints_from_json,
    energy_operator,
    fock_constraints,
    fock_from_json,
    markov_mass_check,
    number_operator,
    pvm_grid,
    rank_one_truncation_norm,
    sample_k,
    truncation_defect,
    truncation_projection,
)
from .operators import (
    CertificationError,
    DensityOperator,
    Projection,
    matrix_from_json,
    partial_trace,
)
from .rand import random_subset_projection, random_subspace_projection, random_unit_vector

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_BAD_INPUT = 2
EXIT_DIM_CAP = 3

#: Desk-scale guardrails, overridable with --allow-large.
OPERATOR_DIM_CAP = 256
SUPEROP_DIM_CAP = 64

_DEFAULTS = {
    "solve": {"method": "spectral", "n": 999, "tol": 1e-8, "rho0": None},
    "verify-cptp": {"tol": 1e-8},
    "ctc-run": {"tol": 1e-8},
    "fock-check": {"epsilons": "0.5,0.2,0.1", "samples": 25},
    "k-probe": {"samples": 25, "bounds": None},
    "lemma-check": {"trials": 1000, "dim": 16},
}


class _CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        options = _resolve_options(args)
        handler = _HANDLERS[args.command]
        report, summary, exit_code = handler(options)
    except _CliError as err:
        _emit_diagnostic(str(err))
        return err.exit_code
    except (ValueError, CertificationError) as err:
        _emit_diagnostic(str(err))
        return EXIT_BAD_INPUT
    except FixedPointError as err:
        _emit_diagnostic(str(err))
        return EXIT_FAIL

    report["command"] = args.command
    report["version"] = __version__
    payload = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if options.get("output"):
        with open(options["output"], "w", encoding="utf-8") as handle:
            handle.write(payload)
    else:
        sys.stdout.write(payload)
    print(summary, file=sys.stderr)
    return exit_code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfix",
        description="Quantum-channel fixed points, CTC consistency, and "
        "truncated Fock-space constraint checks.",
    )
    parser.add_argument("--version", action="version", version=f"qfix {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file whose entries replace flags (strict keys)")
        p.add_argument("--seed", type=int, help="RNG seed (fallback: QFIX_SEED, then 0)")
        p.add_argument("--output", help="write the JSON report here instead of stdout")
        p.add_argument(
            "--allow-large",
            action="store_true",
            default=None,
            help="lift the operator/superoperator dimension caps",
        )

    p = sub.add_parser("solve", help="find a channel fixed point")
    p.add_argument("channel", help="channel JSON file")
    p.add_argument("--method", choices=["cesaro", "spectral"])
    p.add_argument("--n", type=int, help="Cesàro iteration count")
    p.add_argument("--tol", type=float, help="residual tolerance (spectral)")
    p.add_argument("--rho0", help="initial state matrix JSON (Cesàro; default I/d)")
    common(p)

    p = sub.add_parser("verify-cptp", help="certify trace preservation and complete positivity")
    p.add_argument("channel", help="channel JSON file")
    p.add_argument("--tol", type=float)
    common(p)

    p = sub.add_parser("ctc-run", help="solve a CTC scenario for a consistent history")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--tol", type=float)
    common(p)

    p = sub.add_parser("fock-check", help="run the truncation inequality checks on sampled states")
    p.add_argument("fock", help="Fock space JSON file")
    p.add_argument("constraints", help="constraint JSON file ({\"bounds\": [N, E]})")
    p.add_argument("--epsilons", help="comma-separated truncation scales")
    p.add_argument("--samples", type=int, help="states sampled per scale")
    common(p)

    p = sub.add_parser("k-probe", help="probe whether a scenario's channel respects the bounds")
    p.add_argument("scenario", help="scenario JSON file")
    p.add_argument("--bounds", help="comma-separated bounds N,E (default from state budget)")
    p.add_argument("--samples", type=int)
    common(p)

    p = sub.add_parser("lemma-check", help="exactness of the rank-one truncation norm formula")
    p.add_argument("--trials", type=int)
    p.add_argument("--dim", type=int, help="vector dimension for random trials")
    common(p)

    return parser


def _resolve_options(args) -> dict:
    """Merge CLI flags, config file and built-in defaults (flags win)."""
    options = dict(_DEFAULTS.get(args.command, {}))
    options.setdefault("allow_large", False)
    options.setdefault("output", None)

    config = {}
    if getattr(args, "config", None):
        config = _load_json(args.config)
        if not isinstance(config, dict):
            raise _CliError("config file must hold a JSON object", EXIT_BAD_INPUT)
        allowed = set(options) | {"seed"}
        unknown = set(config) - allowed
        if unknown:
            raise _CliError(
                f"unknown config fields for {args.command}: {sorted(unknown)}", EXIT_BAD_INPUT
            )
    for key, value in config.items():
        options[key] = value

    for key in list(options):
        flag = getattr(args, key, None)
        if flag is not None:
            options[key] = flag

    seed = getattr(args, "seed", None)
    if seed is None:
        seed = config.get("seed")
    if seed is None:
        env = os.environ.get("QFIX_SEED")
        if env is not None:
            try:
                seed = int(env)
            except ValueError:
                raise _CliError(f"QFIX_SEED must be an integer, got {env!r}", EXIT_BAD_INPUT)
    options["seed"] = int(seed) if seed is not None else 0

    for attr in ("channel", "scenario", "fock", "constraints"):
        if hasattr(args, attr):
            options[attr] = getattr(args, attr)
    return options


def _load_json(path: str):
    try:
        with open(path, encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise _CliError(f"no such file: {path}", EXIT_BAD_INPUT)
    except json.JSONDecodeError as err:
        raise _CliError(f"malformed JSON in {path}: {err}", EXIT_BAD_INPUT)


def _check_operator_cap(dim: int, options: dict):
    if dim > OPERATOR_DIM_CAP and not options["allow_large"]:
        raise _CliError(
            f"operator dimension {dim} exceeds cap {OPERATOR_DIM_CAP} "
            "(use --allow-large to override)",
            EXIT_DIM_CAP,
        )


def _check_superop_cap(dim: int, options: dict):
    if dim > SUPEROP_DIM_CAP and not options["allow_large"]:
        raise _CliError(
            f"superoperator construction at dimension {dim} exceeds cap {SUPEROP_DIM_CAP} "
            "(use --allow-large to override)",
            EXIT_DIM_CAP,
        )


def _load_channel(options: dict):
    obj = _load_json(options["channel"])
    channel = channel_from_json(obj)
    _check_operator_cap(channel.dim, options)
    return channel


def _cmd_solve(options: dict):
    channel = _load_channel(options)
    if options["method"] == "spectral":
        _check_superop_cap(channel.dim, options)
        result = spectral_fixed_point(channel, tol=float(options["tol"]))
    else:
        if options["rho0"]:
            rho0 = DensityOperator(matrix_from_json(_load_json(options["rho0"])))
        else:
            rho0 = DensityOperator.maximally_mixed(channel.dim)
        result = cesaro_iterate(channel, rho0, int(options["n"]))
    report = {
        "result": result.to_json(),
        "tolerances": {"tol": float(options["tol"]), "eig_cluster_tol": EIG_CLUSTER_TOL},
    }
    summary = (
        f"solve: method={result.method} residual={result.residual:.3e} "
        f"iterations_or_multiplicity={result.iterations_or_multiplicity}"
    )
    return report, summary, EXIT_OK


def _cmd_verify_cptp(options: dict):
    channel = _load_channel(options)
    if isinstance(channel, (KrausChannel, SuperoperatorMatrix)):
        _check_superop_cap(channel.dim, options)
    tol = float(options["tol"])
    cptp = verify_cptp(channel, tol=tol)
    report = {"report": cptp.to_json(), "tolerances": {"tol": tol}}
    verdict = "PASS" if cptp.passed else "FAIL"
    summary = (
        f"verify-cptp: {verdict} tp_defect={cptp.trace_preserving_defect:.3e} "
        f"choi_min={cptp.choi_min_eigenvalue:.3e}"
    )
    return report, summary, EXIT_OK if cptp.passed else EXIT_FAIL


def _load_scenario(options: dict):
    scenario = scenario_from_json(_load_json(options["scenario"]))
    _check_operator_cap(scenario.full_dim, options)
    _check_superop_cap(scenario.fock.dim, options)
    return scenario


def _cmd_ctc_run(options: dict):
    scenario = _load_scenario(options)
    tol = float(options["tol"])
    history = solve_history(scenario, tol=tol)
    report = {
        "history": history.to_json(),
        "post_t2_rule": scenario.post_t2_rule,
        "tolerances": {"tol": tol, "eig_cluster_tol": EIG_CLUSTER_TOL},
    }
    passed = history.consistency_residual <= tol
    summary = (
        f"ctc-run: residual={history.consistency_residual:.3e} "
        f"multiplicity={history.multiplicity} {'PASS' if passed else 'FAIL'}"
    )
    return report, summary, EXIT_OK if passed else EXIT_FAIL


def _cmd_fock_check(options: dict):
    space = fock_from_json(_load_json(options["fock"]))
    _check_operator_cap(space.dim, options)
    constraints = constraints_from_json(_load_json(options["constraints"]), space)
    grid = pvm_grid(constraints)
    epsilons = _parse_epsilons(options["epsilons"])
    samples = int(options["samples"])
    states = sample_k(constraints, space, samples, options["seed"]) if samples else []

    checks = []
    all_pass = True
    for epsilon in epsilons:
        p_eps = truncation_projection(constraints, grid, epsilon)
        markov_failures = 0
        jensen_failures = 0
        chain_failures = 0
        worst_mass = 1.0
        worst_defect = 0.0
        for rho in states:
            mass = markov_mass_check(rho.matrix, p_eps)
            defect = truncation_defect(rho.matrix, p_eps)
            worst_mass = min(worst_mass, mass.mass)
            worst_defect = max(worst_defect, defect.defect)
            if not mass.passed:
                markov_failures += 1
            if not defect.passed:
                jensen_failures += 1
            if defect.defect > epsilon + 1e-10:
                chain_failures += 1
        ok = markov_failures == 0 and jensen_failures == 0 and chain_failures == 0
        all_pass = all_pass and ok
        checks.append(
            {
                "epsilon": epsilon,
                "n_cutoffs": list(p_eps.n_cutoffs),
                "covers_whole_basis": p_eps.covers_whole_basis,
                "projection_rank": p_eps.projection.rank,
                "samples": len(states),
                "markov_failures": markov_failures,
                "jensen_failures": jensen_failures,
                "chain_failures": chain_failures,
                "worst_mass": worst_mass,
                "worst_defect": worst_defect,
                "pass": ok,
            }
        )
    report = {
        "fock": {"dim": space.dim, "statistics": space.statistics},
        "bounds": list(constraints.bounds),
        "checks": checks,
        "seed": options["seed"],
        "pass": all_pass,
        "tolerances": {"markov_slack": 1e-12, "jensen_slack": 1e-10, "k_tol": 1e-9},
    }
    summary = f"fock-check: {'PASS' if all_pass else 'FAIL'} over {len(epsilons)} scales, {len(states)} samples"
    return report, summary, EXIT_OK if all_pass else EXIT_FAIL


def _cmd_k_probe(options: dict):
    scenario = _load_scenario(options)
    channel = build_ctc_channel(scenario)
    bounds = options.get("bounds")
    if bounds:
        if isinstance(bounds, (list, tuple)):
            bounds = [float(x) for x in bounds]
        else:
            bounds = [float(x) for x in str(bounds).split(",")]
    else:
        # Default budget: the scenario state's own Fock expectations, doubled,
        # with a floor so the box never collapses.
        fock_state = partial_trace(
            scenario.rho_t1_minus.matrix, (scenario.h_in_dim, scenario.fock.dim), keep="second"
        )
        diagonal = np.diag(fock_state).real
        bounds = [
            max(2.0 * float(diagonal @ np.diag(obs).real), 0.5)
            for obs in (number_operator(scenario.fock), energy_operator(scenario.fock))
        ]
    constraints = fock_constraints(scenario.fock, bounds)
    probe = k_invariance_probe(
        channel, constraints, scenario.fock, int(options["samples"]), options["seed"]
    )
    report = {
        "probe": probe.to_json(),
        "bounds": list(constraints.bounds),
        "samples": int(options["samples"]),
        "seed": options["seed"],
        "tolerances": {"k_tol": 1e-9},
    }
    ok = probe.violations == 0
    summary = (
        f"k-probe: violations={probe.violations}/{options['samples']} "
        f"worst_excess={probe.worst_excess:.3e} {'PASS' if ok else 'FAIL'}"
    )
    return report, summary, EXIT_OK if ok else EXIT_FAIL


def _cmd_lemma_check(options: dict):
    trials = int(options["trials"])
    dim = int(options["dim"])
    _check_operator_cap(dim, options)
    rng = np.random.default_rng(options["seed"])
    max_diff = 0.0
    max_excess = -np.inf
    for trial in range(trials):
        psi = random_unit_vector(dim, rng)
        projection = (
            random_subset_projection(dim, rng)
            if trial % 2 == 0
            else random_subspace_projection(dim, rng)
        )
        result = rank_one_truncation_norm(psi, projection)
        max_diff = max(max_diff, abs(result.numeric - result.closed_form))
        max_excess = max(max_excess, result.numeric - result.two_beta_bound)

    # Degenerate branches with exact support separation.
    inside = np.zeros(dim, dtype=complex)
    inside[0] = 1.0
    half_proj = Projection.from_basis_indices(dim, range(dim // 2))
    outside = np.zeros(dim, dtype=complex)
    outside[dim - 1] = 1.0
    fully_kept = rank_one_truncation_norm(inside, half_proj)
    fully_cut = rank_one_truncation_norm(outside, half_proj)

    ok = (
        max_diff <= 1e-10
        and max_excess <= 1e-12
        and fully_kept.numeric == 0.0
        and fully_cut.numeric == 1.0
    )
    report = {
        "trials": trials,
        "dim": dim,
        "seed": options["seed"],
        "max_abs_difference": max_diff,
        "max_two_beta_excess": max_excess,
        "degenerate_inside_numeric": fully_kept.numeric,
        "degenerate_outside_numeric": fully_cut.numeric,
        "pass": ok,
        "tolerances": {"closed_form_tol": 1e-10, "two_beta_slack": 1e-12},
    }
    summary = f"lemma-check: {'PASS' if ok else 'FAIL'} max|numeric-closed|={max_diff:.3e}"
    return report, summary, EXIT_OK if ok else EXIT_FAIL


def _parse_epsilons(raw) -> list[float]:
    if isinstance(raw, (list, tuple)):
        values = [float(x) for x in raw]
    else:
        values = [float(x) for x in str(raw).split(",") if x.strip()]
    if not values or any(x <= 0 for x in values):
        raise _CliError(f"epsilons must be positive, got {raw!r}", EXIT_BAD_INPUT)
    return values


def _emit_diagnostic(message: str):
    print(json.dumps({"error": message}, sort_keys=True), file=sys.stderr)


_HANDLERS = {
    "solve": _cmd_solve,
    "verify-cptp": _cmd_verify_cptp,
    "ctc-run": _cmd_ctc_run,
    "fock-check": _cmd_fock_check,
    "k-probe": _cmd_k_probe,
    "lemma-check": _cmd_lemma_check,
}


if __name__ == "__main__":
    sys.exit(main())
