"""Shared fixtures and independent oracles for the test suite.

The oracle implementations here deliberately avoid the library code paths
they are used to check (loop-based partial traces, generate-and-filter
basis enumeration, direct Kraus sums), so each contract is verified by
two independent routes.
"""

import itertools

import numpy as np
import pytest

from qfix import build_fock, CtcScenario
from qfix.rand import ginibre_density, haar_unitary


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)


def brute_partial_trace(m, dims, keep):
    """Index-by-index partial trace, independent of the einsum route."""
    d1, d2 = dims
    m = np.asarray(m, dtype=complex)
    if keep == "first":
        out = np.zeros((d1, d1), dtype=complex)
        for i in range(d1):
            for k in range(d1):
                out[i, k] = sum(m[i * d2 + j, k * d2 + j] for j in range(d2))
        return out
    out = np.zeros((d2, d2), dtype=complex)
    for j in range(d2):
        for l in range(d2):
            out[j, l] = sum(m[i * d2 + j, i * d2 + l] for i in range(d1))
    return out


def brute_kraus_apply(kraus_ops, rho):
    """Direct Kraus sum, written without the channels module."""
    out = np.zeros_like(np.asarray(rho, dtype=complex))
    for k in kraus_ops:
        out = out + k @ rho @ k.conj().T
    return out


def brute_fock_enumeration(energies, statistics, n_max, e_max):
    """Generate-and-filter occupation enumeration (vs. the DFS builder)."""
    per_mode = 1 if statistics == "fermion" else n_max
    slack = 1e-12 * max(1.0, e_max)
    states = []
    for occ in itertools.product(range(per_mode + 1), repeat=len(energies)):
        n = sum(occ)
        e = sum(o * w for o, w in zip(occ, energies))
        if n <= n_max and e <= e_max + slack:
            states.append(occ)
    return sorted(states)


def brute_cutoff_scan(bound, m, epsilon, n_limit=10_000_000):
    """Exhaustive scan for the least n with 4*m*bound/n < epsilon**2."""
    for n in range(1, n_limit):
        if 4.0 * m * bound / n < epsilon**2:
            return n
    raise AssertionError("cutoff scan exhausted")


def swap_gate(d):
    """SWAP on two d-dimensional factors."""
    s = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            s[j * d + i, i * d + j] = 1.0
    return s


def single_mode_fock(dim):
    """Single-mode bosonic space of exactly ``dim`` levels."""
    return build_fock((1.0,), "boson", n_max=dim - 1, e_max=float(dim - 1))


def random_scenario(rng, h_in_dim=2, fock_dim=3, rule="vacuum_splice"):
    space = single_mode_fock(fock_dim)
    full = h_in_dim * space.dim
    return CtcScenario(
        h_in_dim=h_in_dim,
        fock=space,
        u=haar_unitary(full, rng),
        rho_t1_minus=ginibre_density(full, rng),
        post_t2_rule=rule,
    )


def pure_state(vec):
    v = np.asarray(vec, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def basis_state(dim, index):
    v = np.zeros(dim, dtype=complex)
    v[index] = 1.0
    return v
