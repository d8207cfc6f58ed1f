import numpy as np
import pytest

from qfix import (
    CertificationError,
    DensityOperator,
    KrausChannel,
    StinespringChannel,
    SuperoperatorMatrix,
    apply,
    channel_from_json,
    channel_to_json,
    choi,
    choi_to_kraus,
    compose,
    deutsch_channel,
    hermitian_eig,
    kraus_to_superop,
    operator_norm,
    partial_trace,
    to_superop,
    trace_norm,
    truncated_shift_channel,
    verify_cptp,
)
from qfix.fixpoint import spectral_fixed_point
from qfix.rand import ginibre_density, haar_unitary, random_kraus_channel

from conftest import basis_state, brute_kraus_apply, brute_partial_trace, pure_state, swap_gate

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)


def transpose_superop(d):
    m = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            m[i * d + j, j * d + i] = 1.0
    return SuperoperatorMatrix(d, m)


def depolarizing_qubit(p=0.3):
    pauli_y = np.array([[0, -1j], [1j, 0]], dtype=complex)
    pauli_z = np.diag([1.0, -1.0]).astype(complex)
    ops = (
        np.sqrt(1 - 3 * p / 4) * np.eye(2, dtype=complex),
        np.sqrt(p / 4) * PAULI_X,
        np.sqrt(p / 4) * pauli_y,
        np.sqrt(p / 4) * pauli_z,
    )
    return KrausChannel(2, ops)


class TestApply:
    def test_identity_channel(self, rng):
        channel = KrausChannel(3, (np.eye(3, dtype=complex),))
        rho = ginibre_density(3, rng).matrix
        np.testing.assert_allclose(apply(channel, rho), rho, atol=1e-14)

    def test_pauli_x_flips_basis_state(self):
        channel = KrausChannel(2, (PAULI_X,))
        out = apply(channel, pure_state([1, 0]))
        np.testing.assert_allclose(out, pure_state([0, 1]), atol=1e-14)

    def test_depolarizing_output_is_state(self, rng):
        channel = depolarizing_qubit()
        rho = ginibre_density(2, rng).matrix
        out = apply(channel, rho)
        np.testing.assert_allclose(out, brute_kraus_apply(channel.kraus, rho), atol=1e-13)
        DensityOperator(out)  # trace 1 and PSD within certification tolerance

    def test_representations_agree(self, rng):
        channel = random_kraus_channel(3, 2, rng)
        superop = to_superop(channel)
        rho = ginibre_density(3, rng).matrix
        np.testing.assert_allclose(apply(channel, rho), apply(superop, rho), atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            apply(KrausChannel(2, (np.eye(2, dtype=complex),)), np.eye(3))


class TestKrausToSuperop:
    def test_identity_channel(self):
        channel = KrausChannel(3, (np.eye(3, dtype=complex),))
        np.testing.assert_allclose(kraus_to_superop(channel).matrix, np.eye(9), atol=1e-14)

    def test_unitary_channel_matrix(self, rng):
        u = haar_unitary(2, rng)
        superop = kraus_to_superop(KrausChannel(2, (u,)))
        np.testing.assert_allclose(superop.matrix, np.kron(u, u.conj()), atol=1e-14)

    def test_apply_equivalence(self, rng):
        channel = random_kraus_channel(3, 2, rng)
        superop = kraus_to_superop(channel)
        for _ in range(20):
            rho = ginibre_density(3, rng).matrix
            np.testing.assert_allclose(apply(channel, rho), apply(superop, rho), atol=1e-12)


class TestChoi:
    def test_identity_channel_is_rank_one(self):
        c = choi(KrausChannel(3, (np.eye(3, dtype=complex),)))
        vals, _ = hermitian_eig(c.matrix)
        np.testing.assert_allclose(vals[:-1], 0.0, atol=1e-12)
        assert vals[-1] == pytest.approx(3.0, abs=1e-12)

    def test_transpose_choi_has_negative_eigenvalue(self):
        c = choi(transpose_superop(2))
        vals, _ = hermitian_eig(c.matrix)
        np.testing.assert_allclose(vals, [-1.0, 1.0, 1.0, 1.0], atol=1e-12)

    def test_stinespring_choi_is_psd(self, rng):
        channel = StinespringChannel(2, 2, haar_unitary(4, rng), ginibre_density(2, rng))
        vals, _ = hermitian_eig(choi(channel).matrix)
        assert vals[0] >= -1e-10

    def test_choi_trace_equals_dim(self, rng):
        channel = random_kraus_channel(3, 2, rng)
        assert np.trace(choi(channel).matrix).real == pytest.approx(3.0, abs=1e-10)


class TestVerifyCptp:
    def test_unitary_conjugation_passes(self, rng):
        report = verify_cptp(KrausChannel(3, (haar_unitary(3, rng),)))
        assert report.passed
        assert report.trace_preserving_defect < 1e-12

    def test_transpose_fails(self):
        report = verify_cptp(transpose_superop(2))
        assert not report.passed
        assert report.choi_min_eigenvalue == pytest.approx(-1.0, abs=1e-10)

    def test_raw_superoperator_array_is_accepted(self):
        report = verify_cptp(transpose_superop(2).matrix)
        assert not report.passed
        assert report.trace_preserving_defect < 1e-12

    def test_deutsch_channel_passes(self, rng):
        _, kraus = deutsch_channel(haar_unitary(6, rng), ginibre_density(2, rng), 2, 3)
        report = verify_cptp(kraus)
        assert report.passed


class TestDeutschChannel:
    def test_identity_evolution_fixes_everything(self, rng):
        rho_in = ginibre_density(2, rng)
        stine, kraus = deutsch_channel(np.eye(6, dtype=complex), rho_in, 2, 3)
        rho = ginibre_density(3, rng).matrix
        np.testing.assert_allclose(apply(stine, rho), rho, atol=1e-12)
        np.testing.assert_allclose(apply(kraus, rho), rho, atol=1e-12)

    def test_swap_gives_constant_channel(self, rng):
        rho_in = ginibre_density(3, rng)
        u = swap_gate(3)
        stine, kraus = deutsch_channel(u, rho_in, 3, 3)
        rho = ginibre_density(3, rng).matrix
        # independent oracle: loop-based partial trace of SWAP (rho_in ⊗ rho) SWAP
        full = u @ np.kron(rho_in.matrix, rho) @ u.conj().T
        expected = brute_partial_trace(full, (3, 3), "second")
        np.testing.assert_allclose(expected, rho_in.matrix, atol=1e-12)
        np.testing.assert_allclose(apply(stine, rho), rho_in.matrix, atol=1e-12)
        np.testing.assert_allclose(apply(kraus, rho), rho_in.matrix, atol=1e-12)

    def test_kraus_and_stinespring_agree(self, rng):
        stine, kraus = deutsch_channel(haar_unitary(4, rng), ginibre_density(2, rng), 2, 2)
        for _ in range(20):
            rho = ginibre_density(2, rng).matrix
            np.testing.assert_allclose(apply(stine, rho), apply(kraus, rho), atol=1e-10)

    def test_completeness_defect(self, rng):
        _, kraus = deutsch_channel(haar_unitary(8, rng), ginibre_density(2, rng), 2, 4)
        total = sum(k.conj().T @ k for k in kraus.kraus)
        assert operator_norm(total - np.eye(4)) <= 1e-10

    def test_trace_preservation_chain(self, rng):
        # Tr(S(rho)) = Tr(rho_in) Tr(rho) = Tr(rho)
        stine, _ = deutsch_channel(haar_unitary(6, rng), ginibre_density(3, rng), 3, 2)
        rho = ginibre_density(2, rng).matrix
        assert np.trace(apply(stine, rho)) == pytest.approx(np.trace(rho), abs=1e-10)

    def test_rejects_non_unitary(self, rng):
        with pytest.raises(CertificationError):
            deutsch_channel(np.ones((4, 4), dtype=complex), ginibre_density(2, rng), 2, 2)


class TestTruncatedShift:
    def test_single_shift(self):
        channel = truncated_shift_channel(3)
        out = apply(channel, pure_state(basis_state(3, 0)))
        np.testing.assert_allclose(out, pure_state(basis_state(3, 1)), atol=1e-14)

    def test_sink_is_fixed(self):
        channel = truncated_shift_channel(3)
        sink = pure_state(basis_state(3, 2))
        np.testing.assert_array_equal(brute_kraus_apply(channel.kraus, sink), sink)

    def test_completeness_is_exact(self):
        channel = truncated_shift_channel(5)
        total = sum(k.conj().T @ k for k in channel.kraus)
        np.testing.assert_array_equal(total, np.eye(5))

    def test_mass_escapes_to_sink(self):
        channel = truncated_shift_channel(8)
        result = spectral_fixed_point(channel)
        position = sum(i * result.rho.matrix[i, i].real for i in range(8))
        assert position == pytest.approx(7.0, abs=1e-12)

    def test_rejects_dim_one(self):
        with pytest.raises(ValueError):
            truncated_shift_channel(1)


class TestCompose:
    def test_identity_is_neutral(self, rng):
        channel = random_kraus_channel(2, 2, rng)
        identity = KrausChannel(2, (np.eye(2, dtype=complex),))
        combined = compose(identity, channel)
        rho = ginibre_density(2, rng).matrix
        np.testing.assert_allclose(apply(combined, rho), apply(channel, rho), atol=1e-12)

    def test_unitary_inverse(self, rng):
        u = haar_unitary(3, rng)
        forward = KrausChannel(3, (u,))
        backward = KrausChannel(3, (u.conj().T,))
        combined = compose(forward, backward)
        np.testing.assert_allclose(combined.matrix, np.eye(9), atol=1e-12)

    def test_matches_sequential_application(self, rng):
        channel = random_kraus_channel(3, 2, rng)
        squared = compose(channel, channel)
        for _ in range(5):
            rho = ginibre_density(3, rng).matrix
            np.testing.assert_allclose(
                apply(squared, rho), apply(channel, apply(channel, rho)), atol=1e-11
            )

    def test_dim_mismatch(self, rng):
        with pytest.raises(ValueError):
            compose(random_kraus_channel(2, 2, rng), random_kraus_channel(3, 2, rng))


class TestChannelInvariants:
    def test_certified_output_on_certified_input(self, rng):
        for _ in range(5):
            channel = random_kraus_channel(4, 3, rng)
            rho = ginibre_density(4, rng)
            out = apply(channel, rho.matrix)
            certified = DensityOperator(out)  # raises if trace/positivity broken
            assert certified.dim == 4

    def test_representation_triangle_roundtrip(self, rng):
        original = random_kraus_channel(3, 2, rng)
        rebuilt = choi_to_kraus(choi(to_superop(original)))
        for _ in range(10):
            rho = ginibre_density(3, rng).matrix
            np.testing.assert_allclose(apply(original, rho), apply(rebuilt, rho), atol=1e-8)

    def test_trace_norm_contractivity_on_differences(self, rng):
        for _ in range(10):
            channel = random_kraus_channel(3, 2, rng)
            rho = ginibre_density(3, rng).matrix
            sigma = ginibre_density(3, rng).matrix
            lhs = trace_norm(apply(channel, rho) - apply(channel, sigma))
            assert lhs <= trace_norm(rho - sigma) + 1e-9


class TestChannelJson:
    def test_kraus_roundtrip(self, rng):
        channel = random_kraus_channel(2, 2, rng)
        loaded = channel_from_json(channel_to_json(channel))
        assert isinstance(loaded, KrausChannel)
        for a, b in zip(channel.kraus, loaded.kraus):
            np.testing.assert_array_equal(a, b)

    def test_superop_roundtrip(self, rng):
        superop = to_superop(random_kraus_channel(2, 2, rng))
        loaded = channel_from_json(channel_to_json(superop))
        assert isinstance(loaded, SuperoperatorMatrix)
        np.testing.assert_array_equal(superop.matrix, loaded.matrix)

    def test_stinespring_roundtrip(self, rng):
        stine, _ = deutsch_channel(haar_unitary(4, rng), ginibre_density(2, rng), 2, 2)
        loaded = channel_from_json(channel_to_json(stine))
        assert isinstance(loaded, StinespringChannel)
        np.testing.assert_array_equal(stine.u, loaded.u)

    def test_unknown_keys_rejected(self, rng):
        payload = channel_to_json(random_kraus_channel(2, 2, rng))
        payload["why"] = "not"
        with pytest.raises(ValueError, match="unknown"):
            channel_from_json(payload)

    def test_unknown_repr_rejected(self):
        with pytest.raises(ValueError, match="repr"):
            channel_from_json({"dim": 2, "repr": "chi"})


class TestConstructorCertification:
    def test_incomplete_kraus_family_rejected(self):
        with pytest.raises(CertificationError, match="completeness"):
            KrausChannel(2, (0.5 * np.eye(2, dtype=complex),))

    def test_trace_breaking_superop_rejected(self):
        with pytest.raises(CertificationError, match="trace"):
            SuperoperatorMatrix(2, 0.5 * np.eye(4, dtype=complex))

    def test_superop_shape_checked(self):
        with pytest.raises(ValueError, match="superoperator"):
            SuperoperatorMatrix(2, np.eye(3, dtype=complex))
