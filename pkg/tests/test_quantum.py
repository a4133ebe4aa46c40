import math

import numpy as np
import pytest

from gatefid import (
    DensityMatrix,
    KrausChannel,
    UnitaryOperator,
    apply_channel,
    exact_average_fidelity,
    gate_fidelity,
    haar_random_unitary,
    noise_preset,
    schatten_norm,
    state_fidelity,
)
from gatefid.errors import DimensionError, NumericalError, ParameterError
from gatefid.quantum import (
    haar_unitaries_batch,
    matrices_close,
    pure_state,
    random_density_matrix,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)


def ket(d, j=0):
    v = np.zeros(d, dtype=complex)
    v[j] = 1.0
    return v


class TestConstruction:
    def test_unitary_check_rejects_non_unitary(self):
        with pytest.raises(NumericalError):
            UnitaryOperator(np.array([[1, 0], [0, 2]], dtype=complex))

    def test_density_matrix_rejects_bad_trace(self):
        with pytest.raises(NumericalError):
            DensityMatrix(2 * np.eye(2))

    def test_density_matrix_rejects_negative(self):
        with pytest.raises(NumericalError):
            DensityMatrix(np.diag([1.5, -0.5]))

    def test_channel_trace_preservation_enforced(self):
        with pytest.raises(NumericalError):
            KrausChannel((np.eye(2) * 0.9,))

    def test_channel_needs_operator(self):
        with pytest.raises(ParameterError):
            KrausChannel(())


class TestApplyChannel:
    def test_identity_channel_fixes_state(self):
        ch = KrausChannel((np.eye(2),))
        rho = pure_state(ket(2))
        assert matrices_close(apply_channel(ch, rho).matrix, rho.matrix)

    def test_fully_depolarizing_sends_to_maximally_mixed(self):
        ch = noise_preset("depolarizing", (1.0,), 2).channel
        out = apply_channel(ch, pure_state(ket(2)))
        assert matrices_close(out.matrix, np.eye(2) / 2, 1e-9)

    def test_x_channel_flips_zero(self):
        ch = KrausChannel((X,))
        out = apply_channel(ch, pure_state(ket(2, 0)))
        assert matrices_close(out.matrix, pure_state(ket(2, 1)).matrix, 1e-12)

    def test_dimension_mismatch(self):
        ch = KrausChannel((np.eye(2),))
        with pytest.raises(DimensionError):
            apply_channel(ch, DensityMatrix(np.eye(3) / 3))

    def test_output_trace_one_on_random_states(self, preset_channels_d2, rng):
        for model in preset_channels_d2:
            for _ in range(100):
                rho = random_density_matrix(2, rng)
                out = apply_channel(model.channel, rho)
                assert abs(np.trace(out.matrix) - 1.0) <= 1e-9


class TestGateFidelity:
    def test_identity_channel_gives_one(self, rng):
        ch = KrausChannel((np.eye(2),))
        for _ in range(5):
            v = haar_random_unitary(2, rng)
            assert gate_fidelity(ch, v) == pytest.approx(1.0, abs=1e-12)

    def test_x_channel_at_identity_gives_zero(self):
        ch = KrausChannel((X,))
        assert gate_fidelity(ch, UnitaryOperator(np.eye(2))) == pytest.approx(0.0, abs=1e-12)

    def test_fully_depolarizing_gives_half(self, rng):
        ch = noise_preset("depolarizing", (1.0,), 2).channel
        v = haar_random_unitary(2, rng)
        assert gate_fidelity(ch, v) == pytest.approx(0.5, abs=1e-9)

    def test_unitary_invariance_formula(self, rng):
        # for a unitary channel W the fidelity is |<0|V^dag W V|0>|^2
        w = haar_random_unitary(2, rng)
        ch = KrausChannel((w.matrix,))
        for _ in range(20):
            v = haar_random_unitary(2, rng)
            expect = abs(np.vdot(v.matrix[:, 0], w.matrix @ v.matrix[:, 0])) ** 2
            assert abs(gate_fidelity(ch, v) - expect) <= 1e-12


class TestExactAverageFidelity:
    def test_identity_d2(self):
        assert exact_average_fidelity(KrausChannel((np.eye(2),))) == pytest.approx(1.0)

    def test_unitary_z_is_one_third(self):
        assert exact_average_fidelity(KrausChannel((Z,))) == pytest.approx(1 / 3, abs=1e-12)

    @pytest.mark.parametrize("d", [2, 3, 4, 8])
    @pytest.mark.parametrize("p", [0.0, 0.3, 1.0])
    def test_depolarizing_closed_form(self, d, p):
        model = noise_preset("depolarizing", (p,), d)
        assert exact_average_fidelity(model.channel) == pytest.approx(1 - p + p / d, abs=1e-9)

    def test_in_unit_interval_for_presets(self, preset_channels_d2):
        for model in preset_channels_d2:
            f = exact_average_fidelity(model.channel)
            assert 0.0 <= f <= 1.0

    def test_unitary_channel_trace_formula(self, rng):
        for d in (2, 4):
            w = haar_random_unitary(d, rng)
            f = exact_average_fidelity(KrausChannel((w.matrix,)))
            expect = (abs(np.trace(w.matrix)) ** 2 + d) / (d * d + d)
            assert abs(f - expect) <= 1e-12


class TestHaarSampling:
    def test_d1_is_phase(self, rng):
        u = haar_random_unitary(1, rng)
        assert abs(abs(u.matrix[0, 0]) - 1.0) <= 1e-12

    def test_requires_positive_dimension(self, rng):
        with pytest.raises(ParameterError):
            haar_random_unitary(0, rng)

    def test_first_entry_moment(self, rng):
        # E|V_00|^2 = 1/d under the Haar measure
        batch = haar_unitaries_batch(2, 100_000, rng)
        emp = float(np.mean(np.abs(batch[:, 0, 0]) ** 2))
        assert abs(emp - 0.5) <= 0.01

    def test_monte_carlo_matches_oracle(self, rng):
        # three-sigma window from the variance bound 26/d
        model = noise_preset("depolarizing", (0.2,), 2)
        n = 20_000
        batch = haar_unitaries_batch(2, n, rng)
        cols = batch[:, :, 0]
        p = np.zeros(n)
        for a in model.channel.kraus_ops:
            p += np.abs(np.einsum("nd,de,ne->n", cols.conj(), a, cols)) ** 2
        assert abs(p.mean() - model.exact_fidelity) <= 5 * math.sqrt(26 / (2 * n))

    def test_amplitude_damping_average(self, rng):
        # a channel whose fidelity actually varies with V
        model = noise_preset("amplitude_damping", (0.3,), 2)
        batch = haar_unitaries_batch(2, 100_000, rng)
        cols = batch[:, :, 0]
        p = np.zeros(len(cols))
        for a in model.channel.kraus_ops:
            p += np.abs(np.einsum("nd,de,ne->n", cols.conj(), a, cols)) ** 2
        assert abs(p.mean() - model.exact_fidelity) <= 5 * math.sqrt(26 / (2 * 100_000))


class TestSchattenNorm:
    def test_identity_norms(self):
        assert schatten_norm(np.eye(2), 1) == pytest.approx(2.0)
        assert schatten_norm(np.eye(2), np.inf) == pytest.approx(1.0)

    def test_diag_3_4(self):
        assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0)

    def test_two_norm_matches_frobenius(self, rng):
        for _ in range(10):
            a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            frob = math.sqrt(np.sum(np.abs(a) ** 2))
            assert abs(schatten_norm(a, 2) - frob) <= 1e-9

    def test_rejects_other_p(self):
        with pytest.raises(ParameterError):
            schatten_norm(np.eye(2), 3)


class TestStateFidelity:
    def test_self_fidelity_is_one(self, rng):
        rho = random_density_matrix(3, rng)
        assert state_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-9)

    def test_orthogonal_pure_states(self):
        assert state_fidelity(pure_state(ket(2, 0)), pure_state(ket(2, 1))) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_zero_vs_maximally_mixed(self):
        mixed = DensityMatrix(np.eye(2) / 2)
        assert state_fidelity(pure_state(ket(2)), mixed) == pytest.approx(0.5, abs=1e-12)

    def test_pure_state_reduction(self, rng):
        # F(|psi><psi|, sigma) = <psi|sigma|psi>
        for _ in range(10):
            v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
            v /= np.linalg.norm(v)
            sigma = random_density_matrix(3, rng)
            direct = float(np.real(np.vdot(v, sigma.matrix @ v)))
            assert abs(state_fidelity(pure_state(v), sigma) - direct) <= 1e-9

    def test_fuchs_van_de_graaf(self, rng):
        for _ in range(100):
            rho = random_density_matrix(2, rng)
            sigma = random_density_matrix(2, rng)
            f = state_fidelity(rho, sigma)
            td = 0.5 * schatten_norm(rho.matrix - sigma.matrix, 1)
            assert 1 - math.sqrt(f) <= td + 1e-9
            assert td <= math.sqrt(1 - f) + 1e-9

    def test_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            state_fidelity(random_density_matrix(2, rng), random_density_matrix(3, rng))


class TestOracleConsistencyAllPresets:
    def test_monte_carlo_average_within_five_sigma(self, preset_channels_d2, rng):
        n = 20_000
        for model in preset_channels_d2:
            batch = haar_unitaries_batch(2, n, rng)
            cols = batch[:, :, 0]
            p = np.zeros(n)
            for a in model.channel.kraus_ops:
                p += np.abs(np.einsum("nd,de,ne->n", cols.conj(), a, cols)) ** 2
            err = abs(float(p.mean()) - model.exact_fidelity)
            assert err <= 5 * math.sqrt(26 / (2 * n)), model.spec
