"""Configuration containers and the closed-form link formulas."""

import numpy as np
import pytest

from swiptbeam import (
    BeamformingDesign,
    ChannelSet,
    EhParams,
    SystemConfig,
    achievable_rate,
    harvested_power_linear,
    received_rf_power,
)

EH = EhParams(24e-3, 150.0, 0.014)


def make_design(w_mats, we):
    return BeamformingDesign(w_mats=list(w_mats), we_mat=np.asarray(we, dtype=complex))


class TestSystemConfig:
    def test_valid(self):
        cfg = SystemConfig(4, 2, 2, 3, 1.0, 0.1, (10.0, 10.0), (EH,) * 3)
        assert cfg.ir_error_radii == (0.0, 0.0)
        assert cfg.er_error_radii == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(n_tx=0),
            dict(p_max=-1.0),
            dict(noise_power=0.0),
            dict(sinr_targets=(10.0,)),
            dict(sinr_targets=(10.0, -1.0)),
            dict(eh_params=(EH,)),
            dict(ir_error_radii=(0.1,)),
        ],
    )
    def test_rejects_bad_fields(self, kwargs):
        base = dict(
            n_tx=4, n_rx=2, n_ir=2, n_er=3, p_max=1.0, noise_power=0.1,
            sinr_targets=(10.0, 10.0), eh_params=(EH,) * 3,
        )
        base.update(kwargs)
        with pytest.raises(ValueError):
            SystemConfig(**base)


class TestChannelSet:
    def test_shape_checks(self):
        h = np.ones(4, dtype=complex)
        g = np.ones((4, 2), dtype=complex)
        ChannelSet((h,), (g,))
        with pytest.raises(ValueError):
            ChannelSet((h, np.ones(3, dtype=complex)), (g,))
        with pytest.raises(ValueError):
            ChannelSet((h,), (np.ones((3, 2), dtype=complex),))

    def test_rejects_nonfinite(self):
        h = np.ones(4, dtype=complex)
        h_bad = h.copy()
        h_bad[0] = np.nan
        with pytest.raises(ValueError):
            ChannelSet((h_bad,), (np.ones((4, 2), dtype=complex),))


class TestReceivedRfPower:
    def test_zero_design_gives_zero(self):
        d = make_design([np.zeros((2, 2))], np.zeros((2, 2)))
        assert received_rf_power(d, np.eye(2)) == 0.0

    def test_identity_trace(self):
        d = make_design([np.zeros((2, 2))], np.eye(2))
        assert received_rf_power(d, np.eye(2)) == pytest.approx(2.0, rel=1e-14)

    def test_matches_columnwise_expansion(self):
        # brute-force oracle: sum over receive antennas of |w^H g_l|^2
        rng = np.random.default_rng(3)
        g = (rng.standard_normal((4, 2)) + 1j * rng.standard_normal((4, 2))) / np.sqrt(2)
        vecs = [
            (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / np.sqrt(2)
            for _ in range(3)
        ]
        d = make_design([np.outer(w, w.conj()) for w in vecs[:2]], np.outer(vecs[2], vecs[2].conj()))
        brute = sum(abs(np.vdot(w, g[:, l])) ** 2 for w in vecs for l in range(2))
        assert received_rf_power(d, g) == pytest.approx(brute, rel=1e-12)

    def test_dimension_mismatch(self):
        d = make_design([np.eye(2)], np.eye(2))
        with pytest.raises(ValueError):
            received_rf_power(d, np.ones((3, 2)))

    def test_linear_in_each_covariance(self):
        rng = np.random.default_rng(5)
        g = (rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))) / np.sqrt(2)
        w = rng.standard_normal((3, 3))
        w = w @ w.T
        base = received_rf_power(make_design([w], np.zeros((3, 3))), g)
        for alpha in [0.0, 0.25, 2.0, 7.5]:
            scaled = received_rf_power(make_design([alpha * w], np.zeros((3, 3))), g)
            assert scaled == pytest.approx(alpha * base, rel=1e-12, abs=1e-300)


class TestAchievableRate:
    def test_exact_ten_db_sinr(self):
        # signal 10, interference+noise 1 -> log2(11)
        h = np.array([1.0, 0.0], dtype=complex)
        w_sig = np.array([np.sqrt(10.0), 0.0], dtype=complex)
        w_int = np.array([0.0, 1.0], dtype=complex)  # orthogonal to h
        d = make_design(
            [np.outer(w_sig, w_sig.conj()), np.outer(w_int, w_int.conj())], np.zeros((2, 2))
        )
        rate = achievable_rate(d, h, 0, noise_power=1.0)
        assert rate == pytest.approx(3.4594316186372973, rel=1e-12)

    def test_zero_signal(self):
        d = make_design([np.zeros((2, 2))], np.eye(2))
        assert achievable_rate(d, np.ones(2, dtype=complex), 0, 1.0) == 0.0

    def test_single_user_matched_filter(self):
        rng = np.random.default_rng(11)
        h = (rng.standard_normal(4) + 1j * rng.standard_normal(4)) / np.sqrt(2)
        p, noise = 2.5, 0.3
        w = np.sqrt(p) * h / np.linalg.norm(h)
        d = make_design([np.outer(w, w.conj())], np.zeros((4, 4)))
        expect = np.log2(1.0 + p * np.linalg.norm(h) ** 2 / noise)
        assert achievable_rate(d, h, 0, noise) == pytest.approx(expect, rel=1e-12)

    def test_energy_covariance_does_not_interfere(self):
        rng = np.random.default_rng(12)
        h = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        w = h / np.linalg.norm(h)
        d0 = make_design([np.outer(w, w.conj())], np.zeros((3, 3)))
        d1 = make_design([np.outer(w, w.conj())], 5.0 * np.eye(3))
        assert achievable_rate(d0, h, 0, 0.1) == achievable_rate(d1, h, 0, 0.1)

    def test_phase_rotation_invariance(self):
        rng = np.random.default_rng(13)
        h = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        vecs = [
            (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
            for _ in range(2)
        ]
        base = make_design([np.outer(v, v.conj()) for v in vecs], np.zeros((3, 3)))
        phase = np.exp(1j * 1.234)
        rotated = make_design(
            [np.outer(phase * v, (phase * v).conj()) for v in vecs], np.zeros((3, 3))
        )
        for k in range(2):
            assert achievable_rate(base, h, k, 0.2) == pytest.approx(
                achievable_rate(rotated, h, k, 0.2), rel=1e-12
            )

    def test_interference_monotone(self):
        rng = np.random.default_rng(14)
        h = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        w0 = np.outer(h, h.conj())
        interferer = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        w1 = np.outer(interferer, interferer.conj())
        rates = [
            achievable_rate(make_design([w0, a * w1], np.zeros((3, 3))), h, 0, 0.1)
            for a in [0.0, 0.5, 1.0, 2.0]
        ]
        assert all(r0 >= r1 for r0, r1 in zip(rates, rates[1:]))

    def test_bad_user_index(self):
        d = make_design([np.eye(2)], np.zeros((2, 2)))
        with pytest.raises(IndexError):
            achievable_rate(d, np.ones(2, dtype=complex), 1, 0.1)

    def test_vector_and_trace_forms_agree_at_rank_one(self):
        rng = np.random.default_rng(15)
        h = (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        vecs = [
            (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
            for _ in range(2)
        ]
        trace_form = make_design([np.outer(v, v.conj()) for v in vecs], np.zeros((3, 3)))
        vector_form = make_design([np.outer(v, v.conj()) for v in vecs], np.zeros((3, 3)))
        vector_form.vectors = vecs
        for k in range(2):
            assert achievable_rate(trace_form, h, k, 0.3) == pytest.approx(
                achievable_rate(vector_form, h, k, 0.3), rel=1e-12
            )


class TestLinearHarvest:
    def test_unit_efficiency(self):
        assert harvested_power_linear(0.010, 1.0) == 0.010

    def test_half_efficiency(self):
        assert harvested_power_linear(0.010, 0.5) == 0.005

    def test_eta_out_of_range(self):
        with pytest.raises(ValueError):
            harvested_power_linear(0.01, 1.5)
        with pytest.raises(ValueError):
            harvested_power_linear(0.01, -0.1)

    def test_differs_from_nonlinear_at_threshold(self):
        # the linear unit-efficiency model is not the sigmoid's tangent
        from swiptbeam.eh import harvested_power

        p = EH.b_turn_on
        assert harvested_power_linear(p, 1.0) != pytest.approx(
            harvested_power(p, EH), rel=1e-6
        )


class TestBeamformingDesignValidate:
    def test_accepts_valid(self):
        d = make_design([np.eye(2)], 0.5 * np.eye(2))
        d.validate(p_max=3.5)

    def test_rejects_non_hermitian(self):
        w = np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex)
        with pytest.raises(ValueError):
            make_design([w], np.zeros((2, 2))).validate()

    def test_rejects_indefinite(self):
        w = np.diag([1.0, -0.5]).astype(complex)
        with pytest.raises(ValueError):
            make_design([w], np.zeros((2, 2))).validate()

    def test_rejects_power_overrun(self):
        d = make_design([np.eye(2)], np.eye(2))
        with pytest.raises(ValueError):
            d.validate(p_max=3.0)
