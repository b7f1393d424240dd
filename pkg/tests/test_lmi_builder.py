"""S-procedure blocks, the real embedding, and problem assembly."""

import io

import numpy as np
import pytest

from swiptbeam import ChannelSet
from swiptbeam.lmi import (
    ConicProblem,
    LinearRow,
    LmiBlock,
    ScalarTerm,
    ScalarVar,
    assemble_feasibility_sdp,
    build_c2_lmi,
    build_c5_lmi,
    dump_problem,
    evaluate_block,
    feasibility_constants,
    realify,
)
from swiptbeam.solver import SolverOptions, solve

from support import unit_instance


def rand_herm(rng, n, psd=False):
    a = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    h = (a + a.conj().T) / 2
    if psd:
        h = a @ a.conj().T
    return h


def best_multiplier_margin(s0, s1):
    """max over delta >= 0 of lambda_min(s0 + delta*s1), via a tiny SDP.

    The multiplier is capped far above any useful value so the recession ray
    of a PSD multiplier coefficient cannot unbound the solve.
    """
    dim = s0.shape[0]
    cap = 1e6 * max(1.0, float(np.abs(s0).max()))
    prob = ConicProblem(
        scalar_vars=(ScalarVar("delta", nonneg=True), ScalarVar("t")),
        matrix_vars=(),
        blocks=(
            LmiBlock(
                "block",
                dim,
                s0,
                (ScalarTerm("delta", s1), ScalarTerm("t", -np.eye(dim))),
            ),
        ),
        rows=(LinearRow("cap", "<=", cap, {"delta": 1.0}),),
        objective={"t": 1.0},
        maximize=True,
    )
    # a sign oracle only: moderate accuracy, generous acceptance
    sol = solve(prob, SolverOptions(gap_tol=1e-9, feas_tol=1e-9, accept_tol=1e-5))
    assert sol.status == "optimal", sol.raw_status
    return sol.primal["t"]


def split_block(block, fixed_values):
    """Constant part and the coefficient of the named multiplier."""
    mult = next(t for t in block.terms if isinstance(t, ScalarTerm))
    values = dict(fixed_values)
    values[mult.var] = 0.0
    s0 = evaluate_block(block, values)
    return s0, mult.coef, mult.var


class TestRealify:
    def test_real_input_block_diagonal(self):
        m = np.array([[2.0, 1.0], [1.0, 3.0]])
        r = realify(m)
        assert np.allclose(r[:2, :2], m) and np.allclose(r[2:, 2:], m)
        assert np.allclose(r[:2, 2:], 0) and np.allclose(r[2:, :2], 0)

    def test_complex_example_eigenvalues(self):
        m = np.array([[1.0, 1j], [-1j, 1.0]])
        eigs = np.sort(np.linalg.eigvalsh(realify(m)))
        assert np.allclose(eigs, [0.0, 0.0, 2.0, 2.0], atol=1e-12)

    def test_negative_definite_not_psd(self):
        m = -np.eye(3)
        assert np.linalg.eigvalsh(realify(m)).min() < 0

    def test_eigenvalues_doubled_with_multiplicity(self):
        rng = np.random.default_rng(2)
        m = rand_herm(rng, 5)
        complex_eigs = np.sort(np.linalg.eigvalsh(m))
        real_eigs = np.sort(np.linalg.eigvalsh(realify(m)))
        assert np.allclose(real_eigs, np.sort(np.repeat(complex_eigs, 2)), atol=1e-10)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        a, b = rand_herm(rng, 4), rand_herm(rng, 4)
        assert np.allclose(realify(a + 2.5 * b), realify(a) + 2.5 * realify(b))

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            realify(np.array([[0.0, 1.0], [2.0, 0.0]]))


def test_vec_consistency_kronecker_identity():
    # tr((I (x) W) g g^H) equals tr(W G G^H) under column stacking
    rng = np.random.default_rng(4)
    for _ in range(20):
        w = rand_herm(rng, 4, psd=True)
        g = (rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))) / np.sqrt(2)
        g_vec = g.reshape(-1, order="F")
        lifted = np.kron(np.eye(3), w)
        lhs = (g_vec.conj() @ lifted @ g_vec).real
        rhs = np.trace(w @ g @ g.conj().T).real
        assert lhs == pytest.approx(rhs, rel=1e-12)


class TestC2Lmi:
    def make_estimates(self, rng, n_tx=4, n_ir=2):
        h = [
            (rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx)) / np.sqrt(2)
            for _ in range(n_ir)
        ]
        g = [np.ones((n_tx, 2), dtype=complex)]
        return ChannelSet(ir_estimates=tuple(h), er_estimates=tuple(g))

    def test_zero_radius_equals_nominal_sinr(self):
        rng = np.random.default_rng(5)
        agree = 0
        for trial in range(100):
            est = self.make_estimates(rng)
            gamma, noise = 10.0, rng.uniform(0.05, 0.5)
            w = [rand_herm(rng, 4, psd=True) for _ in range(2)]
            block = build_c2_lmi(0, est, 0.0, gamma, noise)
            s0, s1, _ = split_block(block, {"w_0": w[0], "w_1": w[1]})
            lmi_ok = best_multiplier_margin(s0, s1) >= 0
            h = est.ir_estimates[0]
            sig = (h.conj() @ w[0] @ h).real
            interf = (h.conj() @ w[1] @ h).real
            nominal_ok = sig / gamma >= interf + noise
            agree += lmi_ok == nominal_ok
        assert agree >= 99  # ties at the boundary may flip either way

    def test_matched_filter_closed_form(self):
        rng = np.random.default_rng(6)
        est = self.make_estimates(rng, n_ir=1)
        h = est.ir_estimates[0]
        gamma, noise = 8.0, 0.2
        agree = 0
        for trial in range(100):
            p = rng.uniform(0.05, 5.0)
            rho = rng.uniform(0.0, 0.9) * np.linalg.norm(h)
            w = p * np.outer(h, h.conj()) / np.linalg.norm(h) ** 2
            block = build_c2_lmi(0, est, rho, gamma, noise, w_names=("w_0",))
            s0, s1, _ = split_block(block, {"w_0": w})
            lmi_ok = best_multiplier_margin(s0, s1) >= 0
            closed_form_ok = p * (np.linalg.norm(h) - rho) ** 2 >= gamma * noise
            agree += lmi_ok == closed_form_ok
        assert agree >= 99

    def test_zero_covariances_infeasible(self):
        rng = np.random.default_rng(7)
        est = self.make_estimates(rng)
        for rho in [0.0, 0.3]:
            block = build_c2_lmi(0, est, rho, 10.0, 0.1)
            s0, s1, _ = split_block(block, {"w_0": np.zeros((4, 4)), "w_1": np.zeros((4, 4))})
            assert best_multiplier_margin(s0, s1) < 0


class TestC5Lmi:
    def make_estimates(self, rng, n_tx=4, n_rx=2, n_er=1):
        h = [(rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx)) / np.sqrt(2)]
        g = [
            (rng.standard_normal((n_tx, n_rx)) + 1j * rng.standard_normal((n_tx, n_rx)))
            / np.sqrt(2)
            for _ in range(n_er)
        ]
        return ChannelSet(ir_estimates=tuple(h), er_estimates=tuple(g))

    def test_zero_radius_equals_nominal_power(self):
        rng = np.random.default_rng(8)
        agree = 0
        for trial in range(100):
            est = self.make_estimates(rng)
            w = [rand_herm(rng, 4, psd=True)]
            we = rand_herm(rng, 4, psd=True)
            beta = rng.uniform(0.0, 40.0)
            block = build_c5_lmi(0, est, 0.0, w_names=("w_0",))
            values = {"w_0": w[0], "w_e": we, "beta_0": beta}
            s0, s1, _ = split_block(block, values)
            lmi_ok = best_multiplier_margin(s0, s1) >= 0
            g = est.er_estimates[0]
            power = np.trace((w[0] + we) @ g @ g.conj().T).real
            agree += lmi_ok == (power >= beta)
        assert agree >= 99

    def test_zero_beta_zero_radius_feasible_with_zero_multiplier(self):
        rng = np.random.default_rng(9)
        est = self.make_estimates(rng)
        block = build_c5_lmi(0, est, 0.0, w_names=("w_0",))
        values = {
            "w_0": rand_herm(rng, 4, psd=True),
            "w_e": rand_herm(rng, 4, psd=True),
            "beta_0": 0.0,
            "nu_0": 0.0,
        }
        s = evaluate_block(block, values)
        assert np.linalg.eigvalsh(s).min() >= -1e-10

    def test_block_dimension(self):
        rng = np.random.default_rng(10)
        est = self.make_estimates(rng, n_tx=3, n_rx=2)
        block = build_c5_lmi(0, est, 0.1, w_names=("w_0",))
        assert block.dim == 3 * 2 + 1


class TestAssembleFeasibility:
    def test_structural_counts(self):
        config, estimates, radii = unit_instance(n_tx=4, n_rx=2, n_ir=2, n_er=3, seed=0)
        prob = assemble_feasibility_sdp(config, estimates, radii, er_form="lifted")
        c2_blocks = [b for b in prob.blocks if b.name.startswith("c2_")]
        c5_blocks = [b for b in prob.blocks if b.name.startswith("c5_")]
        assert len(c2_blocks) == 2 and all(b.dim == 5 for b in c2_blocks)
        assert len(c5_blocks) == 3 and all(b.dim == 9 for b in c5_blocks)
        psd_vars = [v for v in prob.matrix_vars if v.psd]
        assert len(psd_vars) == 3  # per-user covariances plus the energy one
        assert all(v.dim == 4 for v in psd_vars)
        names = {v.name for v in prob.scalar_vars}
        assert names == {"margin", "delta_0", "delta_1", "nu_0", "nu_1", "nu_2"}

    def test_tiny_qos_gives_positive_margin(self):
        config, estimates, radii = unit_instance(seed=1, sinr_db=-60.0)
        prob = assemble_feasibility_sdp(config, estimates, radii, beta_min=[0.0, 0.0])
        sol = solve(prob)
        assert sol.status == "optimal"
        assert sol.primal["margin"] > 0.0

    def test_zero_power_budget_infeasible(self):
        config, estimates, radii = unit_instance(seed=2)
        config = type(config)(**{**config.__dict__, "p_max": 0.0})
        prob = assemble_feasibility_sdp(config, estimates, radii)
        sol = solve(prob)
        assert sol.status == "infeasible"

    def test_builder_linearity_in_covariances(self):
        config, estimates, radii = unit_instance(seed=3)
        prob = assemble_feasibility_sdp(config, estimates, radii, er_form="lifted")
        block = next(b for b in prob.blocks if b.name == "c5_0")
        rng = np.random.default_rng(0)
        s_tot = rand_herm(rng, config.n_tx, psd=True)
        vals0 = {"s_tot": s_tot, "margin": 0.0, "nu_0": 0.0}
        base = evaluate_block(block, vals0) - block.const
        for alpha in [0.0, 0.5, 3.0]:
            vals = {"s_tot": alpha * s_tot, "margin": 0.0, "nu_0": 0.0}
            scaled = evaluate_block(block, vals) - block.const
            assert np.allclose(scaled, alpha * base, atol=1e-12)

    def test_compact_form_matches_lifted(self):
        for seed in range(3):
            config, estimates, radii = unit_instance(n_tx=5, n_rx=2, n_er=3, seed=seed)
            beta = [0.004] * 3
            lifted = assemble_feasibility_sdp(config, estimates, radii, beta_min=beta, er_form="lifted")
            compact = assemble_feasibility_sdp(config, estimates, radii, beta_min=beta, er_form="compact")
            sl, sc = solve(lifted), solve(compact)
            assert sl.status == sc.status == "optimal"
            assert sl.primal["margin"] == pytest.approx(sc.primal["margin"], abs=5e-7, rel=1e-5)

    def test_retarget_shares_structure(self):
        config, estimates, radii = unit_instance(seed=4)
        prob = assemble_feasibility_sdp(config, estimates, radii)
        s1 = prob.structure()
        prob2 = feasibility_constants(prob, config, [1e-3] * config.n_er)
        assert prob2.structure() is s1
        a, b = solve(prob), solve(prob2)
        assert a.status == b.status == "optimal"
        assert b.primal["margin"] < a.primal["margin"]  # tighter targets shrink slack

    def test_zero_radius_special_case_matches_robust_limit(self):
        # radius exactly zero collapses to the nominal rows; a vanishingly
        # small radius must agree in the limit
        config, estimates, _ = unit_instance(seed=5, err_var=0.01)
        zero = ([0.0] * config.n_ir, [0.0] * config.n_er)
        tiny = ([1e-9] * config.n_ir, [1e-9] * config.n_er)
        p0 = assemble_feasibility_sdp(config, estimates, zero)
        p1 = assemble_feasibility_sdp(config, estimates, tiny)
        s0, s1 = solve(p0), solve(p1)
        assert s0.primal["margin"] == pytest.approx(s1.primal["margin"], rel=1e-5, abs=1e-8)


def test_dump_problem_lists_every_block_and_row():
    config, estimates, radii = unit_instance(seed=6)
    prob = assemble_feasibility_sdp(config, estimates, radii, er_form="lifted")
    buf = io.StringIO()
    dump_problem(prob, buf)
    text = buf.getvalue()
    for block in prob.blocks:
        assert block.name in text
    for row in prob.rows:
        assert row.name in text
    assert "margin" in text
    # coefficient lines parse: kind block var row col re im
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    sample = lines[len(lines) // 2].split()
    assert len(sample) >= 7
    float(sample[5]), float(sample[6].rstrip("#"))
