"""Max-min harvested-power beamforming: bisection, extraction, certification.

The harvesting target enters the feasibility SDP only through the inverted
rectifier curve, which is strictly monotone, so the largest attainable
target is found by bisecting on it with the margin problem as a sign
oracle.  The final solve's duals feed a numerical certificate of the
optimality structure (rank-one information covariances, at most one energy
beam), and exact worst-case evaluators over the error balls certify what a
produced design actually guarantees.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .eh import harvested_power, required_rf_power
from .lmi import (
    ConicProblem,
    assemble_feasibility_sdp,
    feasibility_constants,
)
from .model import BeamformingDesign, ChannelSet, SystemConfig
from .solver import ConicSolution, SolverOptions, solve

__all__ = [
    "MaxMinResult",
    "KktCertificate",
    "RobustnessReport",
    "MaxMinSolverError",
    "RankOneExtractionError",
    "solve_maxmin",
    "extract_beamformers",
    "verify_kkt",
    "baseline1_linear_design",
    "baseline2_isotropic",
    "robustness_check",
    "min_quadratic_over_ball",
    "worst_case_received_power",
    "worst_case_sinr_margin",
    "certified_min_harvest",
]

RANK_RATIO_TOL = 1e-6
ZERO_BEAM_TRACE_TOL = 1e-9


class MaxMinSolverError(RuntimeError):
    """Numerical failure inside the bisection, with the offending target."""

    def __init__(self, tau: float, raw_status: str):
        super().__init__(f"solver failure at harvest target {tau} W ({raw_status})")
        self.tau = tau
        self.raw_status = raw_status


class RankOneExtractionError(RuntimeError):
    """A covariance matrix failed the rank-one eigenvalue-ratio test."""

    def __init__(self, label: str, ratio: float):
        super().__init__(
            f"{label}: second-to-first eigenvalue ratio {ratio:.3e} exceeds {RANK_RATIO_TOL:.0e}"
        )
        self.label = label
        self.ratio = ratio


@dataclass
class MaxMinResult:
    status: str  # "solved" | "infeasible-qos"
    tau_star: float
    design: BeamformingDesign | None
    bisection_trace: list[tuple[float, float]]
    rank_report: dict | None
    scheme: str = "proposed"
    kkt_report: "KktCertificate | None" = None
    solve_time: float = 0.0
    final_problem: ConicProblem | None = None
    final_solution: ConicSolution | None = None
    config: SystemConfig | None = None
    estimates: ChannelSet | None = None
    radii: tuple[list[float], list[float]] | None = None


@dataclass
class KktCertificate:
    """Numerical check of the dual structure behind the rank-one guarantee."""

    lambda_star: float
    xi_matrices: list[np.ndarray]
    b_matrix: np.ndarray
    complementarity_residuals: dict
    eig_gap: dict
    alignment_angles: list[float]
    power_row_activity: float
    we_active: bool
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class RobustnessReport:
    worst_sinr: list[float]
    worst_power: list[float]
    n_samples: int


# ---------------------------------------------------------------------------
# exact worst-case evaluation over norm balls
# ---------------------------------------------------------------------------

def min_quadratic_over_ball(
    m_mat: np.ndarray, x: np.ndarray, radius: float
) -> tuple[float, np.ndarray]:
    """Global minimum of (x+d)^H M (x+d) over ||d|| <= radius, M Hermitian.

    Classic trust-region subproblem: a multiplier mu >= max(0, -lambda_min)
    makes M + mu I positive semidefinite with the boundary/secular condition;
    the one-dimensional root is bracketed and bisected to machine precision.
    Returns the minimum value and an attaining perturbation.
    """
    m_mat = np.asarray(m_mat, dtype=complex)
    x = np.asarray(x, dtype=complex)
    if radius < 0.0:
        raise ValueError("radius must be nonnegative")
    if radius == 0.0:
        return float((x.conj() @ m_mat @ x).real), np.zeros_like(x)
    lam, u_mat = np.linalg.eigh(m_mat)
    u = u_mat.conj().T @ x
    lam_min = lam[0]

    def y_of(mu: float) -> np.ndarray:
        denom = lam + mu
        y = np.zeros_like(u)
        nz = np.abs(denom) > 0
        y[nz] = -lam[nz] * u[nz] / denom[nz]
        return y

    # Unconstrained cancellation when M is PSD and the range component fits.
    if lam_min >= -1e-14 * max(1.0, abs(lam[-1])):
        y0 = y_of(0.0)
        if np.linalg.norm(y0) <= radius:
            d = u_mat @ y0
            val = ((x + d).conj() @ m_mat @ (x + d)).real
            return float(max(val, 0.0)), d

    mu_lo = max(0.0, -lam_min)
    bottom = np.abs(lam - lam_min) <= 1e-12 * max(1.0, abs(lam_min))

    def phi(mu: float) -> float:
        return float(np.linalg.norm(y_of(mu)) ** 2)

    # Hard case: no component along the bottom eigenspace; pad inside it.
    eps = 1e-14 * max(1.0, abs(lam_min)) + 1e-300
    u_bottom_sq = float(np.sum(np.abs(u[bottom]) ** 2))
    if lam_min < 0 and u_bottom_sq < 1e-28 * max(1.0, float(np.sum(np.abs(u) ** 2))):
        y = y_of(mu_lo + eps)
        y[bottom] = 0.0
        nrm2 = float(np.linalg.norm(y) ** 2)
        if nrm2 <= radius**2:
            pad = np.sqrt(radius**2 - nrm2)
            y[np.argmin(lam)] += pad
            d = u_mat @ y
            val = ((x + d).conj() @ m_mat @ (x + d)).real
            return float(val), d

    scale = float(np.linalg.norm(lam * u))
    mu_hi = mu_lo + scale / radius + eps
    while phi(mu_hi) > radius**2:
        mu_hi = 2.0 * mu_hi + 1.0
    lo, hi = mu_lo + eps, mu_hi
    if phi(lo) <= radius**2:
        hi = lo
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if phi(mid) > radius**2:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    d = u_mat @ y_of(hi)
    if np.linalg.norm(d) > radius:
        d *= radius / np.linalg.norm(d)
    val = ((x + d).conj() @ m_mat @ (x + d)).real
    return float(val), d


def worst_case_received_power(
    total_cov: np.ndarray, g_hat: np.ndarray, upsilon: float
) -> tuple[float, np.ndarray]:
    """Exact worst-case RF power at a harvester over its Frobenius error ball.

    Returns the certified minimum (clamped at zero) and a worst-case channel
    error matrix attaining it.
    """
    n_tx, n_rx = g_hat.shape
    m_mat = np.kron(np.eye(n_rx), total_cov)
    g_vec = g_hat.reshape(-1, order="F")
    val, d = min_quadratic_over_ball(m_mat, g_vec, upsilon)
    return max(val, 0.0), d.reshape(n_tx, n_rx, order="F")


def worst_case_sinr_margin(
    w_mats: list[np.ndarray],
    k: int,
    h_hat: np.ndarray,
    rho: float,
    gamma: float,
    noise_power: float,
) -> tuple[float, np.ndarray]:
    """Exact worst-case value of signal/gamma - interference - noise for user k."""
    m_mat = w_mats[k] / gamma - sum(w_mats[i] for i in range(len(w_mats)) if i != k)
    if len(w_mats) == 1:
        m_mat = w_mats[k] / gamma
    val, d = min_quadratic_over_ball(np.asarray(m_mat), h_hat, rho)
    return val - noise_power, d


def certified_min_harvest(
    config: SystemConfig,
    design: BeamformingDesign,
    estimates: ChannelSet,
    radii: tuple[list[float], list[float]],
) -> tuple[float, list[float]]:
    """Minimum harvested power the design certifiably guarantees, plus the
    per-harvester worst-case received powers behind it."""
    total = design.total_covariance()
    worst = [
        worst_case_received_power(total, estimates.er_estimates[j], radii[1][j])[0]
        for j in range(config.n_er)
    ]
    harvested = [harvested_power(p, prm) for p, prm in zip(worst, config.eh_params)]
    return min(harvested), worst


# ---------------------------------------------------------------------------
# the bisection driver
# ---------------------------------------------------------------------------

def _solve_with_retries(problem: ConicProblem, options: SolverOptions | None) -> ConicSolution:
    """Solve, falling back to looser accuracy targets on numerical failure.

    A tighter-than-necessary target occasionally drives the interior point
    into a stall whose final iterate does not certify; terminating earlier
    (looser gap) yields a clean, certifiable solution instead.
    """
    sol = solve(problem, options)
    if sol.status != "numerical-failure":
        return sol
    base = options or SolverOptions()
    for gap, chordal in ((1e-9, base.chordal), (1e-8, base.chordal), (1e-9, False)):
        if chordal is False or gap > base.gap_tol:
            retry = SolverOptions(
                gap_tol=min(gap, base.gap_tol) if chordal is False else gap,
                feas_tol=min(gap, base.feas_tol) if chordal is False else gap,
                accept_tol=base.accept_tol,
                max_iter=base.max_iter,
                verbose=base.verbose,
                chordal=chordal,
                max_threads=base.max_threads,
            )
            sol = solve(problem, retry)
            if sol.status != "numerical-failure":
                return sol
    return sol


def _covariance_value(
    solution: ConicSolution, name: str, dirs: dict, n_tx: int
) -> np.ndarray:
    if name in dirs:
        u = np.asarray(dirs[name], dtype=complex)
        return max(solution.primal[f"pow::{name}"], 0.0) * np.outer(u, u.conj())
    mat = solution.primal[name]
    lam, u_mat = np.linalg.eigh(mat)
    if lam[0] >= 0.0:
        return mat
    # interior-point noise can leave eigenvalues a few 1e-9 * budget below
    # zero, which swamps the per-matrix PSD tolerance when the matrix itself
    # is vestigial; project that noise away
    return (u_mat * np.maximum(lam, 0.0)) @ u_mat.conj().T


def _design_from_solution(
    config: SystemConfig, solution: ConicSolution, beta_min: list[float], isotropic: bool,
    dirs: dict | None = None,
) -> BeamformingDesign:
    dirs = dirs or {}
    w_mats = [_covariance_value(solution, f"w_{i}", dirs, config.n_tx) for i in range(config.n_ir)]
    if isotropic:
        we = (solution.primal["p_e"] / config.n_tx) * np.eye(config.n_tx, dtype=complex)
    else:
        we = _covariance_value(solution, "w_e", dirs, config.n_tx)
    margin = solution.primal["margin"]
    design = BeamformingDesign(
        w_mats=w_mats,
        we_mat=we,
        betas=[bm + margin for bm in beta_min],
        deltas=[solution.primal.get(f"delta_{k}", 0.0) for k in range(config.n_ir)],
        nus=[
            solution.primal.get(f"nu_{j}", solution.primal.get(f"mu_{j}", 0.0))
            for j in range(config.n_er)
        ],
    )
    design.validate(config.p_max)
    return design


def _harvester_dual_aggregate(
    problem: ConicProblem, solution: ConicSolution, config: SystemConfig, estimates: ChannelSet
) -> np.ndarray:
    """Aggregate of the harvester constraints' duals acting on the total
    covariance: the matrix whose top eigenvalue the power price must match
    whenever the energy beam is active (and strictly exceed when it is not)."""
    n_tx, n_rx = config.n_tx, config.n_rx
    g_scales = problem.metadata.get("er_scales", [1.0] * config.n_er)
    block_names = {b.name for b in problem.blocks}
    b_mat = np.zeros((n_tx, n_tx), dtype=complex)
    for j in range(config.n_er):
        g_n = estimates.er_estimates[j] / g_scales[j]
        if f"c5_{j}" in block_names:
            d_mat = solution.dual[f"c5_{j}"]
            g_vec = g_n.reshape(-1, order="F")
            u_g = np.hstack([np.eye(n_tx * n_rx, dtype=complex), g_vec[:, None]])
            full = u_g @ d_mat @ u_g.conj().T
            for l in range(n_rx):
                a = l * n_tx
                b_mat += full[a : a + n_tx, a : a + n_tx]
        elif f"c5c_{j}" in block_names:
            d_mat = solution.dual[f"c5c_{j}"]
            b_mat += d_mat[:n_tx, :n_tx]
        else:
            b_mat += solution.dual[f"c5r_{j}"] * (g_n @ g_n.conj().T)
    return b_mat


def _certified_zero_energy_beam(
    problem: ConicProblem,
    solution: ConicSolution,
    config: SystemConfig,
    estimates: ChannelSet,
    design: BeamformingDesign,
) -> bool:
    """Dual-side test for an exactly-zero optimal energy covariance.

    When the power price strictly exceeds the top eigenvalue of the
    harvester dual aggregate, the optimal energy covariance is zero and any
    mass the interior point left in it is path residue.  Truncation is only
    allowed while that residue is far below the power-budget tolerance, so
    reported designs keep every stated invariant.
    """
    if problem.metadata.get("isotropic_energy"):
        return False
    lam_star = float(solution.dual.get("power_budget", 0.0))
    if lam_star <= 0.0:
        return False
    we_trace = float(np.trace(design.we_mat).real)
    if we_trace > 1e-6 * config.p_max:
        return False
    b_mat = _harvester_dual_aggregate(problem, solution, config, estimates)
    gap = (lam_star - float(np.linalg.eigvalsh(b_mat)[-1])) / lam_star
    return gap > 1e-4


def _eig_ratio(mat: np.ndarray) -> float:
    w = np.linalg.eigvalsh(mat)
    top = w[-1]
    if top <= 0.0:
        return np.inf
    second = max(w[-2], 0.0) if len(w) > 1 else 0.0
    return float(second / top)


def _rank_report(design: BeamformingDesign, p_max: float, isotropic: bool) -> dict:
    w_ratios = [_eig_ratio(w) for w in design.w_mats]
    we_trace = float(np.trace(design.we_mat).real)
    if isotropic:
        we_ratio = None
    elif we_trace <= ZERO_BEAM_TRACE_TOL * max(p_max, 1e-300):
        we_ratio = 0.0
    else:
        we_ratio = _eig_ratio(design.we_mat)
    tracked = w_ratios + ([we_ratio] if we_ratio is not None else [])
    return {
        "w_ratios": w_ratios,
        "we_ratio": we_ratio,
        "we_trace": we_trace,
        "max_ratio": max(tracked) if tracked else np.inf,
    }


def _check_trace_monotone(trace: list[tuple[float, float]], tol: float = 1e-7) -> None:
    ordered = sorted(trace)
    for (t0, s0), (t1, s1) in zip(ordered, ordered[1:]):
        if t1 > t0 and s1 > s0 + tol:
            raise RuntimeError(
                f"feasibility margin increased along the target sweep: "
                f"s({t0})={s0:.3e} -> s({t1})={s1:.3e}"
            )


def _finalize_design(
    config: SystemConfig,
    estimates: ChannelSet,
    radii,
    final_prob: ConicProblem,
    final_sol: ConicSolution,
    beta_star: list[float],
    isotropic: bool,
    options: SolverOptions | None,
    er_form: str,
):
    """Build the reported design from the final solve, with two certified
    clean-ups.

    A zero optimal energy beam is recognized from the dual side (strict gap
    between the power price and the harvester aggregate); its residual
    interior-point mass is removed and the freed power restored by a uniform
    upscale, which preserves feasibility of every constraint.  If any
    covariance still fails the rank-one eigenvalue-ratio test, the problem
    is re-solved with that covariance pinned to its dominant direction; the
    pinned solution is adopted only when it reproduces the unrestricted
    optimum, which certifies a rank-one optimal point on a degenerate face.
    Anything that cannot be certified is reported as-is.
    """
    dirs: dict = {}
    design = _design_from_solution(config, final_sol, beta_star, isotropic, dirs)

    def cleanup(problem, solution, design):
        if not isotropic and _certified_zero_energy_beam(
            problem, solution, config, estimates, design
        ):
            removed = float(np.trace(design.we_mat).real)
            design.we_mat = np.zeros_like(design.we_mat)
            total = design.total_power()
            if 0.0 < removed and total > 0.0:
                scale = min((total + removed) / total, 1.0 + 1e-3)
                for w in design.w_mats:
                    w *= scale
        return design

    design = cleanup(final_prob, final_sol, design)
    report = _rank_report(design, config.p_max, isotropic)

    if report["max_ratio"] > RANK_RATIO_TOL:
        for k, ratio in enumerate(report["w_ratios"]):
            if ratio > RANK_RATIO_TOL:
                lam, u_mat = np.linalg.eigh(design.w_mats[k])
                dirs[f"w_{k}"] = u_mat[:, -1]
        if report["we_ratio"] is not None and report["we_ratio"] > RANK_RATIO_TOL:
            lam, u_mat = np.linalg.eigh(design.we_mat)
            dirs["w_e"] = u_mat[:, -1]
        refined_prob = assemble_feasibility_sdp(
            config,
            estimates,
            radii,
            beta_min=beta_star,
            isotropic_energy=isotropic,
            er_form=er_form,
            rank_one_dirs=dirs,
        )
        refined_sol = _solve_with_retries(refined_prob, options)
        if (
            refined_sol.status == "optimal"
            and refined_sol.primal["margin"] >= final_sol.primal["margin"] - 1e-9
        ):
            design = _design_from_solution(config, refined_sol, beta_star, isotropic, dirs)
            design = cleanup(refined_prob, refined_sol, design)
            final_prob, final_sol = refined_prob, refined_sol
            report = _rank_report(design, config.p_max, isotropic)
    return design, final_prob, final_sol, report


def _pick_er_form(config: SystemConfig, er_form: str) -> str:
    # The compact reformulation is exact but loses strict complementarity on
    # instances with slack harvester constraints, which stalls the interior
    # point early; the lifted blocks with chordal decomposition are both
    # accurate and fast enough, so they are the default at every size.
    if er_form != "auto":
        return er_form
    return "lifted"


def solve_maxmin(
    config: SystemConfig,
    estimates: ChannelSet,
    radii: tuple[list[float], list[float]] | None = None,
    options: SolverOptions | None = None,
    isotropic_energy: bool = False,
    er_form: str = "auto",
    force_bisection: bool = False,
    tau_floor: float = 0.0,
) -> MaxMinResult:
    """Maximize the minimum harvested power over all harvesters.

    Bisects the harvesting target on a fixed dyadic grid over
    [0, (1-1e-6) min_j m_sat_j]; at each probe the rectifier inversion maps
    the target to per-harvester received-power requirements and the margin
    SDP decides feasibility.  The fixed grid makes results monotone under
    any constraint tightening that preserves channel estimates (larger
    budgets, smaller SINR targets), beyond the bisection tolerance alone.
    The final design is re-solved at the returned target so the reported
    primal/dual pair belongs to one clean solve.

    When every harvester has the same rectifier curve, the max-min of
    harvested power is the curve applied to the max-min of worst-case
    received power, so the search collapses to the single margin solve at
    target zero; the bisection path remains for heterogeneous circuits (or
    ``force_bisection``).  ``tau_floor`` seeds the search with an externally
    certified feasible target (e.g. from a baseline design that witnesses
    feasibility); the result is then never below it.
    """
    t_start = time.perf_counter()
    if radii is None:
        radii = (list(config.ir_error_radii), list(config.er_error_radii))
    scheme = "baseline2" if isotropic_energy else "proposed"
    if config.p_max == 0.0:
        # positive SINR targets need signal power; no solve required
        return MaxMinResult(
            status="infeasible-qos",
            tau_star=0.0,
            design=None,
            bisection_trace=[],
            rank_report=None,
            scheme=scheme,
            solve_time=time.perf_counter() - t_start,
            config=config,
            estimates=estimates,
            radii=radii,
        )
    template = assemble_feasibility_sdp(
        config,
        estimates,
        radii,
        beta_min=[0.0] * config.n_er,
        isotropic_energy=isotropic_energy,
        er_form=_pick_er_form(config, er_form),
    )
    m_min = min(p.m_sat for p in config.eh_params)
    cap = (1.0 - 1e-6) * m_min
    tol = max(1e-9, 1e-6 * m_min)

    homogeneous = all(p == config.eh_params[0] for p in config.eh_params)
    trace: list[tuple[float, float]] = []

    def margin_at(tau: float) -> tuple[ConicSolution, ConicProblem]:
        beta = [required_rf_power(tau, p) for p in config.eh_params]
        prob = feasibility_constants(template, config, beta)
        sol = _solve_with_retries(prob, options)
        if sol.status == "numerical-failure" or sol.status == "unbounded":
            raise MaxMinSolverError(tau, sol.raw_status)
        return sol, prob

    def infeasible_result() -> MaxMinResult:
        # The margin variable makes the energy side always attainable, so
        # infeasibility can only come from the QoS/power constraints.
        return MaxMinResult(
            status="infeasible-qos",
            tau_star=0.0,
            design=None,
            bisection_trace=trace,
            rank_report=None,
            scheme=scheme,
            solve_time=time.perf_counter() - t_start,
            config=config,
            estimates=estimates,
            radii=radii,
        )

    if homogeneous and not force_bisection:
        # One shared curve: max-min harvested power is the curve applied to
        # the max-min worst-case received power, found by a single solve.
        final_sol, final_prob = margin_at(0.0)
        if final_sol.status == "infeasible":
            return infeasible_result()
        s_star = final_sol.primal["margin"]
        tau_star = min(harvested_power(max(s_star, 0.0), config.eh_params[0]), cap)
        beta_star = [0.0] * config.n_er
        trace.append((0.0, s_star))
    else:
        lo, hi = min(tau_floor, cap), cap
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            sol, _ = margin_at(mid)
            if sol.status == "infeasible":
                return infeasible_result()
            margin = sol.primal["margin"]
            trace.append((mid, margin))
            if margin >= 0.0:
                lo = mid
            else:
                hi = mid
        tau_star = lo
        final_sol, final_prob = margin_at(tau_star)
        if final_sol.status == "infeasible":
            return infeasible_result()
        beta_star = [required_rf_power(tau_star, p) for p in config.eh_params]
        trace.append((tau_star, final_sol.primal["margin"]))
    _check_trace_monotone(trace)

    design, final_prob, final_sol, report = _finalize_design(
        config,
        estimates,
        radii,
        final_prob,
        final_sol,
        beta_star,
        isotropic_energy,
        options,
        _pick_er_form(config, er_form),
    )
    design.tau = tau_star
    return MaxMinResult(
        status="solved",
        tau_star=tau_star,
        design=design,
        bisection_trace=trace,
        rank_report=report,
        scheme=scheme,
        solve_time=time.perf_counter() - t_start,
        final_problem=final_prob,
        final_solution=final_sol,
        config=config,
        estimates=estimates,
        radii=radii,
    )


# ---------------------------------------------------------------------------
# rank-one extraction and the dual certificate
# ---------------------------------------------------------------------------

def _phase_fixed(vec: np.ndarray) -> np.ndarray:
    pivot = int(np.argmax(np.abs(vec)))
    phase = vec[pivot] / abs(vec[pivot]) if vec[pivot] != 0 else 1.0
    fixed = vec * np.conj(phase)
    fixed[pivot] = fixed[pivot].real  # kill rounding residue in the pivot
    return fixed


def extract_beamformers(
    design: BeamformingDesign, p_max: float | None = None
) -> tuple[list[np.ndarray], np.ndarray | None, dict]:
    """Recover beamforming vectors from (near-)rank-one covariances.

    Each information covariance must pass the eigenvalue-ratio test; the
    energy covariance may instead be (numerically) zero.  The global phase
    of every returned vector is fixed by making its largest-magnitude entry
    real and positive.  On failure raises :class:`RankOneExtractionError`
    rather than repairing anything: a genuine violation means the solve
    did not deliver the structure the optimality theory promises.
    """
    if p_max is None:
        p_max = design.total_power()
    vectors: list[np.ndarray] = []
    report = _rank_report(design, p_max, isotropic=False)
    for k, w in enumerate(design.w_mats):
        ratio = report["w_ratios"][k]
        if not ratio <= RANK_RATIO_TOL:
            raise RankOneExtractionError(f"information covariance {k}", ratio)
        lam, u_mat = np.linalg.eigh(w)
        vectors.append(_phase_fixed(np.sqrt(lam[-1]) * u_mat[:, -1]))
    we_vector = None
    if report["we_ratio"] is not None and report["we_ratio"] > 0.0:
        ratio = report["we_ratio"]
        if not ratio <= RANK_RATIO_TOL:
            raise RankOneExtractionError("energy covariance", ratio)
        lam, u_mat = np.linalg.eigh(design.we_mat)
        we_vector = _phase_fixed(np.sqrt(lam[-1]) * u_mat[:, -1])
    design.vectors = vectors
    return vectors, we_vector, report


def _stack_u(vec: np.ndarray) -> np.ndarray:
    n = vec.shape[0]
    return np.hstack([np.eye(n, dtype=complex), vec[:, None]])


def verify_kkt(
    result: MaxMinResult,
    problem: ConicProblem | None = None,
    solution: ConicSolution | None = None,
    eig_gap_tol: float = 1e-4,
    comp_tol: float = 1e-5,
    align_tol: float = 1e-3,
) -> KktCertificate:
    """Rebuild the stationarity matrices from the duals and check the
    optimality structure: complementary slackness of the covariance blocks,
    the power price matching the top eigenvalue of each user's certificate
    matrix, beam alignment with the corresponding eigenvector, and the
    energy-beam activity rule against the harvester-side aggregate."""
    problem = problem or result.final_problem
    solution = solution or result.final_solution
    if solution is None or not solution.dual:
        raise ValueError("result carries no dual solution to verify")
    config, estimates = result.config, result.estimates
    if problem.metadata.get("isotropic_energy"):
        raise ValueError("the optimality certificate applies to the free energy-covariance design")
    if not problem.metadata.get("certificate_grade"):
        # The certificate is stated on the lifted robust blocks; re-solve the
        # same instance in that form to obtain matching duals.
        beta_star = [required_rf_power(result.tau_star, p) for p in config.eh_params]
        problem = assemble_feasibility_sdp(
            config,
            estimates,
            result.radii,
            beta_min=beta_star,
            er_form="lifted",
            force_robust_blocks=True,
        )
        solution = _solve_with_retries(problem, None)
        if solution.status != "optimal":
            raise MaxMinSolverError(result.tau_star, solution.raw_status)
    design = result.design
    k_users = config.n_ir
    n_tx = config.n_tx

    lam_star = float(solution.dual["power_budget"])
    d_c2 = [solution.dual[f"c2_{k}"] for k in range(k_users)]
    y_mats = [solution.dual[f"psd::w_{k}"] for k in range(k_users)]
    z_mat = solution.dual.get("psd::w_e")

    # The problem was assembled in channel-normalized units; rebuild the
    # stationarity aggregates with the same scaling so they pair with the
    # returned duals exactly.
    h_scales = problem.metadata.get("ir_scales", [1.0] * k_users)

    u_h = [_stack_u(estimates.ir_estimates[k] / h_scales[k]) for k in range(k_users)]
    b_mat = _harvester_dual_aggregate(problem, solution, config, estimates)

    xi_mats = []
    for k in range(k_users):
        xi = u_h[k] @ (d_c2[k] / config.sinr_targets[k]) @ u_h[k].conj().T
        for i in range(k_users):
            if i != k:
                xi -= u_h[i] @ d_c2[i] @ u_h[i].conj().T
        xi_mats.append(xi + b_mat)

    failures: list[str] = []
    comp = {}
    gaps = {"per_user": [], "energy": None}
    angles = []

    if lam_star < 0:
        failures.append(f"negative power price {lam_star}")

    for k in range(k_users):
        w = design.w_mats[k]
        w_norm = np.linalg.norm(w)
        # A user is active when its beam carries resolvable power; vestigial
        # beams (below one part in 1e6 of the budget, as at extreme SNR) sit
        # beneath the certificate's numerical resolution and are recorded
        # but not judged.
        active = float(np.trace(w).real) > 1e-6 * config.p_max
        comp[f"w_{k}"] = float(np.linalg.norm(y_mats[k] @ w) / max(w_norm, 1e-300))
        if active and comp[f"w_{k}"] > comp_tol:
            failures.append(f"complementarity violated on user {k}: {comp[f'w_{k}']:.2e}")
        lam_xi, u_xi = np.linalg.eigh(xi_mats[k])
        gap = (lam_star - lam_xi[-1]) / max(abs(lam_star), 1e-300)
        gaps["per_user"].append(float(gap))
        if active and abs(gap) > eig_gap_tol:
            failures.append(f"price/top-eigenvalue mismatch on user {k}: {gap:.2e}")
        lam_w, u_w = np.linalg.eigh(w)
        cosang = abs(np.vdot(u_xi[:, -1], u_w[:, -1]))
        angles.append(float(np.arccos(min(1.0, cosang))))
        if active and angles[-1] > align_tol:
            failures.append(f"beam {k} misaligned with certificate eigenvector: {angles[-1]:.2e} rad")

    we_trace = float(np.trace(design.we_mat).real)
    we_active = we_trace > ZERO_BEAM_TRACE_TOL * max(config.p_max, 1e-300)
    if z_mat is not None:
        comp["w_e"] = float(
            np.linalg.norm(z_mat @ design.we_mat) / max(np.linalg.norm(design.we_mat), 1e-300)
        )
        lam_b = float(np.linalg.eigvalsh(b_mat)[-1])
        gap_b = (lam_star - lam_b) / max(abs(lam_star), 1e-300)
        gaps["energy"] = float(gap_b)
        if gap_b < -eig_gap_tol:
            failures.append(f"power price below the harvester aggregate top eigenvalue: {gap_b:.2e}")
        if we_active:
            if abs(gap_b) > eig_gap_tol:
                failures.append(f"active energy beam but slack price gap {gap_b:.2e}")
            if comp["w_e"] > comp_tol:
                failures.append(f"complementarity violated on the energy beam: {comp['w_e']:.2e}")

    # The power constraint is active at any optimum of this family.
    power = design.total_power()
    activity = abs(power - config.p_max) / max(config.p_max, 1e-300)
    if activity > 1e-6:
        failures.append(f"power budget not active: relative slack {activity:.2e}")

    certificate = KktCertificate(
        lambda_star=lam_star,
        xi_matrices=xi_mats,
        b_matrix=b_mat,
        complementarity_residuals=comp,
        eig_gap=gaps,
        alignment_angles=angles,
        power_row_activity=float(activity),
        we_active=we_active,
        failures=failures,
    )
    result.kkt_report = certificate
    return certificate


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

def baseline1_linear_design(
    config: SystemConfig,
    estimates: ChannelSet,
    radii: tuple[list[float], list[float]] | None = None,
    options: SolverOptions | None = None,
    er_form: str = "auto",
) -> MaxMinResult:
    """Design under the unit-efficiency linear harvesting model.

    Maximizes the minimum worst-case received RF power in a single SDP (no
    bisection), then reports what that design harvests under the non-linear
    rectifier curve.
    """
    t_start = time.perf_counter()
    if radii is None:
        radii = (list(config.ir_error_radii), list(config.er_error_radii))
    if config.p_max == 0.0:
        return MaxMinResult(
            status="infeasible-qos",
            tau_star=0.0,
            design=None,
            bisection_trace=[],
            rank_report=None,
            scheme="baseline1",
            solve_time=time.perf_counter() - t_start,
            config=config,
            estimates=estimates,
            radii=radii,
        )
    problem = assemble_feasibility_sdp(
        config,
        estimates,
        radii,
        beta_min=[0.0] * config.n_er,
        isotropic_energy=False,
        er_form=_pick_er_form(config, er_form),
    )
    sol = _solve_with_retries(problem, options)
    if sol.status == "infeasible":
        return MaxMinResult(
            status="infeasible-qos",
            tau_star=0.0,
            design=None,
            bisection_trace=[],
            rank_report=None,
            scheme="baseline1",
            solve_time=time.perf_counter() - t_start,
            config=config,
            estimates=estimates,
            radii=radii,
        )
    if sol.status != "optimal":
        raise MaxMinSolverError(0.0, sol.raw_status)
    design, problem, sol, report = _finalize_design(
        config,
        estimates,
        radii,
        problem,
        sol,
        [0.0] * config.n_er,
        False,
        options,
        _pick_er_form(config, er_form),
    )
    min_phi, worst = certified_min_harvest(config, design, estimates, radii)
    design.tau = min_phi
    design.betas = worst
    return MaxMinResult(
        status="solved",
        tau_star=min_phi,
        design=design,
        bisection_trace=[(min_phi, sol.primal["margin"])],
        rank_report=report,
        scheme="baseline1",
        solve_time=time.perf_counter() - t_start,
        final_problem=problem,
        final_solution=sol,
        config=config,
        estimates=estimates,
        radii=radii,
    )


def baseline2_isotropic(
    config: SystemConfig,
    estimates: ChannelSet,
    radii: tuple[list[float], list[float]] | None = None,
    options: SolverOptions | None = None,
    er_form: str = "auto",
) -> MaxMinResult:
    """Max-min design with the energy covariance fixed to a scaled identity."""
    return solve_maxmin(config, estimates, radii, options, isotropic_energy=True, er_form=er_form)


# ---------------------------------------------------------------------------
# sampled robustness audit
# ---------------------------------------------------------------------------

def _ball_samples(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    raw = (rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))) / np.sqrt(2.0)
    norms = np.linalg.norm(raw, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    radii = radius * rng.uniform(size=(n, 1)) ** (1.0 / (2 * dim))
    return raw / norms * radii


def robustness_check(
    config: SystemConfig,
    design: BeamformingDesign,
    estimates: ChannelSet,
    radii: tuple[list[float], list[float]],
    n_samples: int = 10_000,
    seed: int = 0,
) -> RobustnessReport:
    """Monte-Carlo audit of a design over the stated uncertainty balls.

    Uniform in-ball samples are augmented with deterministic boundary
    probes (along the estimate, along dominant eigenvectors, and at the
    exact worst-case point of each constraint's quadratic) so the reported
    minima are at most the true worst cases up to the quadratic/ratio gap.
    """
    rng = np.random.default_rng(seed)
    rho_list, ups_list = radii
    worst_sinr: list[float] = []
    for k in range(config.n_ir):
        h_hat = estimates.ir_estimates[k]
        rho = rho_list[k]
        deltas = _ball_samples(rng, n_samples, config.n_tx, rho)
        probes = [np.zeros(config.n_tx, dtype=complex)]
        unit_h = h_hat / np.linalg.norm(h_hat)
        probes += [rho * unit_h, -rho * unit_h]
        m_mat = design.w_mats[k] / config.sinr_targets[k] - sum(
            design.w_mats[i] for i in range(config.n_ir) if i != k
        )
        if config.n_ir == 1:
            m_mat = design.w_mats[k] / config.sinr_targets[k]
        lam, u_mat = np.linalg.eigh(np.asarray(m_mat))
        probes += [rho * u_mat[:, 0], -rho * u_mat[:, 0], rho * u_mat[:, -1], -rho * u_mat[:, -1]]
        _, d_star = min_quadratic_over_ball(np.asarray(m_mat), h_hat, rho)
        probes.append(d_star)
        all_d = np.vstack([deltas] + [p[None, :] for p in probes])
        h_all = h_hat[None, :] + all_d
        sig = np.einsum("sn,nm,sm->s", h_all.conj(), design.w_mats[k], h_all).real
        interf = np.zeros(len(h_all))
        for i in range(config.n_ir):
            if i != k:
                interf += np.einsum("sn,nm,sm->s", h_all.conj(), design.w_mats[i], h_all).real
        sinr = sig / (interf + config.noise_power)
        worst_sinr.append(float(sinr.min()))

    worst_power: list[float] = []
    total = design.total_covariance()
    for j in range(config.n_er):
        g_hat = estimates.er_estimates[j]
        ups = ups_list[j]
        dim = config.n_tx * g_hat.shape[1]
        g_vec = g_hat.reshape(-1, order="F")
        m_mat = np.kron(np.eye(g_hat.shape[1]), total)
        deltas = _ball_samples(rng, n_samples, dim, ups)
        probes = [np.zeros(dim, dtype=complex)]
        unit_g = g_vec / np.linalg.norm(g_vec)
        probes += [-ups * unit_g, ups * unit_g]
        lam, u_mat = np.linalg.eigh(m_mat)
        probes += [ups * u_mat[:, 0], -ups * u_mat[:, 0]]
        _, d_star = min_quadratic_over_ball(m_mat, g_vec, ups)
        probes.append(d_star)
        all_d = np.vstack([deltas] + [p[None, :] for p in probes])
        g_all = g_vec[None, :] + all_d
        power = np.einsum("sd,de,se->s", g_all.conj(), m_mat, g_all).real
        worst_power.append(float(power.min()))

    return RobustnessReport(worst_sinr=worst_sinr, worst_power=worst_power, n_samples=n_samples)
