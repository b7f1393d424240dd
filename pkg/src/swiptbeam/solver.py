"""Interior-point solution of the assembled cone programs.

Thin adapter over the Clarabel conic solver: compiles a
:class:`~swiptbeam.lmi.ConicProblem` to the real standard form, solves it,
and unpacks primal values and one dual multiplier per named constraint
(a Hermitian matrix for each LMI block, a scalar for each linear row).  The
duals feed the optimality-structure verifier, so accurate dual recovery is
part of the contract here, not a convenience.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .lmi import ConicProblem, smat, svec_len

__all__ = ["SolverOptions", "ConicSolution", "ResidualReport", "solve", "certify"]


@dataclass(frozen=True)
class SolverOptions:
    """Interior-point controls.

    The solve targets ``gap_tol``/``feas_tol``; a reduced-accuracy exit is
    still accepted as optimal when the independently recomputed residuals
    meet ``accept_tol``, which is the accuracy this package's contracts are
    stated at.  The target is deliberately tighter than the contract: spare
    accuracy goes straight into the rank-one structure of the returned
    covariances.
    """

    gap_tol: float = 1e-10
    feas_tol: float = 1e-10
    accept_tol: float = 1e-7
    max_iter: int = 200
    verbose: bool = False
    # None: decompose chordal sparsity inside PSD cones when the largest
    # realified block reaches 40 (big wins on the lifted harvester LMIs).
    chordal: bool | None = None
    # Single-threaded linear algebra: these problems are too small for the
    # backend's threading to pay off, and callers parallelize per instance.
    max_threads: int = 1


@dataclass
class ConicSolution:
    """Solver outcome: primal/dual values plus independently usable residuals."""

    status: str  # optimal | infeasible | unbounded | numerical-failure
    primal: dict
    dual: dict
    objective_value: float
    residuals: dict = field(default_factory=dict)
    solve_time: float = 0.0
    iterations: int = 0
    raw_status: str = ""
    x: np.ndarray | None = None
    z: np.ndarray | None = None


@dataclass
class ResidualReport:
    primal_linear: float
    primal_psd: float
    dual_stationarity: float
    dual_cone: float
    rel_gap: float
    flagged: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flagged


# Reduced-accuracy exits are mapped to optimal *candidates*; they survive
# only if the independently recomputed residuals meet accept_tol.
_STATUS_MAP = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "MaxIterations": "optimal",
    "InsufficientProgress": "optimal",
    "NumericalError": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def solve(problem: ConicProblem, options: SolverOptions | None = None) -> ConicSolution:
    """Solve a conic problem; deterministic for fixed inputs and options.

    Primal values are returned per variable name, duals per constraint name
    (linear rows and implicit variable-PSD blocks included).  A ``Solved``
    status is downgraded to ``numerical-failure`` if the independently
    recomputed residuals violate ten times the solve tolerance.
    """
    import clarabel

    opts = options or SolverOptions()
    structure = problem.structure()
    b = structure.b_vector(problem)

    settings = clarabel.DefaultSettings()
    settings.verbose = opts.verbose
    settings.max_iter = opts.max_iter
    settings.tol_gap_abs = opts.gap_tol
    settings.tol_gap_rel = opts.gap_tol
    settings.tol_feas = opts.feas_tol
    settings.max_threads = opts.max_threads
    chordal = opts.chordal
    if chordal is None:
        chordal = bool(structure.psd_dims) and max(structure.psd_dims) >= 40
    settings.chordal_decomposition_enable = chordal
    if chordal:
        settings.chordal_decomposition_complete_dual = True
        # The compact decomposed form is dramatically slower on these
        # block-arrow cones; the standard form scales linearly in the number
        # of harvester blocks.
        settings.chordal_decomposition_compact = False

    t0 = time.perf_counter()
    clarabel_solver = clarabel.DefaultSolver(
        sp.csc_matrix((structure.n_cols, structure.n_cols)),
        structure.q,
        structure.a_matrix,
        b,
        structure.cones(),
        settings,
    )
    raw = clarabel_solver.solve()
    elapsed = time.perf_counter() - t0

    raw_status = str(raw.status)
    status = _STATUS_MAP.get(raw_status, "numerical-failure")

    x = np.asarray(raw.x, dtype=float)
    z = np.asarray(raw.z, dtype=float)
    primal = structure.unpack_primal(x) if status == "optimal" else {}
    dual = structure.unpack_dual(z) if status == "optimal" else {}
    objective_value = float(structure.objective_sign * (structure.q @ x)) if status == "optimal" else np.nan

    solution = ConicSolution(
        status=status,
        primal=primal,
        dual=dual,
        objective_value=objective_value,
        solve_time=elapsed,
        iterations=int(raw.iterations),
        raw_status=raw_status,
        x=x,
        z=z,
    )
    if status == "optimal":
        report = certify(solution, problem, tol=opts.accept_tol)
        solution.residuals = {
            "primal_linear": report.primal_linear,
            "primal_psd": report.primal_psd,
            "dual_stationarity": report.dual_stationarity,
            "dual_cone": report.dual_cone,
            "rel_gap": report.rel_gap,
        }
        if not report.ok:
            solution.status = "numerical-failure"
    return solution


def certify(solution: ConicSolution, problem: ConicProblem, tol: float = 1e-6) -> ResidualReport:
    """Recompute feasibility/optimality residuals from the raw problem data.

    Works from the compiled (A, b, q) triple and the returned (x, z) only;
    nothing is taken from solver-internal accounting.  Any residual above
    ``tol`` is flagged.
    """
    if solution.x is None or solution.z is None:
        raise ValueError("solution does not carry raw vectors to certify")
    structure = problem.structure()
    a_mat, q = structure.a_matrix, structure.q
    b = structure.b_vector(problem)
    x, z = solution.x, solution.z
    s = b - a_mat @ x

    n_eq = structure.n_zero_rows
    n_lin = structure.n_lin_rows
    scale_p = 1.0 + float(np.linalg.norm(b, np.inf))
    prim_lin = 0.0
    if n_eq:
        prim_lin = max(prim_lin, float(np.abs(s[:n_eq]).max()))
    if n_lin > n_eq:
        prim_lin = max(prim_lin, float(max(0.0, -(s[n_eq:n_lin]).min())))
    prim_psd = 0.0
    row = n_lin
    for d2 in structure.psd_dims:
        m = svec_len(d2)
        block = smat(s[row : row + m], d2)
        w_min = float(np.linalg.eigvalsh(block).min())
        prim_psd = max(prim_psd, max(0.0, -w_min))
        row += m

    # scaled against the dual-side magnitudes that form the stationarity sum
    at_z = a_mat.T @ z
    dual_stat = float(
        np.abs(q + at_z).max() / (1.0 + np.abs(q).max() + np.abs(at_z).max())
    )
    dual_cone = 0.0
    if n_lin > n_eq:
        dual_cone = max(dual_cone, float(max(0.0, -(z[n_eq:n_lin]).min())))
    row = n_lin
    for d2 in structure.psd_dims:
        m = svec_len(d2)
        zmin = float(np.linalg.eigvalsh(smat(z[row : row + m], d2)).min())
        dual_cone = max(dual_cone, max(0.0, -zmin))
        row += m

    p_obj = float(q @ x)
    d_obj = float(-b @ z)
    rel_gap = abs(p_obj - d_obj) / (1.0 + max(abs(p_obj), abs(d_obj)))

    scale_d = 1.0 + float(np.abs(q).max()) if q.size else 1.0
    report = ResidualReport(
        primal_linear=prim_lin / scale_p,
        primal_psd=prim_psd / scale_p,
        dual_stationarity=dual_stat,
        dual_cone=dual_cone / scale_d,
        rel_gap=rel_gap,
    )
    checks = {
        "primal_linear": report.primal_linear,
        "primal_psd": report.primal_psd,
        "dual_stationarity": report.dual_stationarity,
        "dual_cone": report.dual_cone,
        "rel_gap": report.rel_gap,
    }
    # not-greater keeps NaN residuals flagged
    report.flagged = [name for name, val in checks.items() if not val <= tol]
    return report
