"""Robust-constraint LMIs and standard-form conic problem assembly.

The worst-case SINR and worst-case received-power constraints over
norm-bounded channel-error balls are turned into linear matrix inequalities
with one S-procedure multiplier each.  The resulting problem (Hermitian PSD
matrix variables, nonnegative scalars, one power row, LMI blocks) is packed
into a real standard-form cone program via the complex-to-real embedding

    M >= 0  <=>  [[Re M, -Im M], [Im M, Re M]] >= 0,

with every Hermitian matrix variable parameterized by its n^2 real degrees
of freedom.  Compilation of the sparse constraint matrix is cached on a
structure object shared by problems that differ only in constant terms, so
re-solving along a bisection sweep costs one vector refresh plus the solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .model import ChannelSet, SystemConfig

__all__ = [
    "ScalarVar",
    "MatrixVar",
    "ScalarTerm",
    "CongruenceTerm",
    "LmiBlock",
    "LinearRow",
    "ConicProblem",
    "realify",
    "svec",
    "smat",
    "build_c2_lmi",
    "build_c5_lmi",
    "assemble_feasibility_sdp",
    "evaluate_block",
    "dump_problem",
]


# ---------------------------------------------------------------------------
# symmetric vectorization and the complex-to-real embedding
# ---------------------------------------------------------------------------

@lru_cache(maxsize=None)
def _svec_indices(dim: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Upper-triangle column-major indices and sqrt(2) off-diagonal scaling."""
    rows, cols, scale = [], [], []
    for c in range(dim):
        for r in range(c + 1):
            rows.append(r)
            cols.append(c)
            scale.append(1.0 if r == c else np.sqrt(2.0))
    return np.array(rows), np.array(cols), np.array(scale)


def svec_len(dim: int) -> int:
    return dim * (dim + 1) // 2


def svec(mat: np.ndarray) -> np.ndarray:
    """Scaled upper-triangle vectorization of a real symmetric matrix."""
    r, c, s = _svec_indices(mat.shape[-1])
    return mat[..., r, c] * s


def smat(vec: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of :func:`svec`."""
    r, c, s = _svec_indices(dim)
    mat = np.zeros((dim, dim))
    mat[r, c] = vec / s
    mat[c, r] = vec / s
    return mat


def realify(block: np.ndarray) -> np.ndarray:
    """Real symmetric embedding of a Hermitian matrix (doubled dimension).

    Positive semidefiniteness is preserved in both directions and every
    eigenvalue appears with doubled multiplicity.
    """
    block = np.asarray(block)
    scale = np.abs(block).max() if block.size else 0.0
    if np.abs(block - np.swapaxes(block, -1, -2).conj()).max() > 1e-9 * max(scale, 1e-300):
        raise ValueError("realify requires a Hermitian input")
    re, im = block.real, block.imag
    top = np.concatenate([re, -im], axis=-1)
    bot = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bot], axis=-2)


def complex_dual_from_real(z_mat: np.ndarray) -> np.ndarray:
    """Recover the Hermitian dual matrix from a realified block's dual.

    The adjoint of the embedding: for Z = [[P, Q], [Q^T, R]], the complex
    dual is (P + R) + 1j (Q^T - Q); it is PSD whenever Z is, and the pairing
    <realify(S), Z> = Re tr(S D) holds exactly.
    """
    d2 = z_mat.shape[0]
    if d2 % 2:
        raise ValueError("realified block must have even dimension")
    d = d2 // 2
    p, q, r = z_mat[:d, :d], z_mat[:d, d:], z_mat[d:, d:]
    return (p + r) + 1j * (q.T - q)


@lru_cache(maxsize=None)
def _herm_basis(dim: int) -> np.ndarray:
    """Stack of dim^2 Hermitian basis matrices: diagonals, then (re, im) pairs
    for each upper-triangle entry in column-major order."""
    out = np.zeros((dim * dim, dim, dim), dtype=complex)
    for i in range(dim):
        out[i, i, i] = 1.0
    p = dim
    for j in range(dim):
        for i in range(j):
            out[p, i, j] = 1.0
            out[p, j, i] = 1.0
            p += 1
            out[p, i, j] = 1j
            out[p, j, i] = -1j
            p += 1
    return out


def herm_to_params(mat: np.ndarray) -> np.ndarray:
    dim = mat.shape[0]
    out = np.empty(dim * dim)
    out[:dim] = np.diagonal(mat).real
    p = dim
    for j in range(dim):
        for i in range(j):
            out[p] = mat[i, j].real
            out[p + 1] = mat[i, j].imag
            p += 2
    return out


def params_to_herm(x: np.ndarray, dim: int) -> np.ndarray:
    return np.tensordot(x, _herm_basis(dim), axes=(0, 0))


# ---------------------------------------------------------------------------
# problem data model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalarVar:
    name: str
    nonneg: bool = False


@dataclass(frozen=True)
class MatrixVar:
    """Hermitian matrix variable; ``psd`` adds the cone constraint on the
    variable itself as an extra block."""

    name: str
    dim: int
    psd: bool = True


@dataclass(frozen=True)
class ScalarTerm:
    """Contribution ``x * coef`` of scalar variable ``var`` to a block."""

    var: str
    coef: np.ndarray


@dataclass(frozen=True)
class CongruenceTerm:
    """Contribution ``scale * L^H (I_copies x W) L`` of matrix variable ``var``."""

    var: str
    left: np.ndarray
    scale: float = 1.0
    copies: int = 1


@dataclass(frozen=True)
class LmiBlock:
    """One PSD constraint: ``const + sum(terms) >= 0`` (Hermitian of size dim)."""

    name: str
    dim: int
    const: np.ndarray
    terms: tuple = ()

    def __post_init__(self) -> None:
        const = np.asarray(self.const, dtype=complex)
        if const.shape != (self.dim, self.dim):
            raise ValueError(f"constant term shape {const.shape} != block dim {self.dim}")
        if np.abs(const - const.conj().T).max() > 1e-9 * max(1.0, np.abs(const).max()):
            raise ValueError("block constant term must be Hermitian")
        object.__setattr__(self, "const", const)


@dataclass(frozen=True)
class LinearRow:
    """Scalar linear constraint.  Matrix-variable coefficients are Hermitian
    matrices C contributing tr(C W); scalar coefficients are floats."""

    name: str
    sense: str  # "<=" or "=="
    rhs: float
    coefs: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.sense not in ("<=", "=="):
            raise ValueError(f"unsupported sense {self.sense!r}")


@dataclass(frozen=True)
class MatrixEquality:
    """Parameterwise Hermitian equality: sum_i coef_i * VAR_i = 0.

    Coefficients are floats for matrix variables (all of one dimension) and
    Hermitian matrices for scalar variables (the scalar times that matrix).
    Splitting cone blocks onto dedicated intermediate variables this way
    keeps each PSD cone coupled to one small column group, which the sparse
    KKT factorization repays handsomely.
    """

    name: str
    dim: int
    coefs: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ConicProblem:
    """Standard-form conic problem over Hermitian PSD blocks and scalars."""

    scalar_vars: tuple[ScalarVar, ...]
    matrix_vars: tuple[MatrixVar, ...]
    blocks: tuple[LmiBlock, ...]
    rows: tuple[LinearRow, ...]
    objective: dict  # var name -> float (scalars) or Hermitian ndarray (matrices)
    maximize: bool = True
    matrix_equalities: tuple[MatrixEquality, ...] = ()
    metadata: dict = field(default_factory=dict, compare=False, repr=False)
    _structure: "CompiledStructure | None" = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        names = [v.name for v in self.scalar_vars] + [v.name for v in self.matrix_vars]
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        referenced = set(self.objective)
        for b in self.blocks:
            referenced.update(t.var for t in b.terms)
        for r in self.rows:
            referenced.update(r.coefs)
        for e in self.matrix_equalities:
            referenced.update(e.coefs)
        unknown = referenced - set(names)
        if unknown:
            raise ValueError(f"constraints reference unknown variables: {sorted(unknown)}")

    def structure(self) -> "CompiledStructure":
        """Compile (cached) the sparse constraint matrix and cone layout."""
        if self._structure is None:
            object.__setattr__(self, "_structure", CompiledStructure(self))
        return self._structure

    def retarget(self, new_consts: dict, new_rhs: dict | None = None) -> "ConicProblem":
        """Copy with some block constants and/or row right-hand sides replaced.

        Only constants change, so the compiled structure is shared; callers
        must not alter variable/term layout through this path.
        """
        new_rhs = new_rhs or {}
        blocks = tuple(
            replace(b, const=np.asarray(new_consts[b.name], dtype=complex))
            if b.name in new_consts
            else b
            for b in self.blocks
        )
        rows = tuple(
            replace(r, rhs=float(new_rhs[r.name])) if r.name in new_rhs else r
            for r in self.rows
        )
        out = replace(self, blocks=blocks, rows=rows)
        object.__setattr__(out, "_structure", self._structure)
        return out

    def with_block_constants(self, new_consts: dict) -> "ConicProblem":
        return self.retarget(new_consts, {})


def evaluate_block(block: LmiBlock, values: dict) -> np.ndarray:
    """Numeric value of a block at given variable values (matrices/scalars)."""
    acc = block.const.astype(complex).copy()
    for t in block.terms:
        if isinstance(t, ScalarTerm):
            acc += float(values[t.var]) * t.coef
        else:
            w = np.asarray(values[t.var], dtype=complex)
            n = w.shape[0]
            left = t.left.reshape(t.copies, n, block.dim)
            acc += t.scale * np.einsum("rni,nm,rmj->ij", left.conj(), w, left)
    return acc


# ---------------------------------------------------------------------------
# compilation to the real standard form
# ---------------------------------------------------------------------------

class CompiledStructure:
    """Layout and sparse data of the realified problem.

    Variables x = [scalars..., Hermitian parameters of each matrix var...].
    Rows: zero cone (equalities), nonnegative cone (inequalities and
    variable nonnegativity), then one PSD-triangle cone per block (declared
    blocks first, then implicit variable-PSD blocks).  The b vector is NOT
    stored here: constants may vary across problems sharing this structure.
    """

    def __init__(self, problem: ConicProblem):
        self.scalar_names = [v.name for v in problem.scalar_vars]
        self.matrix_dims = {v.name: v.dim for v in problem.matrix_vars}
        offsets = {}
        col = 0
        for v in problem.scalar_vars:
            offsets[v.name] = (col, 1)
            col += 1
        for v in problem.matrix_vars:
            offsets[v.name] = (col, v.dim * v.dim)
            col += v.dim * v.dim
        self.var_offsets = offsets
        self.n_cols = col

        self.eq_rows = [r for r in problem.rows if r.sense == "=="]
        self.ineq_rows = [r for r in problem.rows if r.sense == "<="]
        self.nonneg_vars = [v.name for v in problem.scalar_vars if v.nonneg]
        self.block_names = [b.name for b in problem.blocks] + [
            f"psd::{v.name}" for v in problem.matrix_vars if v.psd
        ]
        psd_blocks: list[LmiBlock] = list(problem.blocks)
        for v in problem.matrix_vars:
            if v.psd:
                psd_blocks.append(
                    LmiBlock(
                        name=f"psd::{v.name}",
                        dim=v.dim,
                        const=np.zeros((v.dim, v.dim)),
                        terms=(CongruenceTerm(v.name, np.eye(v.dim)),),
                    )
                )
        self.psd_dims = [2 * b.dim for b in psd_blocks]

        triplets_r: list[np.ndarray] = []
        triplets_c: list[np.ndarray] = []
        triplets_v: list[np.ndarray] = []

        def add_chunk(rows: np.ndarray, cols: np.ndarray, vals: np.ndarray) -> None:
            mask = vals != 0.0
            triplets_r.append(rows[mask])
            triplets_c.append(cols[mask])
            triplets_v.append(vals[mask])

        row0 = 0
        self.row_segments: dict[str, tuple[int, int]] = {}
        for r in self.eq_rows:
            self.row_segments[r.name] = (row0, 1)
            for var, coef in r.coefs.items():
                start, count = offsets[var]
                if var not in self.matrix_dims:
                    add_chunk(np.array([row0]), np.array([start]), np.array([float(coef)]))
                else:
                    dim = self.matrix_dims[var]
                    vals = _trace_coefficients(np.asarray(coef, dtype=complex), dim)
                    add_chunk(np.full(count, row0), np.arange(start, start + count), vals)
            row0 += 1
        self.matrix_equalities = list(problem.matrix_equalities)
        for e in self.matrix_equalities:
            count = e.dim * e.dim
            self.row_segments[e.name] = (row0, count)
            rows = np.arange(row0, row0 + count)
            for var, coef in e.coefs.items():
                start, vcount = offsets[var]
                if var not in self.matrix_dims:
                    # scalar variable with a Hermitian matrix coefficient
                    vals = herm_to_params(np.asarray(coef, dtype=complex))
                    add_chunk(rows, np.full(count, start), vals)
                else:
                    if vcount != count:
                        raise ValueError(f"matrix equality {e.name}: dimension mismatch for {var}")
                    add_chunk(rows, np.arange(start, start + count), np.full(count, float(coef)))
            row0 += count
        self.n_zero_rows = row0
        for r in self.ineq_rows:
            self.row_segments[r.name] = (row0, 1)
            for var, coef in r.coefs.items():
                start, count = offsets[var]
                if var not in self.matrix_dims:
                    add_chunk(np.array([row0]), np.array([start]), np.array([float(coef)]))
                else:
                    dim = self.matrix_dims[var]
                    vals = _trace_coefficients(np.asarray(coef, dtype=complex), dim)
                    add_chunk(np.full(count, row0), np.arange(start, start + count), vals)
            row0 += 1
        for name in self.nonneg_vars:
            self.row_segments[f"nonneg::{name}"] = (row0, 1)
            start, _ = offsets[name]
            add_chunk(np.array([row0]), np.array([start]), np.array([-1.0]))
            row0 += 1
        self.n_lin_rows = row0

        for b in psd_blocks:
            m = svec_len(2 * b.dim)
            self.row_segments[b.name] = (row0, m)
            for t in b.terms:
                start, count = offsets[t.var]
                if isinstance(t, ScalarTerm):
                    colvals = -svec(realify(t.coef))
                    rows = np.arange(row0, row0 + m)
                    add_chunk(rows, np.full(m, start), colvals)
                else:
                    cols_mat = -_congruence_columns(t, b.dim)  # (count, m)
                    rows = np.tile(np.arange(row0, row0 + m), count)
                    cols = np.repeat(np.arange(start, start + count), m)
                    add_chunk(rows, cols, cols_mat.ravel())
            row0 += m
        self.n_rows = row0

        self.a_matrix = sp.csc_matrix(
            (
                np.concatenate(triplets_v) if triplets_v else np.zeros(0),
                (
                    np.concatenate(triplets_r) if triplets_r else np.zeros(0, dtype=int),
                    np.concatenate(triplets_c) if triplets_c else np.zeros(0, dtype=int),
                ),
            ),
            shape=(self.n_rows, self.n_cols),
        )

        sign = -1.0 if problem.maximize else 1.0
        q = np.zeros(self.n_cols)
        for var, coef in problem.objective.items():
            start, count = offsets[var]
            if var not in self.matrix_dims:
                q[start] += sign * float(coef)
            else:
                dim = self.matrix_dims[var]
                q[start : start + count] += sign * _trace_coefficients(
                    np.asarray(coef, dtype=complex), dim
                )
        self.q = q
        self.objective_sign = sign

    def b_vector(self, problem: ConicProblem) -> np.ndarray:
        """Right-hand side for the given problem's constants."""
        b = np.zeros(self.n_rows)
        for r in problem.rows:
            start, _ = self.row_segments[r.name]
            b[start] = r.rhs
        for blk in problem.blocks:
            start, m = self.row_segments[blk.name]
            b[start : start + m] = svec(realify(blk.const))
        return b

    def cones(self):
        import clarabel

        out = []
        if self.n_zero_rows:
            out.append(clarabel.ZeroConeT(self.n_zero_rows))
        n_nonneg = self.n_lin_rows - self.n_zero_rows
        if n_nonneg:
            out.append(clarabel.NonnegativeConeT(n_nonneg))
        out.extend(clarabel.PSDTriangleConeT(d) for d in self.psd_dims)
        return out

    def unpack_primal(self, x: np.ndarray) -> dict:
        values: dict = {}
        for name in self.scalar_names:
            start, _ = self.var_offsets[name]
            values[name] = float(x[start])
        for name, dim in self.matrix_dims.items():
            start, count = self.var_offsets[name]
            values[name] = params_to_herm(x[start : start + count], dim)
        return values

    def unpack_dual(self, z: np.ndarray) -> dict:
        duals: dict = {}
        eq_names = {e.name: e.dim for e in self.matrix_equalities}
        for name, (start, m) in self.row_segments.items():
            if m == 1:
                duals[name] = float(z[start])
            elif name in eq_names:
                duals[name] = params_to_herm(z[start : start + m], eq_names[name])
            else:
                dim2 = int((np.sqrt(8 * m + 1) - 1) / 2)
                duals[name] = complex_dual_from_real(smat(z[start : start + m], dim2))
        return duals


def _trace_coefficients(coef: np.ndarray, dim: int) -> np.ndarray:
    """Row entries of tr(C W) over the Hermitian parameterization of W."""
    basis = _herm_basis(dim)
    return np.einsum("ij,pji->p", coef, basis).real


def _congruence_columns(term: CongruenceTerm, block_dim: int) -> np.ndarray:
    """svec(realify(...)) columns of a congruence term over the Hermitian basis."""
    n = term.left.shape[0] // term.copies
    left = term.left.reshape(term.copies, n, block_dim)
    basis = _herm_basis(n)
    blocks = term.scale * np.einsum("rni,pnm,rmj->pij", left.conj(), basis, left)
    re, im = blocks.real, blocks.imag
    top = np.concatenate([re, -im], axis=2)
    bot = np.concatenate([im, re], axis=2)
    real_blocks = np.concatenate([top, bot], axis=1)
    r, c, s = _svec_indices(2 * block_dim)
    return real_blocks[:, r, c] * s


# ---------------------------------------------------------------------------
# the robust constraint blocks
# ---------------------------------------------------------------------------

def _corner(dim: int) -> np.ndarray:
    e = np.zeros((dim, dim))
    e[-1, -1] = 1.0
    return e


def _top_identity(dim: int) -> np.ndarray:
    m = np.eye(dim)
    m[-1, -1] = 0.0
    return m


def build_c2_lmi(
    k: int,
    estimates: ChannelSet,
    rho_k: float,
    gamma_k: float,
    noise_power: float,
    w_names: tuple[str, ...] | None = None,
    delta_name: str | None = None,
) -> LmiBlock:
    """Worst-case SINR constraint of user ``k`` as an LMI of size n_tx + 1.

    Feasibility of the block over the S-procedure multiplier (nonnegative
    ``delta_k``) is equivalent to the SINR of user ``k`` meeting ``gamma_k``
    for every channel error inside the ball of radius ``rho_k``.
    """
    if gamma_k <= 0.0:
        raise ValueError("SINR target must be positive")
    n_tx = estimates.n_tx
    n_ir = estimates.n_ir
    if w_names is None:
        w_names = tuple(f"w_{i}" for i in range(n_ir))
    if delta_name is None:
        delta_name = f"delta_{k}"
    h_hat = estimates.ir_estimates[k]
    u = np.hstack([np.eye(n_tx, dtype=complex), h_hat[:, None]])  # n_tx x (n_tx+1)
    dim = n_tx + 1
    const = -noise_power * _corner(dim)
    delta_coef = _top_identity(dim) - rho_k**2 * _corner(dim)
    terms = [ScalarTerm(delta_name, delta_coef)]
    for i in range(n_ir):
        scale = 1.0 / gamma_k if i == k else -1.0
        terms.append(CongruenceTerm(w_names[i], u, scale=scale))
    return LmiBlock(name=f"c2_{k}", dim=dim, const=const, terms=tuple(terms))


def build_c5_lmi(
    j: int,
    estimates: ChannelSet,
    upsilon_j: float,
    w_names: tuple[str, ...] | None = None,
    we_name: str | None = "w_e",
    isotropic_power_name: str | None = None,
    nu_name: str | None = None,
    beta_name: str | None = None,
) -> LmiBlock:
    """Worst-case received-power constraint of harvester ``j`` as an LMI.

    Built on the column-stacked vectorization of the estimated channel
    matrix; each transmit covariance enters through its Kronecker lift
    ``I_(n_rx) x W``, matching that vectorization.  Feasibility over the
    nonnegative multiplier ``nu_j`` certifies received power at least
    ``beta_j`` over the whole Frobenius error ball.

    With ``isotropic_power_name`` set, the energy covariance is restricted
    to a scaled identity and only its total power appears as a variable.
    """
    n_tx = estimates.n_tx
    n_rx = estimates.er_estimates[j].shape[1]
    n_ir = estimates.n_ir
    if w_names is None:
        w_names = tuple(f"w_{i}" for i in range(n_ir))
    if nu_name is None:
        nu_name = f"nu_{j}"
    if beta_name is None:
        beta_name = f"beta_{j}"
    g_vec = estimates.er_estimates[j].reshape(-1, order="F")
    d = n_tx * n_rx
    u = np.hstack([np.eye(d, dtype=complex), g_vec[:, None]])  # d x (d+1)
    dim = d + 1
    nu_coef = _top_identity(dim) - upsilon_j**2 * _corner(dim)
    terms: list = [ScalarTerm(nu_name, nu_coef), ScalarTerm(beta_name, -_corner(dim))]
    for name in w_names:
        terms.append(CongruenceTerm(name, u, scale=1.0, copies=n_rx))
    if isotropic_power_name is not None:
        iso = (u.conj().T @ u) / n_tx
        terms.append(ScalarTerm(isotropic_power_name, iso))
    elif we_name is not None:
        terms.append(CongruenceTerm(we_name, u, scale=1.0, copies=n_rx))
    return LmiBlock(name=f"c5_{j}", dim=dim, const=np.zeros((dim, dim)), terms=tuple(terms))


def build_c5_compact(
    j: int,
    normalized: ChannelSet,
    upsilon_j: float,
    w_names: tuple[str, ...],
    we_name: str | None,
    isotropic_power_name: str | None,
    mu_name: str,
    t_name: str,
) -> tuple[LmiBlock, np.ndarray, float]:
    """Reduced-size equivalent of the worst-case received-power constraint.

    By Lagrangian duality of the inner ball minimization, the worst case over
    the error ball equals ``max_{mu>=0} mu(tr R - upsilon^2) -
    mu^2 tr(R (W + mu I)^-1)`` with ``R`` the estimated channel Gram matrix.
    Introducing a Hermitian slack on the range of the estimate turns the
    mu-inner term into a Schur complement, giving an LMI of size
    n_tx + rank(R) instead of n_tx*n_rx + 1 -- an exact reformulation that
    is much cheaper inside the interior-point iteration.  Returns the LMI
    block, the Gram factor needed in the scalar coupling row, and tr(R).
    """
    g_hat = normalized.er_estimates[j]
    n_tx, n_rx = g_hat.shape
    q_mat, r_mat = np.linalg.qr(g_hat)  # q: n_tx x n_rx, orthonormal columns
    sigma = r_mat @ r_mat.conj().T  # = Q^H R Q with R = G G^H
    tr_r = float(np.linalg.norm(g_hat) ** 2)
    dim = n_tx + n_rx
    mu_coef = np.zeros((dim, dim), dtype=complex)
    mu_coef[:n_tx, :n_tx] = np.eye(n_tx)
    mu_coef[:n_tx, n_tx:] = q_mat
    mu_coef[n_tx:, :n_tx] = q_mat.conj().T
    left_w = np.hstack([np.eye(n_tx, dtype=complex), np.zeros((n_tx, n_rx))])
    left_t = np.hstack([np.zeros((n_rx, n_tx), dtype=complex), np.eye(n_rx)])
    terms: list = [ScalarTerm(mu_name, mu_coef), CongruenceTerm(t_name, left_t)]
    for name in w_names:
        terms.append(CongruenceTerm(name, left_w))
    if isotropic_power_name is not None:
        iso = np.zeros((dim, dim), dtype=complex)
        iso[:n_tx, :n_tx] = np.eye(n_tx) / n_tx
        terms.append(ScalarTerm(isotropic_power_name, iso))
    elif we_name is not None:
        terms.append(CongruenceTerm(we_name, left_w))
    block = LmiBlock(
        name=f"c5c_{j}", dim=dim, const=np.zeros((dim, dim)), terms=tuple(terms)
    )
    return block, sigma, tr_r


def assemble_feasibility_sdp(
    config: SystemConfig,
    estimates: ChannelSet,
    radii: tuple[list[float], list[float]] | None = None,
    beta_min: list[float] | None = None,
    isotropic_energy: bool = False,
    er_form: str = "lifted",
    force_robust_blocks: bool = False,
    rank_one_dirs: dict | None = None,
) -> ConicProblem:
    """Margin form of the robust design problem at fixed harvesting targets.

    Maximizes a scalar margin added to every harvester's required
    worst-case received power ``beta_min[j]``; the fixed-target instance is
    feasible exactly when the optimal margin is nonnegative.  A positive
    margin keeps iterates strictly interior, which the interior-point solver
    repays in conditioning.

    Each robust constraint is assembled in channel-normalized units (the
    estimate scaled to unit norm, the error radius, noise floor and power
    requirement rescaled accordingly).  This is an exact reformulation of
    the same constraint set; it removes the enormous dynamic range between
    channel-gain and transmit-power scales that otherwise stalls the
    interior-point iteration.  The per-constraint scales are recorded in
    ``metadata`` so dual-side consumers can rebuild matching quantities.

    ``er_form`` selects the harvester-constraint representation: "lifted"
    is the S-procedure LMI of size n_tx*n_rx + 1; "compact" the equivalent
    n_tx + n_rx form from :func:`build_c5_compact` (same feasible set and
    margins, much faster at larger antenna counts; its duals do not carry
    the lifted-block shape the optimality certificate is stated in).
    Constraints whose error radius is exactly zero reduce to their nominal
    linear form in either representation, unless ``force_robust_blocks``
    keeps the (equivalent) degenerate-radius LMI blocks, which dual-side
    certificate consumers need.

    ``rank_one_dirs`` maps covariance variable names ("w_0", ..., "w_e") to
    unit vectors; each named covariance is restricted to a nonnegative
    multiple of the given rank-one outer product.  Solving the restricted
    problem and matching the unrestricted optimum certifies a rank-one
    optimal solution on a degenerate face.
    """
    if er_form not in ("lifted", "compact"):
        raise ValueError(f"unknown er_form {er_form!r}")
    if radii is None:
        rho_list = list(config.ir_error_radii)
        ups_list = list(config.er_error_radii)
    else:
        rho_list, ups_list = list(radii[0]), list(radii[1])
    if beta_min is None:
        beta_min = [0.0] * config.n_er
    if len(beta_min) != config.n_er:
        raise ValueError("beta_min length must equal the number of harvesters")

    k_users, j_ers, n_tx = config.n_ir, config.n_er, config.n_tx
    w_names = tuple(f"w_{i}" for i in range(k_users))

    h_scales = [float(np.linalg.norm(h)) for h in estimates.ir_estimates]
    g_scales = [float(np.linalg.norm(g)) for g in estimates.er_estimates]
    if min(h_scales) <= 0.0 or min(g_scales) <= 0.0:
        raise ValueError("channel estimates must be nonzero")
    normalized = ChannelSet(
        ir_estimates=tuple(h / c for h, c in zip(estimates.ir_estimates, h_scales)),
        er_estimates=tuple(g / c for g, c in zip(estimates.er_estimates, g_scales)),
    )

    rank_one_dirs = rank_one_dirs or {}

    def cov_coef(name: str, scale: float):
        # Coefficient of covariance `name` inside a matrix equality: a plain
        # float when it is a matrix variable, the scaled outer product when
        # the covariance is pinned to a fixed beam direction.
        if name in rank_one_dirs:
            u = np.asarray(rank_one_dirs[name], dtype=complex)
            return scale * np.outer(u, u.conj())
        return scale

    scalar_vars = [ScalarVar("margin")]
    scalar_vars += [
        ScalarVar(f"delta_{k}", nonneg=True)
        for k in range(k_users)
        if rho_list[k] > 0.0 or force_robust_blocks
    ]
    matrix_vars = []
    for name in w_names:
        if name in rank_one_dirs:
            scalar_vars.append(ScalarVar(f"pow::{name}", nonneg=True))
        else:
            matrix_vars.append(MatrixVar(name, n_tx))
    if isotropic_energy:
        scalar_vars.append(ScalarVar("p_e", nonneg=True))
    elif "w_e" in rank_one_dirs:
        scalar_vars.append(ScalarVar("pow::w_e", nonneg=True))
    else:
        matrix_vars.append(MatrixVar("w_e", n_tx))

    def cov_key(name: str) -> str:
        return f"pow::{name}" if name in rank_one_dirs else name

    # Intermediate variables: the per-user SINR map and the total transmit
    # covariance.  Every cone then touches one small column group, instead
    # of all covariance parameters at once, which keeps the interior-point
    # KKT factorization sparse.
    equalities: list[MatrixEquality] = []
    matrix_vars.append(MatrixVar("s_tot", n_tx, psd=False))
    s_coefs: dict = {"s_tot": 1.0}
    for name in w_names:
        s_coefs[cov_key(name)] = cov_coef(name, -1.0)
    if isotropic_energy:
        s_coefs["p_e"] = -np.eye(n_tx) / n_tx
    else:
        s_coefs[cov_key("w_e")] = cov_coef("w_e", -1.0)
    equalities.append(MatrixEquality("def_s_tot", n_tx, s_coefs))
    for k in range(k_users):
        matrix_vars.append(MatrixVar(f"m_{k}", n_tx, psd=False))
        m_coefs: dict = {
            f"m_{k}": 1.0,
            cov_key(w_names[k]): cov_coef(w_names[k], -1.0 / config.sinr_targets[k]),
        }
        for i in range(k_users):
            if i != k:
                m_coefs[cov_key(w_names[i])] = cov_coef(w_names[i], 1.0)
        equalities.append(MatrixEquality(f"def_m_{k}", n_tx, m_coefs))

    blocks: list[LmiBlock] = []
    rows: list[LinearRow] = [LinearRow("power_budget", "<=", config.p_max, {"s_tot": np.eye(n_tx)})]

    for k in range(k_users):
        h_n = normalized.ir_estimates[k]
        gamma_k = config.sinr_targets[k]
        noise_n = config.noise_power / h_scales[k] ** 2
        if rho_list[k] > 0.0 or force_robust_blocks:
            blk = build_c2_lmi(
                k, normalized, rho_list[k] / h_scales[k], gamma_k, noise_n, w_names=w_names
            )
            # Route the covariance dependence through the map variable.
            u = np.hstack([np.eye(n_tx, dtype=complex), h_n[:, None]])
            terms = tuple(t for t in blk.terms if isinstance(t, ScalarTerm))
            terms += (CongruenceTerm(f"m_{k}", u),)
            blocks.append(replace(blk, terms=terms))
        else:
            # Perfect IR channel knowledge: the nominal SINR row is exact.
            h_gram = np.outer(h_n, h_n.conj())
            rows.append(LinearRow(f"c2_{k}", "<=", -noise_n, {f"m_{k}": -h_gram}))

    # Per-harvester requirement: worst-case received power >= beta_min_j + margin,
    # stated in the block's normalized power unit (hence the 1/scale^2 factors).
    for j in range(j_ers):
        c2_scale = g_scales[j] ** 2
        ups_n = ups_list[j] / g_scales[j]
        if ups_list[j] == 0.0 and not force_robust_blocks:
            g_n = normalized.er_estimates[j]
            gram = g_n @ g_n.conj().T
            rows.append(
                LinearRow(
                    f"c5r_{j}",
                    "<=",
                    -beta_min[j] / c2_scale,
                    {"s_tot": -gram, "margin": 1.0 / c2_scale},
                )
            )
        elif er_form == "compact":
            scalar_vars.append(ScalarVar(f"mu_{j}", nonneg=True))
            matrix_vars.append(MatrixVar(f"t_{j}", config.n_rx, psd=False))
            block, sigma, tr_r = build_c5_compact(
                j, normalized, ups_n, ("s_tot",), None, None, f"mu_{j}", f"t_{j}"
            )
            blocks.append(block)
            rows.append(
                LinearRow(
                    f"c5r_{j}",
                    "<=",
                    -beta_min[j] / c2_scale,
                    {"margin": 1.0 / c2_scale, f"mu_{j}": -(tr_r - ups_n**2), f"t_{j}": sigma},
                )
            )
        else:
            scalar_vars.append(ScalarVar(f"nu_{j}", nonneg=True))
            blk = build_c5_lmi(
                j,
                normalized,
                ups_n,
                w_names=("s_tot",),
                we_name=None,
                beta_name="margin",
            )
            terms = tuple(
                replace(t, coef=t.coef / c2_scale)
                if isinstance(t, ScalarTerm) and t.var == "margin"
                else t
                for t in blk.terms
            )
            blocks.append(
                replace(
                    blk,
                    const=blk.const - (beta_min[j] / c2_scale) * _corner(blk.dim),
                    terms=terms,
                )
            )

    return ConicProblem(
        scalar_vars=tuple(scalar_vars),
        matrix_vars=tuple(matrix_vars),
        blocks=tuple(blocks),
        rows=tuple(rows),
        objective={"margin": 1.0},
        maximize=True,
        matrix_equalities=tuple(equalities),
        metadata={
            "ir_scales": h_scales,
            "er_scales": g_scales,
            "isotropic_energy": isotropic_energy,
            "er_form": er_form,
            "rank_one_dirs": dict(rank_one_dirs),
            "certificate_grade": not rank_one_dirs
            and (
                force_robust_blocks
                or (er_form == "lifted" and min(rho_list) > 0.0 and min(ups_list) > 0.0)
            ),
        },
    )


def feasibility_constants(
    problem: ConicProblem, config: SystemConfig, beta_min: list[float]
) -> ConicProblem:
    """Re-target an assembled feasibility problem at new ``beta_min`` levels."""
    g_scales = problem.metadata["er_scales"]
    block_names = {b.name for b in problem.blocks}
    new_consts = {}
    new_rhs = {}
    for j in range(config.n_er):
        target = -(beta_min[j] / g_scales[j] ** 2)
        if f"c5_{j}" in block_names:
            blk = next(b for b in problem.blocks if b.name == f"c5_{j}")
            new_consts[blk.name] = target * _corner(blk.dim)
        else:
            new_rhs[f"c5r_{j}"] = target
    return problem.retarget(new_consts, new_rhs)


def dump_problem(problem: ConicProblem, fh) -> None:
    """Self-describing sparse text dump for cross-checking with other tools.

    One line per nonzero complex coefficient:
    ``kind block var row col re im``; constants use var ``const``; linear
    rows and the objective are emitted with block ``-``.
    """
    print("# swiptbeam conic problem dump", file=fh)
    print("# kind block var row col re im", file=fh)
    for name, coef in sorted(problem.objective.items()):
        if np.isscalar(coef):
            print(f"obj - {name} 0 0 {float(coef)!r} 0.0", file=fh)
        else:
            c = np.asarray(coef, dtype=complex)
            for (i, j), v in np.ndenumerate(c):
                if v != 0:
                    print(f"obj - {name} {i} {j} {float(v.real)!r} {float(v.imag)!r}", file=fh)
    for row in problem.rows:
        for var, coef in sorted(row.coefs.items()):
            if np.isscalar(coef):
                print(f"row {row.name} {var} 0 0 {float(coef)!r} 0.0", file=fh)
            else:
                c = np.asarray(coef, dtype=complex)
                for (i, j), v in np.ndenumerate(c):
                    if v != 0:
                        print(f"row {row.name} {var} {i} {j} {float(v.real)!r} {float(v.imag)!r}", file=fh)
        print(f"rhs {row.name} - 0 0 {row.rhs!r} 0.0 # sense {row.sense}", file=fh)
    for blk in problem.blocks:
        for (i, j), v in np.ndenumerate(blk.const):
            if v != 0:
                print(f"blk {blk.name} const {i} {j} {float(v.real)!r} {float(v.imag)!r}", file=fh)
        for t in blk.terms:
            if isinstance(t, ScalarTerm):
                for (i, j), v in np.ndenumerate(np.asarray(t.coef, dtype=complex)):
                    if v != 0:
                        print(f"blk {blk.name} {t.var} {i} {j} {float(v.real)!r} {float(v.imag)!r}", file=fh)
            else:
                n = t.left.shape[0] // t.copies
                basis = _herm_basis(n)
                for p in range(n * n):
                    left = t.left.reshape(t.copies, n, blk.dim)
                    contrib = t.scale * np.einsum(
                        "rni,nm,rmj->ij", left.conj(), basis[p], left
                    )
                    for (i, j), v in np.ndenumerate(contrib):
                        if abs(v) > 0:
                            print(
                                f"blk {blk.name} {t.var}[{p}] {i} {j} {float(v.real)!r} {float(v.imag)!r}",
                                file=fh,
                            )
