"""Sparse linear programs: container, solve contract, and optimality certificates.

Sign convention (normative for the whole package): the dual value of a row is
the derivative of the optimal objective with respect to that row's right-hand
side. A binding ``>=`` row in a minimization therefore carries a nonnegative
dual, and a binding ``<=`` row a nonpositive one.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

SENSE_LE = "L"
SENSE_EQ = "E"
SENSE_GE = "G"
_SENSES = (SENSE_LE, SENSE_EQ, SENSE_GE)

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"


class LpError(Exception):
    pass


class NumericalFailure(LpError):
    """Solver reported success but the certificate (or the solver itself) failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class LinearProgram:
    """Standard-form minimization: c'x s.t. A x (sense) rhs, lb <= x <= ub."""

    c: np.ndarray
    A: sparse.csr_matrix
    senses: np.ndarray  # one of "L", "E", "G" per row
    rhs: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    col_names: list[str] = field(default_factory=list)
    row_names: list[str] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    @property
    def nnz(self) -> int:
        return self.A.nnz

    def validate(self) -> None:
        m, n = self.A.shape
        if not (len(self.c) == n == len(self.lb) == len(self.ub)):
            raise LpError("column arrays inconsistent with matrix width")
        if not (len(self.senses) == m == len(self.rhs)):
            raise LpError("row arrays inconsistent with matrix height")
        if not np.all(np.isfinite(self.c)):
            raise LpError("objective contains NaN/Inf")
        if not np.all(np.isfinite(self.A.data)):
            raise LpError("matrix contains NaN/Inf")
        if np.any(np.isnan(self.rhs)):
            raise LpError("rhs contains NaN")
        bad = ~np.isin(self.senses, _SENSES)
        if np.any(bad):
            raise LpError(f"unknown row sense at rows {np.flatnonzero(bad)[:5]}")
        if np.any((self.senses == SENSE_EQ) & ~np.isfinite(self.rhs)):
            raise LpError("equality row with non-finite rhs")
        if np.any((self.senses == SENSE_LE) & np.isneginf(self.rhs)):
            raise LpError("<= row with -inf rhs is trivially infeasible")
        if np.any((self.senses == SENSE_GE) & np.isposinf(self.rhs)):
            raise LpError(">= row with +inf rhs is trivially infeasible")
        if np.any(self.lb > self.ub):
            raise LpError("lb > ub for some column")
        if self.col_names and len(self.col_names) != n:
            raise LpError("col_names length mismatch")
        if self.row_names and len(self.row_names) != m:
            raise LpError("row_names length mismatch")


class LpBuilder:
    """Incremental COO assembly. Duplicate (row, col) entries are summed."""

    def __init__(self):
        self._obj: list[np.ndarray] = []
        self._lb: list[np.ndarray] = []
        self._ub: list[np.ndarray] = []
        self._senses: list[np.ndarray] = []
        self._rhs: list[np.ndarray] = []
        self._col_names: list[str] = []
        self._row_names: list[str] = []
        self._ncols = 0
        self._nrows = 0
        self._ri: list[np.ndarray] = []
        self._ci: list[np.ndarray] = []
        self._vv: list[np.ndarray] = []

    @property
    def n_cols(self) -> int:
        return self._ncols

    @property
    def n_rows(self) -> int:
        return self._nrows

    def add_cols(self, count, obj=0.0, lb=0.0, ub=np.inf, names=None) -> np.ndarray:
        start = self._ncols
        self._obj.append(np.broadcast_to(np.asarray(obj, dtype=float), (count,)).copy())
        self._lb.append(np.broadcast_to(np.asarray(lb, dtype=float), (count,)).copy())
        self._ub.append(np.broadcast_to(np.asarray(ub, dtype=float), (count,)).copy())
        if names is None:
            names = [f"x{start + i}" for i in range(count)]
        self._col_names.extend(names)
        self._ncols += count
        return np.arange(start, start + count)

    def add_col(self, obj=0.0, lb=0.0, ub=np.inf, name=None) -> int:
        return int(self.add_cols(1, obj, lb, ub, [name] if name else None)[0])

    def add_rows(self, count, sense, rhs, names=None) -> np.ndarray:
        if sense not in _SENSES:
            raise LpError(f"bad sense {sense!r}")
        start = self._nrows
        self._senses.append(np.full(count, sense, dtype="U1"))
        self._rhs.append(np.broadcast_to(np.asarray(rhs, dtype=float), (count,)).copy())
        if names is None:
            names = [f"r{start + i}" for i in range(count)]
        self._row_names.extend(names)
        self._nrows += count
        return np.arange(start, start + count)

    def add_row(self, sense, rhs, coeffs=None, name=None) -> int:
        i = int(self.add_rows(1, sense, rhs, [name] if name else None)[0])
        if coeffs:
            cols, vals = zip(*coeffs)
            self.put(np.full(len(cols), i), np.asarray(cols), np.asarray(vals, dtype=float))
        return i

    def put(self, rows, cols, vals) -> None:
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        rows, cols, vals = np.broadcast_arrays(rows, cols, vals)
        self._ri.append(rows.ravel())
        self._ci.append(cols.ravel())
        self._vv.append(vals.ravel())

    def build(self) -> LinearProgram:
        ri = np.concatenate(self._ri) if self._ri else np.empty(0, dtype=np.int64)
        ci = np.concatenate(self._ci) if self._ci else np.empty(0, dtype=np.int64)
        vv = np.concatenate(self._vv) if self._vv else np.empty(0, dtype=float)
        A = sparse.coo_matrix((vv, (ri, ci)), shape=(self._nrows, self._ncols)).tocsr()
        A.sum_duplicates()
        A.eliminate_zeros()
        lp = LinearProgram(
            c=np.concatenate(self._obj) if self._obj else np.empty(0),
            A=A,
            senses=np.concatenate(self._senses) if self._senses else np.empty(0, dtype="U1"),
            rhs=np.concatenate(self._rhs) if self._rhs else np.empty(0),
            lb=np.concatenate(self._lb) if self._lb else np.empty(0),
            ub=np.concatenate(self._ub) if self._ub else np.empty(0),
            col_names=list(self._col_names),
            row_names=list(self._row_names),
        )
        lp.validate()
        return lp


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-8
    max_iterations: int = 500_000
    scaling: bool = True


@dataclass
class CertificateReport:
    """KKT residuals plus structural degeneracy diagnostics.

    The zero counts are informational: capacity-expansion LPs routinely carry
    hundreds of exact-zero reduced costs at bounds even when every dual of
    interest is stable, so callers needing a trustworthy shadow price should
    cross-check against a finite-difference re-solve instead of thresholding
    these counts.
    """

    max_primal_residual: float
    max_dual_residual: float
    max_complementarity: float
    duality_gap: float
    tol: float
    zero_reduced_cost_at_bound: int
    zero_dual_binding_rows: int
    worst_row: str = ""

    @property
    def passed(self) -> bool:
        return (
            self.max_primal_residual <= self.tol
            and self.max_dual_residual <= self.tol
            and self.max_complementarity <= self.tol
            and self.duality_gap <= self.tol
        )


@dataclass
class Solution:
    status: str
    objective: float = np.nan
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    certificate: CertificateReport | None = None
    iterations: int = 0
    solve_seconds: float = 0.0


def _pow2_equilibrate(lp: LinearProgram, passes: int = 2):
    """Geometric-mean equilibration with power-of-two factors (exactly invertible).

    Entries below 1e-8 of their row/column max are numerical noise and are
    ignored when choosing factors, and factors are clamped to 2**+-20, so one
    junk coefficient cannot blow up the scaling of an otherwise sane row.
    """
    A = lp.A.tocoo()
    m, n = A.shape
    r = np.ones(m)
    s = np.ones(n)
    nz = np.abs(A.data) > 0
    rows, cols, absv = A.row[nz], A.col[nz], np.abs(A.data[nz])
    if not len(absv):
        return r, s

    def factors(idx, size):
        v = absv * r[rows] * s[cols]
        hi = np.zeros(size)
        np.maximum.at(hi, idx, v)
        lo = np.full(size, np.inf)
        meaningful = v >= hi[idx] * 1e-8
        np.minimum.at(lo, idx[meaningful], v[meaningful])
        ok = hi > 0
        fac = np.ones(size)
        fac[ok] = np.exp2(-np.clip(np.round(0.5 * np.log2(hi[ok] * lo[ok])), -20, 20))
        return fac

    for _ in range(passes):
        r *= factors(rows, m)
        s *= factors(cols, n)
    return r, s


def _scaled_copy(lp: LinearProgram, r: np.ndarray, s: np.ndarray) -> LinearProgram:
    A = sparse.diags(r) @ lp.A @ sparse.diags(s)
    return LinearProgram(
        c=lp.c * s,
        A=A.tocsr(),
        senses=lp.senses,
        rhs=lp.rhs * r,
        lb=lp.lb / s,
        ub=lp.ub / s,
        col_names=lp.col_names,
        row_names=lp.row_names,
    )


_STATUS_MAP = {0: OPTIMAL, 1: ITERATION_LIMIT, 2: INFEASIBLE, 3: UNBOUNDED}


def solve(lp: LinearProgram, options: SolverOptions | None = None) -> Solution:
    """Solve to optimality with primal/dual extraction and a verified certificate.

    Backend is the HiGHS dual simplex (sparse, deterministic for identical
    inputs). Optimal solutions are certificate-checked at 1e-6 relative; a
    failed check raises NumericalFailure rather than returning a bad Solution.
    """
    options = options or SolverOptions()
    lp.validate()
    t0 = time.perf_counter()

    work = lp
    r = s = None
    if options.scaling and lp.nnz:
        r, s = _pow2_equilibrate(lp)
        work = _scaled_copy(lp, r, s)

    # rows with an infinite bound are vacuous; drop them and report zero duals
    le = (work.senses == SENSE_LE) & np.isfinite(work.rhs)
    ge = (work.senses == SENSE_GE) & np.isfinite(work.rhs)
    eq = work.senses == SENSE_EQ
    A_ub = b_ub = A_eq = b_eq = None
    if le.any() or ge.any():
        A_ub = sparse.vstack([work.A[le], -work.A[ge]], format="csr")
        b_ub = np.concatenate([work.rhs[le], -work.rhs[ge]])
    if eq.any():
        A_eq = work.A[eq]
        b_eq = work.rhs[eq]

    res = linprog(
        c=work.c,
        A_ub=A_ub,
        b_ub=b_ub,
        A_eq=A_eq,
        b_eq=b_eq,
        bounds=np.column_stack([work.lb, work.ub]),
        method="highs-ds",
        options={
            "presolve": True,
            "maxiter": options.max_iterations,
            "primal_feasibility_tolerance": options.tolerance,
            "dual_feasibility_tolerance": options.tolerance,
        },
    )
    elapsed = time.perf_counter() - t0

    if res.status == 4:
        raise NumericalFailure("solver numerical failure", {"message": res.message})
    status = _STATUS_MAP.get(res.status)
    if status is None:
        raise NumericalFailure(f"unexpected solver status {res.status}", {"message": res.message})
    if status != OPTIMAL:
        return Solution(status=status, iterations=int(getattr(res, "nit", 0)), solve_seconds=elapsed)

    x = np.asarray(res.x, dtype=float)
    y = np.zeros(work.n_rows)
    if A_ub is not None:
        marg = np.asarray(res.ineqlin.marginals, dtype=float)
        n_le = int(le.sum())
        y[le] = marg[:n_le]
        y[ge] = -marg[n_le:]
    if A_eq is not None:
        y[eq] = np.asarray(res.eqlin.marginals, dtype=float)

    if r is not None:
        x = x * s
        y = y * r
    z = lp.c - lp.A.T @ y

    cert = verify_certificate(lp, x, y, tol=1e-6)
    if not cert.passed:
        raise NumericalFailure(
            "optimal solution failed certificate check",
            {
                "primal": cert.max_primal_residual,
                "dual": cert.max_dual_residual,
                "comp": cert.max_complementarity,
                "gap": cert.duality_gap,
                "worst_row": cert.worst_row,
            },
        )
    return Solution(
        status=OPTIMAL,
        objective=float(res.fun),
        x=x,
        duals=y,
        reduced_costs=z,
        certificate=cert,
        iterations=int(getattr(res, "nit", 0)),
        solve_seconds=elapsed,
    )


def verify_certificate(lp: LinearProgram, x: np.ndarray, y: np.ndarray, tol: float = 1e-6) -> CertificateReport:
    """KKT check: primal/dual feasibility, complementary slackness, duality gap.

    All residuals are relative. Also counts the degeneracy hints used by the
    valuation layer (at-bound columns with zero reduced cost, binding rows with
    zero dual).
    """
    Ax = lp.A @ x
    le = lp.senses == SENSE_LE
    ge = lp.senses == SENSE_GE
    eq = lp.senses == SENSE_EQ
    vacuous = (le & np.isposinf(lp.rhs)) | (ge & np.isneginf(lp.rhs))
    rhs = np.where(vacuous, 0.0, lp.rhs)
    slack = rhs - Ax

    row_viol = np.zeros(lp.n_rows)
    row_viol[le] = np.maximum(-slack[le], 0.0)
    row_viol[ge] = np.maximum(slack[ge], 0.0)
    row_viol[eq] = np.abs(slack[eq])
    row_viol[vacuous] = 0.0
    rel_row = row_viol / (1.0 + np.abs(rhs))
    lo_viol = np.where(np.isfinite(lp.lb), np.maximum(lp.lb - x, 0.0) / (1.0 + np.abs(lp.lb)), 0.0)
    hi_viol = np.where(np.isfinite(lp.ub), np.maximum(x - lp.ub, 0.0) / (1.0 + np.abs(lp.ub)), 0.0)
    max_primal = max(rel_row.max(initial=0.0), lo_viol.max(initial=0.0), hi_viol.max(initial=0.0))
    worst_row = ""
    if lp.n_rows and rel_row.max(initial=0.0) >= max_primal and rel_row.max(initial=0.0) > 0:
        i = int(np.argmax(rel_row))
        worst_row = lp.row_names[i] if lp.row_names else f"row{i}"

    z = lp.c - lp.A.T @ y
    cscale = 1.0 + (np.abs(lp.c).max() if lp.n_cols else 0.0)
    sign_viol = np.zeros(lp.n_rows)
    sign_viol[le] = np.maximum(y[le], 0.0)
    sign_viol[ge] = np.maximum(-y[ge], 0.0)
    sign_viol[vacuous] = np.abs(y[vacuous])  # a vacuous row must carry a zero dual
    yscale = 1.0 + (np.abs(y).max() if lp.n_rows else 0.0)
    z_viol = np.zeros(lp.n_cols)
    no_lb = ~np.isfinite(lp.lb)
    no_ub = ~np.isfinite(lp.ub)
    z_viol[no_lb] = np.maximum(z[no_lb], 0.0)
    z_viol[no_ub] = np.maximum(z_viol[no_ub], np.maximum(-z[no_ub], 0.0))
    max_dual = max(
        (sign_viol / yscale).max(initial=0.0),
        (z_viol / cscale).max(initial=0.0),
    )

    obj = float(lp.c @ x)
    oscale = 1.0 + abs(obj)
    comp_rows = np.abs(y * slack)
    comp_rows[eq] = 0.0
    zl = np.zeros(lp.n_cols)
    zu = np.zeros(lp.n_cols)
    ml = (z > 0) & np.isfinite(lp.lb)
    mu = (z < 0) & np.isfinite(lp.ub)
    zl[ml] = z[ml] * (x[ml] - lp.lb[ml])
    zu[mu] = -z[mu] * (lp.ub[mu] - x[mu])
    max_comp = max(comp_rows.max(initial=0.0), np.abs(zl).max(initial=0.0), np.abs(zu).max(initial=0.0)) / oscale

    dual_obj = float(y @ rhs)
    pos = (z > 0) & np.isfinite(lp.lb)
    neg = (z < 0) & np.isfinite(lp.ub)
    dual_obj += float(z[pos] @ lp.lb[pos]) + float(z[neg] @ lp.ub[neg])
    gap = abs(obj - dual_obj) / oscale

    at_lb = np.isfinite(lp.lb) & (np.abs(x - lp.lb) <= 1e-7 * (1 + np.abs(lp.lb)))
    at_ub = np.isfinite(lp.ub) & (np.abs(x - lp.ub) <= 1e-7 * (1 + np.abs(lp.ub)))
    fixed = np.isfinite(lp.lb) & np.isfinite(lp.ub) & (lp.ub - lp.lb <= 0)
    zrc = int(np.count_nonzero((at_lb | at_ub) & ~fixed & (np.abs(z) <= 1e-9 * cscale)))
    ineq = (le | ge) & ~vacuous
    binding = ineq & (np.abs(slack) <= 1e-7 * (1 + np.abs(rhs)))
    zdb = int(np.count_nonzero(binding & (np.abs(y) <= 1e-9 * yscale)))

    return CertificateReport(
        max_primal_residual=float(max_primal),
        max_dual_residual=float(max_dual),
        max_complementarity=float(max_comp),
        duality_gap=float(gap),
        tol=tol,
        zero_reduced_cost_at_bound=zrc,
        zero_dual_binding_rows=zdb,
        worst_row=worst_row,
    )
