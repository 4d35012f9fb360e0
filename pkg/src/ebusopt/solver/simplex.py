"""Bounded-variable primal revised simplex.

Rows become equalities with one slack each (bounds encode the sense). An
artificial column is added only for rows whose slack cannot start feasible;
phase one minimizes their sum. The basis inverse is an LU of the starting
basis (dense for small bases, sparse otherwise) followed by product-form
eta updates, refactored every `refactor_every` pivots. Dantzig pricing switches to Bland's rule after a
stall and back once the objective moves again.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .model import INF, LinearModel, SolveResult, SolverError, Status

AT_LOWER, AT_UPPER, FREE_ZERO, BASIC = 0, 1, 2, -1
_DENSE_MAX = 300
_DENSE_CELLS = 400_000  # small problems keep a dense copy of the columns; sparse overhead dominates there


@dataclass
class SimplexOptions:
    feas_tol: float = 1e-6
    opt_tol: float = 1e-9
    pivot_tol: float = 1e-9
    refactor_every: int = 100
    stall_window: int = 50
    max_iter: int | None = None


class _Basis:
    def __init__(self, cols: sp.csc_matrix, basis: np.ndarray, dense: np.ndarray | None = None):
        self.cols = cols
        self.dense = dense
        self.m = cols.shape[0]
        self.refactor(basis)

    def refactor(self, basis: np.ndarray) -> None:
        self.etas: list[tuple[int, np.ndarray]] = []
        if not self.m:
            return
        if self.dense is not None:
            self.lu = la.lu_factor(self.dense[:, basis], check_finite=False)
            self.sparse = None
        elif self.m <= _DENSE_MAX:
            self.lu = la.lu_factor(self.cols[:, basis].toarray(), check_finite=False)
            self.sparse = None
        else:
            # splu raises on an exactly singular basis, like lu_factor warns
            self.sparse = spla.splu(self.cols[:, basis].tocsc(), permc_spec="COLAMD")

    def _solve(self, a: np.ndarray, trans: int) -> np.ndarray:
        if self.sparse is not None:
            return self.sparse.solve(a, trans="T" if trans else "N")
        return la.lu_solve(self.lu, a, trans=trans, check_finite=False)

    def ftran(self, a: np.ndarray) -> np.ndarray:
        v = self._solve(a, 0) if self.m else a.copy()
        for r, alpha in self.etas:
            vr = v[r] / alpha[r]
            if vr != 0.0:
                v -= alpha * vr
            v[r] = vr
        return v

    def btran(self, cb: np.ndarray) -> np.ndarray:
        u = cb.astype(float, copy=True)
        for r, alpha in reversed(self.etas):
            u[r] = (u[r] - (u @ alpha - u[r] * alpha[r])) / alpha[r]
        return self._solve(u, 1) if self.m else u

    def update(self, r: int, alpha: np.ndarray) -> None:
        self.etas.append((r, alpha.copy()))


def _column(cols: sp.csc_matrix, j: int, m: int) -> np.ndarray:
    out = np.zeros(m)
    lo, hi = cols.indptr[j], cols.indptr[j + 1]
    out[cols.indices[lo:hi]] = cols.data[lo:hi]
    return out


def lp_solve(model: LinearModel, options: SimplexOptions | None = None,
             lb: np.ndarray | None = None, ub: np.ndarray | None = None,
             warm: tuple | None = None) -> SolveResult:
    """Solve the LP relaxation of model (integrality flags are ignored).

    lb/ub override the model's variable bounds (used by branch and bound).
    warm is the `basis` of an earlier result on the same rows and costs; the
    solve then starts with dual simplex from that basis.
    """
    opt = options or SimplexOptions()
    c, A, (rlo, rhi), vlb, vub, _ = model.arrays()
    if lb is not None:
        vlb = np.asarray(lb, dtype=float)
    if ub is not None:
        vub = np.asarray(ub, dtype=float)
    n, m = model.num_vars, model.num_rows
    if vlb.shape != (n,) or vub.shape != (n,) or A.shape != (m, n):
        raise SolverError("dimension mismatch between bounds, matrix and objective")
    if np.any(vlb > vub + opt.feas_tol):
        return SolveResult(Status.INFEASIBLE)
    vub = np.maximum(vub, vlb)
    solver = _Solver(c, A, rlo, rhi, vlb, vub, opt, model.offset)
    if warm is not None:
        res = solver.run_warm(warm)
        if res is not None:
            return res
        solver = _Solver(c, A, rlo, rhi, vlb, vub, opt, model.offset)
    return solver.run()


class _Solver:
    def __init__(self, c, A, rlo, rhi, vlb, vub, opt: SimplexOptions, offset: float):
        self.opt = opt
        self.n, self.m = A.shape[1], A.shape[0]
        self.offset = offset
        n, m = self.n, self.m
        # a.x + s = rhs with s = rhs - a.x; the slack bounds carry the row sense
        has_hi, has_lo = np.isfinite(rhi), np.isfinite(rlo)
        rhs = np.where(has_hi, rhi, np.where(has_lo, rlo, 0.0))
        slo = np.where(has_hi, 0.0, -INF)
        shi = np.where(has_hi, np.where(has_lo, rhi - rlo, INF), np.where(has_lo, 0.0, INF))
        self.rhs = rhs
        self.lo = np.concatenate([vlb, slo])
        self.hi = np.concatenate([vub, shi])
        self.cost = np.concatenate([c, np.zeros(m)])
        self.cols = sp.hstack([A.tocsc(), sp.identity(m, format="csc")], format="csc")

    # -- column access (dense copy for small problems) --------------------
    def _prepare(self) -> None:
        self.colsT = self.cols.T.tocsr()
        rows, cols = self.cols.shape
        self.dense = self.cols.toarray() if rows * cols <= _DENSE_CELLS else None
        self.denseT = self.dense.T if self.dense is not None else None

    def _col(self, j: int) -> np.ndarray:
        if self.dense is not None:
            return self.dense[:, j].copy()
        return _column(self.cols, j, self.m)

    def _rmul(self, y: np.ndarray) -> np.ndarray:
        """cols^T y"""
        return self.denseT @ y if self.dense is not None else self.colsT @ y

    def _factor(self, basis: np.ndarray) -> _Basis:
        return _Basis(self.cols, basis, self.dense)

    # ------------------------------------------------------------------
    def _initial(self):
        n, m = self.n, self.m
        lo, hi = self.lo, self.hi
        N = n + m
        x = np.zeros(N)
        status = np.full(N, AT_LOWER, dtype=np.int8)
        finite_lo, finite_hi = np.isfinite(lo), np.isfinite(hi)
        x[:n] = np.where(finite_lo[:n], lo[:n], np.where(finite_hi[:n], hi[:n], 0.0))
        status[:n] = np.where(finite_lo[:n], AT_LOWER, np.where(finite_hi[:n], AT_UPPER, FREE_ZERO))
        resid = self.rhs - self.cols[:, :n] @ x[:n]
        slack_lo, slack_hi = lo[n:], hi[n:]
        tol = self.opt.feas_tol
        ok = (resid >= slack_lo - tol) & (resid <= slack_hi + tol)
        basis = np.arange(n, n + m)
        x[n:] = np.clip(resid, slack_lo, slack_hi)
        status[n:] = BASIC
        art_rows = np.nonzero(~ok)[0]
        if art_rows.size:
            # slack for those rows sits at its nearest bound, an artificial carries the rest
            sval = np.clip(resid[art_rows], slack_lo[art_rows], slack_hi[art_rows])
            sval = np.where(np.isfinite(sval), sval, 0.0)
            x[n + art_rows] = sval
            status[n + art_rows] = np.where(sval == slack_lo[art_rows], AT_LOWER, AT_UPPER)
            r = resid[art_rows] - sval
            sign = np.where(r >= 0, 1.0, -1.0)
            k = art_rows.size
            art = sp.csc_matrix((sign, (art_rows, np.arange(k))), shape=(m, k))
            self.cols = sp.hstack([self.cols, art], format="csc")
            self.lo = np.concatenate([self.lo, np.zeros(k)])
            self.hi = np.concatenate([self.hi, np.full(k, INF)])
            self.cost = np.concatenate([self.cost, np.zeros(k)])
            x = np.concatenate([x, np.abs(r)])
            status = np.concatenate([status, np.full(k, BASIC, dtype=np.int8)])
            basis[art_rows] = N + np.arange(k)
        self.n_art = art_rows.size
        self.art_rows = art_rows
        return x, status, basis

    def run(self) -> SolveResult:
        n, m = self.n, self.m
        x, status, basis = self._initial()
        total_cols = self.cols.shape[1]
        max_iter = self.opt.max_iter or (20_000 + 50 * (n + m))
        self._prepare()
        self.iterations = 0
        if self.n_art:
            phase1 = np.zeros(total_cols)
            phase1[n + m:] = 1.0
            state = self._phase(phase1, x, status, basis, max_iter)
            if state == "limit":
                return SolveResult(Status.ITERATION_LIMIT, iterations=self.iterations)
            infeas = float(x[n + m:].sum())
            if infeas > self.opt.feas_tol:
                return SolveResult(Status.INFEASIBLE, iterations=self.iterations)
            self.hi[n + m:] = 0.0
            nonbasic_art = (status[n + m:] != BASIC)
            x[n + m:][nonbasic_art] = 0.0
            status[n + m:][nonbasic_art] = AT_LOWER
        state = self._phase(self.cost, x, status, basis, max_iter)
        if state == "limit":
            return SolveResult(Status.ITERATION_LIMIT, iterations=self.iterations)
        if state == "unbounded":
            return SolveResult(Status.UNBOUNDED, iterations=self.iterations)
        return self._result(x, status, basis)

    def _result(self, x, status, basis) -> SolveResult:
        n, m = self.n, self.m
        xs = x[:n].copy()
        # snap onto bounds where within tolerance
        lo, hi = self.lo[:n], self.hi[:n]
        with np.errstate(invalid="ignore"):
            xs = np.where(np.isfinite(lo) & (np.abs(xs - lo) <= 1e-11 * (1 + np.abs(lo))), lo, xs)
            xs = np.where(np.isfinite(hi) & (np.abs(xs - hi) <= 1e-11 * (1 + np.abs(hi))), hi, xs)
        objective = float(self.cost[:n] @ xs) + self.offset
        return SolveResult(Status.OPTIMAL, objective, xs, iterations=self.iterations,
                           basis=self._export(status, basis))

    def _export(self, status, basis):
        """Basis over structural and slack columns only; artificials map to their row slack."""
        n, m = self.n, self.m
        basis = basis.copy()
        st = status[:n + m].copy()
        for pos in np.nonzero(basis >= n + m)[0]:
            row = self.art_rows[basis[pos] - n - m]
            if st[n + row] == BASIC:
                return None
            basis[pos] = n + row
            st[n + row] = BASIC
        return st, basis

    def run_warm(self, warm) -> SolveResult | None:
        """Dual simplex from a previous basis, then a primal clean-up pass.

        Returns None when the basis does not fit (the caller solves cold).
        """
        n, m = self.n, self.m
        status, basis = warm
        if status.shape != (n + m,) or basis.shape != (m,):
            return None
        status, basis = status.copy(), basis.copy()
        lo, hi = self.lo, self.hi
        x = np.zeros(n + m)
        nb = status != BASIC
        fin_lo, fin_hi = np.isfinite(lo), np.isfinite(hi)
        status[nb & (status == AT_LOWER) & ~fin_lo] = FREE_ZERO
        status[nb & (status == AT_UPPER) & ~fin_hi] = FREE_ZERO
        status[nb & (status == FREE_ZERO) & fin_lo] = AT_LOWER
        status[nb & (status == FREE_ZERO) & ~fin_lo & fin_hi] = AT_UPPER
        x = np.where(status == AT_LOWER, lo, np.where(status == AT_UPPER, hi, 0.0))
        x = np.where(np.isfinite(x), x, 0.0)
        self.n_art = 0
        self.art_rows = np.zeros(0, dtype=np.int64)
        self._prepare()
        self.iterations = 0
        max_iter = self.opt.max_iter or (20_000 + 50 * (n + m))
        try:
            state = self._dual(x, status, basis, max_iter)
        except (np.linalg.LinAlgError, RuntimeError, ValueError):
            return None
        if state == "infeasible":
            return SolveResult(Status.INFEASIBLE, iterations=self.iterations)
        if state != "optimal":
            return None
        state = self._phase(self.cost, x, status, basis, max_iter)
        if state != "optimal":
            return None
        return self._result(x, status, basis)

    def _dual(self, x, status, basis, max_iter) -> str:
        opt = self.opt
        m = self.m
        lo, hi, cost = self.lo, self.hi, self.cost
        fac = self._factor(basis)
        self._recompute_basic(x, status, basis, fac)
        fixed = lo == hi
        tol = opt.pivot_tol
        unit = np.zeros(m)
        while True:
            if not m:
                return "optimal"
            if self.iterations >= max_iter:
                return "limit"
            xb = x[basis]
            below = lo[basis] - xb
            above = xb - hi[basis]
            infeas = np.maximum(below, above)
            r = int(np.argmax(infeas))
            if infeas[r] <= opt.feas_tol:
                if fac.etas:
                    fac.refactor(basis)
                    self._recompute_basic(x, status, basis, fac)
                    xb = x[basis]
                    if np.maximum(lo[basis] - xb, xb - hi[basis]).max() <= opt.feas_tol:
                        return "optimal"
                    continue
                return "optimal"
            increase = below[r] > 0
            y = fac.btran(cost[basis])
            d = cost - self._rmul(y)
            unit[:] = 0.0
            unit[r] = 1.0
            arow = self._rmul(fac.btran(unit))
            sa = arow if increase else -arow
            elig = ((status == AT_LOWER) & (sa < -tol)) | ((status == AT_UPPER) & (sa > tol))
            elig |= (status == FREE_ZERO) & (np.abs(arow) > tol)
            elig &= ~fixed
            cand = np.nonzero(elig)[0]
            if cand.size == 0:
                return "infeasible"
            ratios = np.abs(d[cand]) / np.abs(arow[cand])
            best = ratios.min()
            ties = cand[ratios <= best + 1e-12 * (1.0 + best)]
            q = int(ties[np.argmax(np.abs(arow[ties]))])
            alpha = fac.ftran(self._col(q))
            if abs(alpha[r]) < tol:
                raise RuntimeError("unstable dual pivot")
            target = lo[basis[r]] if increase else hi[basis[r]]
            theta = (xb[r] - target) / alpha[r]
            x[basis] = xb - theta * alpha
            x[q] += theta
            out = int(basis[r])
            x[out] = target
            status[out] = AT_LOWER if increase else AT_UPPER
            basis[r] = q
            status[q] = BASIC
            fac.update(r, alpha)
            self.iterations += 1
            if len(fac.etas) >= opt.refactor_every:
                fac.refactor(basis)
                self._recompute_basic(x, status, basis, fac)

    # ------------------------------------------------------------------
    def _recompute_basic(self, x, status, basis, fac: _Basis):
        nonbasic = status != BASIC
        nb_idx = np.nonzero(nonbasic)[0]
        if self.dense is not None:
            resid = self.rhs - self.dense[:, nb_idx] @ x[nb_idx]
        else:
            resid = self.rhs - self.cols[:, nb_idx] @ x[nb_idx]
        x[basis] = fac.ftran(resid)

    def _phase(self, cost, x, status, basis, max_iter) -> str:
        opt = self.opt
        m = self.m
        lo, hi = self.lo, self.hi
        fac = self._factor(basis)
        self._recompute_basic(x, status, basis, fac)
        fixed = lo == hi
        scale = max(1.0, float(np.abs(cost).max(initial=0.0)))
        dtol = opt.opt_tol * scale
        bland = False
        best_obj = float(cost @ x)
        since_improve = 0
        while True:
            if self.iterations >= max_iter:
                return "limit"
            y = fac.btran(cost[basis])
            d = cost - self._rmul(y)
            elig_lo = (status == AT_LOWER) & (d < -dtol) & ~fixed
            elig_hi = (status == AT_UPPER) & (d > dtol) & ~fixed
            elig_free = (status == FREE_ZERO) & (np.abs(d) > dtol)
            elig = elig_lo | elig_hi | elig_free
            cand = np.nonzero(elig)[0]
            if cand.size == 0:
                if fac.etas:
                    fac.refactor(basis)
                    self._recompute_basic(x, status, basis, fac)
                    y = fac.btran(cost[basis])
                    d = cost - self._rmul(y)
                    elig = (((status == AT_LOWER) & (d < -dtol)) | ((status == AT_UPPER) & (d > dtol))) & ~fixed
                    elig |= (status == FREE_ZERO) & (np.abs(d) > dtol)
                    if not elig.any():
                        return "optimal"
                    continue
                return "optimal"
            if bland:
                q = int(cand[0])
            else:
                q = int(cand[np.argmax(np.abs(d[cand]))])
            direction = 1.0 if d[q] < 0 else -1.0
            alpha = fac.ftran(self._col(q))
            # x_B(theta) = x_B - direction * theta * alpha
            rate = -direction * alpha
            xb = x[basis]
            lob, hib = lo[basis], hi[basis]
            theta = INF
            leave = -1
            with np.errstate(divide="ignore", invalid="ignore"):
                dec = rate < -opt.pivot_tol
                inc = rate > opt.pivot_tol
                ratios = np.full(m, INF)
                ratios[dec] = (xb[dec] - lob[dec]) / -rate[dec]
                ratios[inc] = (hib[inc] - xb[inc]) / rate[inc]
            ratios = np.where(np.isnan(ratios), INF, np.maximum(ratios, 0.0))
            if m:
                tmin = float(ratios.min())
                if math.isfinite(tmin):
                    ties = np.nonzero(ratios <= tmin + 1e-12 * (1.0 + tmin))[0]
                    if bland:
                        leave = int(ties[np.argmin(basis[ties])])
                    else:
                        leave = int(ties[np.argmax(np.abs(alpha[ties]))])
                    theta = float(ratios[leave])
            span = hi[q] - lo[q]
            flip = math.isfinite(span) and span <= theta
            if flip:
                theta = span
            if not math.isfinite(theta):
                return "unbounded"
            self.iterations += 1
            if theta:
                x[basis] = xb + rate * theta
                x[q] += direction * theta
            if flip:
                status[q] = AT_UPPER if direction > 0 else AT_LOWER
                x[q] = hi[q] if direction > 0 else lo[q]
            else:
                out = int(basis[leave])
                if rate[leave] < 0:
                    x[out] = lo[out]
                    status[out] = AT_LOWER if math.isfinite(lo[out]) else FREE_ZERO
                else:
                    x[out] = hi[out]
                    status[out] = AT_UPPER if math.isfinite(hi[out]) else FREE_ZERO
                if not math.isfinite(x[out]):
                    x[out] = 0.0
                basis[leave] = q
                status[q] = BASIC
                fac.update(leave, alpha)
                if len(fac.etas) >= opt.refactor_every:
                    fac.refactor(basis)
                    self._recompute_basic(x, status, basis, fac)
            obj = float(cost @ x)
            if obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
                best_obj = obj
                since_improve = 0
                bland = False
            else:
                since_improve += 1
                if since_improve >= opt.stall_window:
                    bland = True
