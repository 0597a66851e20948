"""Operator-splitting solver for box-and-row constrained QPs and LPs.

Solves  min 0.5 x'diag(d)x + q'x  s.t.  A_eq x = b,  A_in x <= f,  lo <= x <= hi
by ADMM on the splitting between the row subspace and the box (the OSQP
scheme): rows and boxes are stacked into one two-sided constraint l <= Ax <= u,
each iteration solves a cached quasi-definite KKT system and projects onto
[l, u]. The KKT factorization is reused across solves as long as the matrices
are unchanged, so re-solving after a linear-term or bound update is cheap;
that is the warm-start path used by the outer ADMM and by branch-and-bound.

A final polish step solves the KKT system of the identified active set and is
accepted only when it does not worsen the residuals, which typically yields
solutions accurate to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.optimize import nnls

__all__ = ["QpProblem", "QpSolution", "QpStatus", "QpHandle", "solve_qp", "solve_lp", "warm_start"]

_INF = 1e30
_RUIZ_ITERS = 10
_RHO_EQ_FACTOR = 1e3
_RHO_MIN, _RHO_MAX = 1e-6, 1e6
_POLISH_N_CAP = 600


class QpStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class QpProblem:
    """Convex diagonal-Hessian QP (zero Hessian = LP). All bounds finite."""

    n: int
    quad_diag: np.ndarray
    linear: np.ndarray
    a_eq: sp.csr_matrix | None = None
    b_eq: np.ndarray | None = None
    a_in: sp.csr_matrix | None = None
    f_in: np.ndarray | None = None
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "quad_diag", np.asarray(self.quad_diag, dtype=float))
        object.__setattr__(self, "linear", np.asarray(self.linear, dtype=float))
        if self.quad_diag.shape != (self.n,) or self.linear.shape != (self.n,):
            raise ValueError("quad_diag/linear length mismatch")
        if np.any(self.quad_diag < 0):
            raise ValueError("quad_diag must be nonnegative")
        lo = np.zeros(self.n) if self.lo is None else np.asarray(self.lo, dtype=float)
        hi = np.ones(self.n) if self.hi is None else np.asarray(self.hi, dtype=float)
        if lo.shape != (self.n,) or hi.shape != (self.n,):
            raise ValueError("bounds length mismatch")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("bounds must be finite")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.b_eq is not None:
            object.__setattr__(self, "b_eq", np.asarray(self.b_eq, dtype=float))
        if self.f_in is not None:
            object.__setattr__(self, "f_in", np.asarray(self.f_in, dtype=float))

    @property
    def m_eq(self) -> int:
        return 0 if self.a_eq is None else self.a_eq.shape[0]

    @property
    def m_in(self) -> int:
        return 0 if self.a_in is None else self.a_in.shape[0]


@dataclass
class QpSolution:
    x: np.ndarray
    status: QpStatus
    primal_res: float
    dual_res: float
    objective: float
    iterations: int
    y_rows: np.ndarray = field(default_factory=lambda: np.zeros(0))  # eq then ineq duals
    y_box: np.ndarray = field(default_factory=lambda: np.zeros(0))
    polished: bool = False


def _axis_abs_max(mat: sp.spmatrix, axis: int, size: int) -> np.ndarray:
    out = np.zeros(size)
    coo = mat.tocoo()
    if coo.nnz:
        np.maximum.at(out, coo.col if axis == 0 else coo.row, np.abs(coo.data))
    return out


class QpHandle:
    """Reusable solver state: scaling, stacked data, cached KKT factorization."""

    def __init__(self, problem: QpProblem, tol_p: float = 1e-8, tol_d: float = 1e-8,
                 max_iter: int = 20000, sigma: float = 1e-6, alpha: float = 1.6,
                 polish: bool = True, reuse_active_set: bool = False):
        self.tol_p = tol_p
        self.tol_d = tol_d
        self.max_iter = max_iter
        self.sigma = sigma
        self.alpha = alpha
        self.polish = polish
        # sequences of near-identical solves (the consensus x-update) resolve
        # in one linear solve when the previous active set still verifies
        self.reuse_active_set = reuse_active_set
        self._act_cache = None  # (act_lo, act_hi, rows, lu)
        self.factorizations = 0
        self.total_iterations = 0

        n = self.n = problem.n
        self.P_diag = problem.quad_diag.copy()
        self.q = problem.linear.copy()
        self.m_eq = problem.m_eq
        self.m_in = problem.m_in
        blocks = [m for m in (problem.a_eq, problem.a_in) if m is not None and m.shape[0]]
        blocks.append(sp.eye(n, format="csr"))
        self.A = sp.vstack(blocks, format="csr")
        self.m = self.A.shape[0]
        l = np.full(self.m, -_INF)
        u = np.full(self.m, _INF)
        if self.m_eq:
            l[: self.m_eq] = problem.b_eq
            u[: self.m_eq] = problem.b_eq
        if self.m_in:
            u[self.m_eq : self.m_eq + self.m_in] = problem.f_in
        l[self.m_eq + self.m_in :] = problem.lo
        u[self.m_eq + self.m_in :] = problem.hi
        self.l, self.u = l, u

        self._equilibrate()
        self._rho_base = 0.1
        self._build_rho()
        self._factorize()
        self.x = np.zeros(n)
        self.y = np.zeros(self.m)  # scaled duals
        self.z = np.clip(np.zeros(self.m), self.ls, self.us)

    # -- scaling -----------------------------------------------------------

    def _equilibrate(self):
        """Ruiz equilibration of the stacked constraint matrix plus cost scaling."""
        n, m = self.n, self.m
        d = np.ones(n)
        e = np.ones(m)
        p = self.P_diag.copy()
        a = self.A.copy()
        for _ in range(_RUIZ_ITERS):
            col = np.maximum(np.abs(p), _axis_abs_max(a, axis=0, size=n))
            dx = 1.0 / np.sqrt(np.maximum(col, 1e-8))
            row = _axis_abs_max(a, axis=1, size=m)
            de = 1.0 / np.sqrt(np.maximum(row, 1e-8))
            a = sp.diags(de) @ a @ sp.diags(dx)
            p = p * dx * dx
            d *= dx
            e *= de
        q = self.q * d
        p_mean = float(np.mean(np.abs(p))) if n else 0.0
        gamma = 1.0 / max(p_mean, float(np.max(np.abs(q), initial=0.0)), 1e-8)
        self.d_scale, self.e_scale, self.c_scale = d, e, gamma
        self.Ps = p * gamma
        self.As = a.tocsr()
        self._rescale_q()
        self._rescale_bounds()

    def _rescale_q(self):
        self.qs = self.q * self.d_scale * self.c_scale

    def _rescale_bounds(self):
        self.ls = np.where(self.l <= -_INF, -_INF, self.l * self.e_scale)
        self.us = np.where(self.u >= _INF, _INF, self.u * self.e_scale)

    def _build_rho(self):
        rho = np.full(self.m, self._rho_base)
        eq = (self.ls > -_INF) & (np.abs(self.us - self.ls) < 1e-14)
        rho[eq] = self._rho_base * _RHO_EQ_FACTOR
        self.rho = np.clip(rho, _RHO_MIN, _RHO_MAX)

    def _factorize(self):
        kkt = sp.bmat(
            [
                [sp.diags(self.Ps + self.sigma), self.As.T],
                [self.As, sp.diags(-1.0 / self.rho)],
            ],
            format="csc",
        )
        self._lu = spla.splu(kkt)
        self.factorizations += 1

    # -- cheap updates -------------------------------------------------------

    def update_linear(self, linear: np.ndarray):
        """Replace the linear cost; keeps the cached factorization."""
        linear = np.asarray(linear, dtype=float)
        if linear.shape != (self.n,):
            raise ValueError("linear term length mismatch")
        self.q = linear.copy()
        self._rescale_q()

    def update_row_bounds(self, b_eq: np.ndarray | None = None, f_in: np.ndarray | None = None):
        """Replace equality right-hand sides and/or inequality caps (matrix untouched)."""
        if b_eq is not None:
            b_eq = np.asarray(b_eq, dtype=float)
            if b_eq.shape != (self.m_eq,):
                raise ValueError("b_eq length mismatch")
            self.l[: self.m_eq] = b_eq
            self.u[: self.m_eq] = b_eq
        if f_in is not None:
            f_in = np.asarray(f_in, dtype=float)
            if f_in.shape != (self.m_in,):
                raise ValueError("f_in length mismatch")
            self.u[self.m_eq : self.m_eq + self.m_in] = f_in
        self._rescale_bounds()
        self.z = np.clip(self.As @ self.x, self.ls, self.us)

    def update_var_bounds(self, lo: np.ndarray, hi: np.ndarray):
        """Replace variable boxes (rows untouched).

        The stored iterate is re-projected and the duals of changed rows reset
        so a warm solve starts from a state consistent with the new box. The
        factorization is rebuilt only when the set of fixed variables
        (lo == hi) changes, because those rows need the equality-level penalty.
        """
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != (self.n,) or hi.shape != (self.n,):
            raise ValueError("bounds length mismatch")
        base = self.m_eq + self.m_in
        changed = (self.l[base:] != lo) | (self.u[base:] != hi)
        eq_before = np.abs(self.us - self.ls) < 1e-14
        self.l[base:] = lo
        self.u[base:] = hi
        self._rescale_bounds()
        self.y[base:][changed] = 0.0
        self.z = np.clip(self.As @ self.x, self.ls, self.us)
        eq_after = np.abs(self.us - self.ls) < 1e-14
        if not np.array_equal(eq_before, eq_after):
            self._build_rho()
            self._factorize()

    def warm_start(self, x0: np.ndarray | None = None, y0: np.ndarray | None = None):
        if x0 is not None:
            self.x = np.asarray(x0, dtype=float) / self.d_scale
            self.z = np.clip(self.As @ self.x, self.ls, self.us)
        if y0 is not None:
            self.y = np.asarray(y0, dtype=float) * self.c_scale / self.e_scale

    # -- residuals (unscaled) --------------------------------------------------

    def _unscaled(self):
        x = self.x * self.d_scale
        y = self.y * self.e_scale / self.c_scale
        z = self.z / self.e_scale
        return x, y, z

    def _residuals(self, x, y, z):
        ax = self.A @ x
        r_p = float(np.max(np.abs(ax - z), initial=0.0))
        p_scale = max(np.max(np.abs(ax), initial=0.0), np.max(np.abs(z), initial=0.0))
        px = self.P_diag * x
        aty = self.A.T @ y
        r_d = float(np.max(np.abs(px + self.q + aty), initial=0.0))
        d_scale = max(
            np.max(np.abs(px), initial=0.0),
            np.max(np.abs(aty), initial=0.0),
            np.max(np.abs(self.q), initial=0.0),
        )
        return r_p, p_scale, r_d, d_scale

    def _primal_infeasible(self, dy_scaled: np.ndarray) -> bool:
        """Certificate test on an accumulated dual direction (scaled space)."""
        dy = dy_scaled * self.e_scale  # unscaled direction up to the positive cost factor
        norm = np.max(np.abs(dy), initial=0.0)
        if norm < 1e-14:
            return False
        dy = dy / norm
        eps = 1e-6
        if np.any((dy > eps) & (self.u >= _INF)) or np.any((dy < -eps) & (self.l <= -_INF)):
            return False
        col_scale = 1.0 + _axis_abs_max(self.A, axis=0, size=self.n)
        if np.max(np.abs(self.A.T @ dy) / col_scale, initial=0.0) > eps:
            return False
        up = np.where((dy > eps) & (self.u < _INF), self.u * dy, 0.0)
        dn = np.where((dy < -eps) & (self.l > -_INF), self.l * dy, 0.0)
        bound_sc = 1.0 + max(
            np.max(np.abs(self.l[self.l > -_INF]), initial=0.0),
            np.max(np.abs(self.u[self.u < _INF]), initial=0.0),
        )
        return float(np.sum(up) + np.sum(dn)) < -eps * bound_sc

    # -- main loop ----------------------------------------------------------------

    def _try_cached_active_set(self) -> QpSolution | None:
        """Direct solve on the cached active set, fully verified against KKT."""
        if self._act_cache is None:
            return None
        act_lo, act_hi, rows, lu = self._act_cache
        if rows.size == 0:
            if not np.all(self.P_diag > 0):
                return None
            x_p = -self.q / self.P_diag
            y_p = np.zeros(self.m)
        else:
            b_act = np.where(act_lo[rows], self.l[rows], self.u[rows])
            rhs = np.concatenate([-self.q, b_act])
            vec = lu.solve(rhs)
            a_red = self.A[rows]
            vec = vec + lu.solve(rhs - self._kkt_apply(vec, a_red))
            if not np.all(np.isfinite(vec)):
                return None
            x_p = vec[: self.n]
            y_p = np.zeros(self.m)
            y_p[rows] = vec[self.n :]
        ax = self.A @ x_p
        z_p = np.clip(ax, self.l, self.u)
        r_p, p_sc, r_d, d_sc = self._residuals(x_p, y_p, z_p)
        if r_p > self.tol_p * (1 + p_sc) or r_d > self.tol_d * (1 + d_sc):
            return None
        tol_y = 1e-7 * (1.0 + np.max(np.abs(y_p), initial=0.0))
        free = np.arange(self.m) >= self.m_eq
        if np.any(y_p[act_lo & free] > tol_y) or np.any(y_p[act_hi] < -tol_y):
            return None
        viol = 1e-7 * (1.0 + np.max(np.abs(ax), initial=0.0))
        if np.any(ax < self.l - viol) or np.any(ax > self.u + viol):
            return None
        self.x = x_p / self.d_scale
        self.y = y_p * self.c_scale / self.e_scale
        self.z = z_p * self.e_scale
        return QpSolution(
            x=x_p,
            status=QpStatus.OPTIMAL,
            primal_res=r_p,
            dual_res=r_d,
            objective=self._objective(x_p),
            iterations=0,
            y_rows=y_p[: self.m_eq + self.m_in].copy(),
            y_box=y_p[self.m_eq + self.m_in :].copy(),
            polished=True,
        )

    def _store_active_set(self, y: np.ndarray, z: np.ndarray):
        """Remember the active set of the final iterate for the next solve."""
        bound_sc = 1.0 + max(
            np.max(np.abs(self.l[self.l > -_INF]), initial=0.0),
            np.max(np.abs(self.u[self.u < _INF]), initial=0.0),
        )
        thr_y = 1e-7 * (1.0 + np.max(np.abs(y), initial=0.0))
        near = 1e-7 * bound_sc
        act_lo = (self.l > -_INF) & ((y < -thr_y) | (np.abs(z - self.l) <= near))
        act_hi = (self.u < _INF) & ((y > thr_y) | (np.abs(z - self.u) <= near)) & ~act_lo
        act_lo[: self.m_eq] = True
        act_hi[: self.m_eq] = False
        rows = np.where(act_lo | act_hi)[0]
        cached = self._act_cache
        if cached is not None and np.array_equal(cached[2], rows) and np.array_equal(
            cached[0], act_lo
        ):
            return
        if rows.size:
            a_red = self.A[rows]
            delta = 1e-9
            kkt = sp.bmat(
                [
                    [sp.diags(self.P_diag + delta), a_red.T],
                    [a_red, sp.diags(np.full(rows.size, -delta))],
                ],
                format="csc",
            )
            try:
                lu = spla.splu(kkt)
            except RuntimeError:
                self._act_cache = None
                return
        else:
            lu = None
        self._act_cache = (act_lo, act_hi, rows, lu)

    def solve(self) -> QpSolution:
        n = self.n
        if n == 0:
            return QpSolution(np.zeros(0), QpStatus.OPTIMAL, 0.0, 0.0, 0.0, 0)
        if self.reuse_active_set:
            cached = self._try_cached_active_set()
            if cached is not None:
                return cached
        sigma, alpha = self.sigma, self.alpha
        x, y, z = self.x, self.y, self.z
        rho = self.rho
        rhs = np.empty(n + self.m)
        status = QpStatus.MAX_ITER
        it = 0
        y_prev_check = y.copy()
        last_adapt = 0
        adapt_left = 2
        last_polish = 0
        eps_try = max(self.tol_p, self.tol_d, 1e-5)
        polished = None
        for it in range(1, self.max_iter + 1):
            rhs[:n] = sigma * x - self.qs
            rhs[n:] = z - y / rho
            sol = self._lu.solve(rhs)
            x_t = sol[:n]
            z_t = z + (sol[n:] - y) / rho
            x = alpha * x_t + (1 - alpha) * x
            z_new = np.clip(alpha * z_t + (1 - alpha) * z + y / rho, self.ls, self.us)
            y = y + rho * (alpha * z_t + (1 - alpha) * z - z_new)
            z = z_new
            if it <= 10 or it % 25 == 0:
                self.x, self.y, self.z = x, y, z
                xu, yu, zu = self._unscaled()
                r_p, p_sc, r_d, d_sc = self._residuals(xu, yu, zu)
                if r_p <= self.tol_p * (1 + p_sc) and r_d <= self.tol_d * (1 + d_sc):
                    status = QpStatus.OPTIMAL
                    break
                # a polish from a moderately accurate iterate usually lands the
                # exact active set; accepting it skips the slow ADMM tail
                want_polish = self.polish and (
                    (r_p <= eps_try * (1 + p_sc) and r_d <= eps_try * (1 + d_sc))
                    or it - last_polish >= 250
                )
                if want_polish and it - last_polish >= 50:
                    last_polish = it
                    polished = self._try_polish(yu, zu)
                    if polished is not None:
                        status = QpStatus.OPTIMAL
                        break
                if it % 50 == 0:
                    if self._primal_infeasible(y - y_prev_check):
                        status = QpStatus.INFEASIBLE
                        break
                    y_prev_check = y.copy()
                # rare rescue only: frequent penalty changes wreck the linear
                # convergence of the plain iteration
                if adapt_left > 0 and it - last_adapt >= 1000:
                    ratio = (r_p / (1 + p_sc)) / max(r_d / (1 + d_sc), 1e-30)
                    if ratio > 1e3 or ratio < 1e-3:
                        self._rho_base = float(
                            np.clip(self._rho_base * np.sqrt(ratio), _RHO_MIN, _RHO_MAX)
                        )
                        self._build_rho()
                        self._factorize()
                        rho = self.rho
                        last_adapt = it
                        adapt_left -= 1
        self.x, self.y, self.z = x, y, z
        self.total_iterations += it
        if polished is None and status is QpStatus.OPTIMAL and self.polish:
            xu, yu, zu = self._unscaled()
            polished = self._try_polish(yu, zu)
        if polished is not None:
            x_p, y_p, z_p, r_p, r_d = polished
            self.x = x_p / self.d_scale
            self.y = y_p * self.c_scale / self.e_scale
            self.z = z_p * self.e_scale
            return QpSolution(
                x=x_p,
                status=QpStatus.OPTIMAL,
                primal_res=r_p,
                dual_res=r_d,
                objective=self._objective(x_p),
                iterations=it,
                y_rows=y_p[: self.m_eq + self.m_in].copy(),
                y_box=y_p[self.m_eq + self.m_in :].copy(),
                polished=True,
            )
        xu, yu, zu = self._unscaled()
        r_p, _, r_d, _ = self._residuals(xu, yu, zu)
        if self.reuse_active_set and status is QpStatus.OPTIMAL:
            self._store_active_set(yu, zu)
        return QpSolution(
            x=xu,
            status=status,
            primal_res=r_p,
            dual_res=r_d,
            objective=self._objective(xu),
            iterations=it,
            y_rows=yu[: self.m_eq + self.m_in].copy(),
            y_box=yu[self.m_eq + self.m_in :].copy(),
        )

    def _objective(self, x: np.ndarray) -> float:
        return float(0.5 * np.dot(self.P_diag, x * x) + np.dot(self.q, x))

    def _try_polish(self, y: np.ndarray, z: np.ndarray):
        """Active-set polish seeded from the current iterate.

        The primal step pins the rows the iterate marks active (projected
        value at a bound, or a clearly signed multiplier); on LPs the point is
        the projection of the iterate onto that face, which stays bounded even
        when the face is degenerate. Violated rows are added for a few passes.
        Multipliers come from the KKT solve when strictly convex, otherwise
        from a sign-constrained least-squares fit. The result is returned only
        if it passes the full KKT test, so a wrong guess is merely discarded.
        """
        if self.n > _POLISH_N_CAP:
            return None
        bound_sc = 1.0 + max(
            np.max(np.abs(self.l[self.l > -_INF]), initial=0.0),
            np.max(np.abs(self.u[self.u < _INF]), initial=0.0),
        )
        tol_z = 1e-9 * bound_sc
        thr_y = 1e-7 * (1.0 + np.max(np.abs(y), initial=0.0))
        near = 1e-7 * bound_sc
        act_lo = (self.l > -_INF) & ((y < -thr_y) | (np.abs(z - self.l) <= near))
        act_hi = (self.u < _INF) & ((y > thr_y) | (np.abs(z - self.u) <= near)) & ~act_lo
        act_lo[: self.m_eq] = True
        act_hi[: self.m_eq] = False
        strictly_convex = bool(np.all(self.P_diag > 0))
        x_it = self.x * self.d_scale

        for _ in range(8):
            rows = np.where(act_lo | act_hi)[0]
            b_act = np.where(act_lo[rows], self.l[rows], self.u[rows])
            if strictly_convex:
                got = self._kkt_active(rows, b_act)
                if got is None:
                    return None
                x_p, y_kkt = got
            else:
                x_p = self._project_active(x_it, rows, b_act)
                if x_p is None:
                    return None
                y_kkt = None
            ax = self.A @ x_p
            inactive = ~(act_lo | act_hi)
            add_lo = inactive & (self.l > -_INF) & (ax < self.l - tol_z)
            add_hi = inactive & (self.u < _INF) & (ax > self.u + tol_z)
            if np.any(add_lo) or np.any(add_hi):
                act_lo |= add_lo
                act_hi |= add_hi & ~act_lo
                continue
            y_p = self._fit_duals(x_p, rows, act_lo, y_kkt)
            if y_p is None:
                return None
            z_p = np.clip(ax, self.l, self.u)
            r_p, _, r_d, d_sc = self._residuals(x_p, y_p, z_p)
            tol_y = 1e-9 * (1.0 + np.max(np.abs(y_p), initial=0.0))
            free = np.arange(self.m) >= self.m_eq
            comp_ok = bool(
                np.all(np.abs(ax - self.u)[free & (y_p > tol_y)] <= 1e-7 * bound_sc)
                and np.all(np.abs(ax - self.l)[free & (y_p < -tol_y)] <= 1e-7 * bound_sc)
            )
            if comp_ok and r_p <= tol_z and r_d <= 1e-9 * (1 + d_sc):
                return x_p, y_p, z_p, r_p, r_d
            return None
        return None

    def _project_active(self, x_it: np.ndarray, rows: np.ndarray, b_act: np.ndarray):
        """Least-norm shift of the iterate onto the pinned rows."""
        if rows.size == 0:
            return x_it.copy()
        a_red = self.A[rows].toarray()
        shift, *_ = np.linalg.lstsq(a_red, b_act - a_red @ x_it, rcond=None)
        x_p = x_it + shift
        if not np.all(np.isfinite(x_p)):
            return None
        return x_p

    def _fit_duals(self, x_p: np.ndarray, rows: np.ndarray, act_lo: np.ndarray,
                   y_kkt: np.ndarray | None):
        """Multipliers for the pinned rows: KKT values if sign-consistent,
        otherwise a nonnegative least-squares fit of the stationarity system."""
        resid_target = -(self.q + self.P_diag * x_p)
        if y_kkt is not None:
            tol_y = 1e-9 * (1.0 + np.max(np.abs(y_kkt), initial=0.0))
            signs_ok = bool(
                np.all(y_kkt[rows[(act_lo[rows]) & (rows >= self.m_eq)]] <= tol_y)
                and np.all(y_kkt[rows[(~act_lo[rows])]] >= -tol_y)
            )
            if signs_ok:
                return y_kkt
        if rows.size == 0:
            return np.zeros(self.m)
        a_red = self.A[rows].toarray()
        cols = []
        col_sign = []
        for idx, r in enumerate(rows):
            if r < self.m_eq:  # free dual: split into +/-
                cols.append(a_red[idx])
                col_sign.append((idx, 1.0))
                cols.append(-a_red[idx])
                col_sign.append((idx, -1.0))
            elif act_lo[r]:  # lower-active: y <= 0
                cols.append(-a_red[idx])
                col_sign.append((idx, -1.0))
            else:  # upper-active: y >= 0
                cols.append(a_red[idx])
                col_sign.append((idx, 1.0))
        m_mat = np.array(cols).T
        try:
            coef, resid = nnls(m_mat, resid_target)
        except RuntimeError:
            return None
        if resid > 1e-9 * (1.0 + np.linalg.norm(resid_target)):
            return None
        y_p = np.zeros(self.m)
        for (idx, sign), c in zip(col_sign, coef):
            y_p[rows[idx]] += sign * c
        return y_p

    def _kkt_active(self, rows: np.ndarray, b_act: np.ndarray):
        """Regularized equality-constrained solve on the active rows."""
        n = self.n
        if rows.size == 0:
            if not np.all(self.P_diag > 0):
                return None
            x_p = -self.q / self.P_diag  # interior optimum
            return x_p, np.zeros(self.m)
        a_red = self.A[rows]
        delta = 1e-9
        kkt = sp.bmat(
            [
                [sp.diags(self.P_diag + delta), a_red.T],
                [a_red, sp.diags(np.full(rows.size, -delta))],
            ],
            format="csc",
        )
        rhs = np.concatenate([-self.q, b_act])
        try:
            lu = spla.splu(kkt)
        except RuntimeError:
            return None
        vec = lu.solve(rhs)
        for _ in range(3):  # refinement against the unregularized KKT system
            vec = vec + lu.solve(rhs - self._kkt_apply(vec, a_red))
        if not np.all(np.isfinite(vec)):
            return None
        x_p = vec[:n]
        y_p = np.zeros(self.m)
        y_p[rows] = vec[n:]
        return x_p, y_p

    def _kkt_apply(self, v: np.ndarray, a_red) -> np.ndarray:
        x, yr = v[: self.n], v[self.n :]
        top = self.P_diag * x + a_red.T @ yr
        return np.concatenate([top, a_red @ x])

    def certified_lower_bound(self) -> float:
        """True lower bound on the current LP from the stored dual iterate.

        Only valid for LP data (zero Hessian). Wrong-signed inequality duals
        are clamped and the stationarity residual is absorbed into the finite
        box-row duals, after which the dual objective underestimates the LP
        optimum by weak duality no matter how inexact the iterate is.
        """
        if np.any(self.P_diag):
            raise ValueError("certified bound requires an LP (zero Hessian)")
        y = self.y * self.e_scale / self.c_scale
        base = self.m_eq + self.m_in
        y_rows = y[:base].copy()
        if self.m_in:
            y_rows[self.m_eq :] = np.maximum(y_rows[self.m_eq :], 0.0)
        resid = self.q + (self.A[:base].T @ y_rows if base else 0.0)
        y_box = -resid  # identity box rows absorb the residual exactly
        value = 0.0
        if self.m_eq:
            value -= float(np.dot(y_rows[: self.m_eq], self.l[: self.m_eq]))
        if self.m_in:
            value -= float(np.dot(y_rows[self.m_eq : base], self.u[self.m_eq : base]))
        box_l, box_u = self.l[base:], self.u[base:]
        value -= float(np.sum(np.where(y_box > 0, y_box * box_u, y_box * box_l)))
        return value


def solve_qp(problem: QpProblem, tol_p: float = 1e-8, tol_d: float = 1e-8,
             max_iter: int = 20000) -> QpSolution:
    return QpHandle(problem, tol_p=tol_p, tol_d=tol_d, max_iter=max_iter).solve()


def warm_start(problem: QpProblem, x0: np.ndarray | None = None,
               duals0: np.ndarray | None = None, **kwargs) -> QpHandle:
    """Handle whose first solve starts from (x0, duals0); later solves reuse state."""
    handle = QpHandle(problem, **kwargs)
    handle.warm_start(x0, duals0)
    return handle


def solve_lp(linear, a_eq=None, b_eq=None, a_in=None, f_in=None, lo=None, hi=None,
             tol: float = 1e-8, max_iter: int = 20000) -> QpSolution:
    """LP-mode wrapper of solve_qp (zero Hessian); boundedness comes from finite boxes."""
    linear = np.asarray(linear, dtype=float)
    problem = QpProblem(
        n=linear.size,
        quad_diag=np.zeros(linear.size),
        linear=linear,
        a_eq=a_eq,
        b_eq=b_eq,
        a_in=a_in,
        f_in=f_in,
        lo=lo,
        hi=hi,
    )
    return solve_qp(problem, tol_p=tol, tol_d=tol, max_iter=max_iter)
