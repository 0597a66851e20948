"""Primal ADMM for the decomposed lifted relaxations, with certified bounds.

One iteration minimizes the penalized objective over the polyhedral set (a
diagonal-Hessian QP on the shared slot vector), projects each clique matrix
onto the PSD cone, and takes a dual ascent step. The penalty follows the
slow-blend adaptive rule rho_k = (1 - w_k) rho_{k-1} + w_k * clip(|Z|/|Y|),
w_k = 2^(-k/1000).

Lower bounds use weak duality: projecting the multipliers onto the PSD cone
makes the cone term vanish, and the remaining minimization over the
polyhedral set is an LP. The reported bound is computed from the LP's dual
with the stationarity residual absorbed into the finite box multipliers, so
it is a valid bound even when the LP is solved loosely.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .formulation import ConicProgram
from .qp import QpHandle, QpProblem, QpStatus
from .standard_form import extend_with_slacks, FormMode
from .symlin import proj_psd, sym

__all__ = ["AdmmParams", "AdmmState", "BoundCertificate", "SolveReport", "run"]

LOG_COLUMNS = ("k", "rho", "r", "s", "obj", "best_dual", "omega")


@dataclass
class AdmmParams:
    rho0: float = 1.0
    rho_lo: float = 1e-4
    rho_hi: float = 1e4
    eps_p: float = 1e-3
    eps_d: float = 1e-4
    max_iter: int | None = None  # defaults to 20000 * horizon
    bound_period: int = 100
    log_period: int = 1
    gap_tol: float = 1e-3
    min_iter: int = 0  # termination checks are suspended below this count
    term_rule: str = "conjunction"  # "conjunction": r<=eps_p and s<=eps_d; "min": min(r,s)<eps_p
    qp_tol: float = 1e-6
    qp_max_iter: int = 20000

    def __post_init__(self):
        if not (0 < self.rho_lo <= self.rho0 <= self.rho_hi):
            raise ValueError("need 0 < rho_lo <= rho0 <= rho_hi")
        if self.eps_p <= 0 or self.eps_d <= 0:
            raise ValueError("tolerances must be positive")
        if self.term_rule not in ("conjunction", "min"):
            raise ValueError("term_rule must be 'conjunction' or 'min'")


@dataclass
class BoundCertificate:
    iteration: int
    z_projected_norms: list[float]
    lp_objective: float
    valid_lower_bound: float


@dataclass
class AdmmState:
    v: np.ndarray
    y_mats: list[np.ndarray]
    z_mats: list[np.ndarray]
    rho: float
    k: int = 0
    r_hist: list[float] = field(default_factory=list)
    s_hist: list[float] = field(default_factory=list)
    rho_hist: list[float] = field(default_factory=list)
    best_dual: float = -np.inf
    obj: float = 0.0
    certificates: list[BoundCertificate] = field(default_factory=list)
    soft_failures: int = 0


@dataclass
class SolveReport:
    method: str
    status: str  # "converged" | "gap_certified" | "max_iter"
    iterations: int
    obj_min: float
    bound_min: float
    obj_welfare: float
    bound_welfare: float
    gap_rel: float
    primal_residual: float
    dual_residual: float
    rho_final: float
    wall_time: float
    soft_failures: int = 0
    certificates: int = 0


def _x_update_problem(program: ConicProgram) -> QpProblem:
    a_eq, b_eq = program.eq_system()
    a_in, f_in = program.ineq_system()
    return QpProblem(
        n=program.n_slots,
        quad_diag=program.quad_mult.copy(),
        linear=np.zeros(program.n_slots),
        a_eq=a_eq if a_eq.shape[0] else None,
        b_eq=b_eq if a_eq.shape[0] else None,
        a_in=a_in if a_in.shape[0] else None,
        f_in=f_in if a_in.shape[0] else None,
        lo=program.lo.copy(),
        hi=program.hi.copy(),
    )


class _BoundLp:
    """Bound LP over the polyhedral set, reporting a dual-side value.

    The value is computed from the LP duals with clamped inequality
    multipliers and the stationarity residual absorbed into the finite box
    multipliers, so it is a valid lower bound by weak duality regardless of
    the LP kernel's internal tolerances.
    """

    def __init__(self, program: ConicProgram):
        a_eq, b_eq = program.eq_system()
        a_in, f_in = program.ineq_system()
        self.a_eq = a_eq if a_eq.shape[0] else None
        self.b_eq = b_eq if a_eq.shape[0] else None
        self.a_in = a_in if a_in.shape[0] else None
        self.f_in = f_in if a_in.shape[0] else None
        self.bounds = np.column_stack([program.lo, program.hi])
        self.lo = program.lo
        self.hi = program.hi

    def solve(self, lp_cost: np.ndarray) -> tuple[float, float]:
        res = linprog(
            lp_cost,
            A_ub=self.a_in,
            b_ub=self.f_in,
            A_eq=self.a_eq,
            b_eq=self.b_eq,
            bounds=self.bounds,
            method="highs",
        )
        if res.status != 0:
            raise RuntimeError(f"bound LP failed: {res.message}")
        resid = lp_cost.copy()
        value = 0.0
        if self.a_eq is not None:
            y_eq = -res.eqlin.marginals
            resid = resid + self.a_eq.T @ y_eq
            value -= float(np.dot(y_eq, self.b_eq))
        if self.a_in is not None:
            y_in = np.maximum(-res.ineqlin.marginals, 0.0)
            resid = resid + self.a_in.T @ y_in
            value -= float(np.dot(y_in, self.f_in))
        y_box = -resid  # identity box rows absorb the residual exactly
        value -= float(np.sum(np.where(y_box > 0, y_box * self.hi, y_box * self.lo)))
        return float(res.fun), value


def dual_bound(program: ConicProgram, z_mats: list[np.ndarray], bound_lp: _BoundLp,
               iteration: int) -> BoundCertificate:
    """Weak-duality certificate from the current multipliers.

    Projecting each multiplier onto the PSD cone zeroes the cone term, so the
    bound is the minimum of the adjusted linear cost over the polyhedral set.
    """
    lp_cost = program.cost.copy()
    z_norms = []
    for op, z in zip(program.ops, z_mats):
        z_hat = proj_psd(z)
        z_norms.append(float(np.linalg.norm(z_hat)))
        lp_cost -= op.adjoint(z_hat)
    lp_value, bound = bound_lp.solve(lp_cost)
    return BoundCertificate(
        iteration=iteration,
        z_projected_norms=z_norms,
        lp_objective=lp_value,
        valid_lower_bound=bound,
    )


def initial_point(program: ConicProgram) -> np.ndarray:
    """Zero acceptance lifted into slot space (slacks implied in equality mode)."""
    x0 = np.zeros(program.sf.n_structural)
    if program.sf.mode is FormMode.EQUALITY:
        x0 = extend_with_slacks(program.sf, x0)
    return program.lift_point(x0)


def run(program: ConicProgram, params: AdmmParams | None = None,
        log_path=None) -> tuple[AdmmState, SolveReport]:
    """Algorithm loop: x-update QP, clique PSD projections, dual ascent,
    adaptive penalty, periodic certificates, certified termination."""
    params = params or AdmmParams()
    t0 = time.perf_counter()
    max_iter = params.max_iter if params.max_iter is not None else 20000 * program.sf.horizon
    ops = program.ops
    c_scale = max(float(np.max(np.abs(program.cost))), 1.0)
    cost = program.cost / c_scale

    v = initial_point(program)
    y_mats = [op.apply(v) for op in ops]
    z_mats = [np.zeros((op.dim, op.dim)) for op in ops]
    state = AdmmState(v=v, y_mats=y_mats, z_mats=z_mats, rho=params.rho0)
    state.obj = float(program.cost @ v)

    x_handle = QpHandle(
        _x_update_problem(program), tol_p=params.qp_tol, tol_d=max(params.qp_tol, 1e-4),
        max_iter=params.qp_max_iter, polish=False, reuse_active_set=True,
    )
    x_handle.warm_start(v, None)
    bound_lp = _BoundLp(program)

    log_file = open(log_path, "w") if log_path is not None else None
    if log_file:
        log_file.write(",".join(LOG_COLUMNS) + "\n")

    def emit_log(k, rho, r, s, omega):
        if log_file and k % params.log_period == 0:
            log_file.write(
                f"{k},{rho:.17g},{r:.17g},{s:.17g},{state.obj:.17g},{state.best_dual:.17g},{omega:.17g}\n"
            )

    def certify(k):
        # the loop runs on the normalized objective; multipliers scale back up
        z_true = [c_scale * z for z in state.z_mats]
        cert = dual_bound(program, z_true, bound_lp, k)
        state.certificates.append(cert)
        state.best_dual = max(state.best_dual, cert.valid_lower_bound)
        return cert

    certify(0)
    emit_log(0, params.rho0, 0.0, 0.0, 1.0)

    status = "max_iter"
    rho = params.rho0
    r = s = 0.0
    gap = np.inf
    for k in range(1, max_iter + 1):
        omega = 2.0 ** (-k / 1000.0)
        y_norm = np.sqrt(sum(float(np.sum(m * m)) for m in state.y_mats))
        z_norm = np.sqrt(sum(float(np.sum(m * m)) for m in state.z_mats))
        # degenerate stacks (the zero multipliers of the first step) blend as no-ops
        ratio = rho if (y_norm == 0.0 or z_norm == 0.0) else z_norm / y_norm
        rho = (1.0 - omega) * rho + omega * float(np.clip(ratio, params.rho_lo, params.rho_hi))
        state.rho = rho
        state.rho_hist.append(rho)

        # x-update: objective scaled by 1/rho so the Hessian stays constant
        adj = np.zeros(program.n_slots)
        for op, y_m, z_m in zip(ops, state.y_mats, state.z_mats):
            adj += op.adjoint(y_m + z_m / rho)
        x_handle.update_linear(cost / rho - adj)
        sol = x_handle.solve()
        if sol.status is QpStatus.OPTIMAL or sol.status is QpStatus.MAX_ITER:
            if sol.status is QpStatus.MAX_ITER:
                state.soft_failures += 1
            v_new = sol.x
        else:
            raise RuntimeError(f"x-update returned {sol.status}")
        dv = v_new - state.v
        state.v = v_new
        state.obj = float(program.cost @ v_new)

        r_sq = 0.0
        s_sq = 0.0
        for i, op in enumerate(ops):
            a_v = op.apply(v_new)
            y_i = proj_psd(a_v - state.z_mats[i] / rho)
            state.y_mats[i] = y_i
            state.z_mats[i] = sym(state.z_mats[i] + rho * (y_i - a_v))
            diff = y_i - a_v
            r_sq += float(np.sum(diff * diff))
            a_dv = op.apply(dv)
            s_sq += float(np.sum(a_dv * a_dv))
        y_norm_new = np.sqrt(sum(float(np.sum(m * m)) for m in state.y_mats))
        z_norm_new = np.sqrt(sum(float(np.sum(m * m)) for m in state.z_mats))
        r = np.sqrt(r_sq) / (1.0 + y_norm_new)
        s = rho * np.sqrt(s_sq) / (1.0 + z_norm_new)
        state.r_hist.append(r)
        state.s_hist.append(s)
        state.k = k

        if k % params.bound_period == 0:
            certify(k)
        gap = abs(state.obj - state.best_dual) / (1.0 + abs(state.obj))
        emit_log(k, rho, r, s, omega)

        if k >= params.min_iter:
            if params.term_rule == "conjunction":
                resid_ok = r <= params.eps_p and s <= params.eps_d
            else:
                resid_ok = min(r, s) < params.eps_p
            if resid_ok:
                status = "converged"
                break
            # the objective only estimates the relaxation value once the
            # consensus residual is small, so the gap exit is gated on it
            if gap <= params.gap_tol and r <= params.eps_p:
                status = "gap_certified"
                break

    if not state.certificates or state.certificates[-1].iteration != state.k:
        certify(state.k)
        gap = abs(state.obj - state.best_dual) / (1.0 + abs(state.obj))
        if status == "max_iter" and gap <= params.gap_tol:
            status = "gap_certified"
    if log_file:
        log_file.close()

    report = SolveReport(
        method=f"{program.variant.value}:{program.level.value}",
        status=status,
        iterations=state.k,
        obj_min=state.obj,
        bound_min=state.best_dual,
        obj_welfare=-state.obj,
        bound_welfare=-state.best_dual,
        gap_rel=gap,
        primal_residual=r,
        dual_residual=s,
        rho_final=rho,
        wall_time=time.perf_counter() - t0,
        soft_failures=state.soft_failures,
        certificates=len(state.certificates),
    )
    return state, report
