"""Desk-scale exact reference solvers: branch-and-bound and brute force.

Both enumerate the binary variables (profile-block activations and flexible
activations) on top of LP relaxations; they are oracles for bound-quality
evaluation, not a production MILP code. Node LPs use scipy's HiGHS kernel,
which is exact and fast on the small degenerate LPs that binary fixings
produce.
"""

from __future__ import annotations

import heapq
import itertools
import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .orders import Instance
from .standard_form import FormMode, StandardForm, build_standard_form

__all__ = ["MilpResult", "solve_milp_exact", "solve_milp_bruteforce", "solve_lp_relaxation"]

_BNB_BINARY_GUARD = 40
_BRUTE_BINARY_GUARD = 16
_INT_TOL = 1e-6


@dataclass
class MilpResult:
    welfare: float
    assignment: np.ndarray
    nodes: int
    status: str  # "optimal" | "time_limit"
    bound_welfare: float  # proven upper bound on welfare


class _LpKernel:
    """LP data of one standard form, solvable under changing boxes and rhs."""

    def __init__(self, c, a_eq, b_eq, a_in, f_in, lo, hi):
        self.c = np.asarray(c, dtype=float)
        self.a_eq = a_eq if a_eq is not None and a_eq.shape[0] else None
        self.b_eq = np.asarray(b_eq, dtype=float) if self.a_eq is not None else None
        self.a_in = a_in if a_in is not None and a_in.shape[0] else None
        self.f_in = np.asarray(f_in, dtype=float) if self.a_in is not None else None
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)

    def solve(self, lo=None, hi=None, b_eq=None):
        res = linprog(
            self.c,
            A_ub=self.a_in,
            b_ub=self.f_in,
            A_eq=self.a_eq,
            b_eq=self.b_eq if b_eq is None else b_eq,
            bounds=np.column_stack(
                [self.lo if lo is None else lo, self.hi if hi is None else hi]
            ),
            method="highs",
        )
        if res.status == 2:
            return None  # infeasible
        if res.status != 0:
            raise RuntimeError(f"node LP failed: {res.message}")
        return res.fun, res.x

    @classmethod
    def from_standard_form(cls, sf: StandardForm) -> "_LpKernel":
        a_eq, b_eq = sf.eq_matrix()
        a_in, f_in = sf.ineq_matrix()
        return cls(sf.objective, a_eq, b_eq, a_in, f_in, sf.lo, sf.hi)


def solve_lp_relaxation(instance: Instance):
    """LP relaxation of the clearing MILP: binaries relaxed to [0, 1].

    Returns (welfare bound, fractional assignment); the bound dominates the
    MILP optimum.
    """
    sf = build_standard_form(instance, FormMode.INEQUALITY)
    if sf.n_vars == 0:
        return 0.0, np.zeros(0)
    got = _LpKernel.from_standard_form(sf).solve()
    if got is None:
        raise RuntimeError("LP relaxation infeasible (zero point should be feasible)")
    obj, x = got
    return -obj, x


def solve_milp_bruteforce(instance: Instance):
    """Enumerate every binary assignment, solving the continuous LP for each.

    With all binaries fixed, the profile-ratio and flexible-bid rows reduce to
    variable bounds and balance right-hand sides, so each combination is a
    small LP over the elementary and block acceptances only. Combinations
    whose binary pattern already violates a purely-binary constraint (a
    flexible bid active twice) never reach an LP. Guarded to 16 binaries.
    """
    sf = build_standard_form(instance, FormMode.INEQUALITY)
    if len(sf.binary_set) > _BRUTE_BINARY_GUARD:
        raise ValueError(
            f"brute force limited to {_BRUTE_BINARY_GUARD} binaries, got {len(sf.binary_set)}"
        )
    if sf.n_vars == 0:
        return 0.0, np.zeros(0)

    T = instance.horizon
    n_e = len(instance.elementary)
    n_b = len(instance.blocks)
    n_f = len(instance.flexible)
    n_cont = n_e * T + n_b  # x_E then x_B, same layout as the standard form
    x_b0 = n_e * T
    x_f0 = sf.n_structural - n_f * T

    fhb_q = np.array([bid.quantity for bid in instance.flexible])
    fhb_cost = (
        np.array([[sf.objective[x_f0 + f * T + t] for t in range(T)] for f in range(n_f)])
        if n_f
        else np.zeros((0, T))
    )

    eq_rows = [r for r in sf.equalities if r.tag[0] == "balance"]
    if n_cont == 0:
        # only flexible bids: a pattern is feasible iff the balance cancels
        best, best_pick = 0.0, (-1,) * n_f
        for fhb_pick in itertools.product(range(-1, T), repeat=n_f):
            rhs = np.zeros(T)
            cost = 0.0
            for f, pick in enumerate(fhb_pick):
                if pick >= 0:
                    rhs[pick] += fhb_q[f]
                    cost += fhb_cost[f, pick]
            if np.max(np.abs(rhs), initial=0.0) < 1e-12 and -cost > best:
                best, best_pick = -cost, fhb_pick
        x_full = np.zeros(sf.n_structural)
        for f, pick in enumerate(best_pick):
            if pick >= 0:
                x_full[x_f0 + f * T + pick] = 1.0
        return best, x_full

    in_rows = [r for r in sf.inequalities if r.tag[0] in ("lg_up", "lg_down", "excl", "link")]
    # flexible-bid columns leave the balance rows; their terms go to the rhs
    eq_entries = [
        (k, j, v) for k, r in enumerate(eq_rows) for j, v in zip(r.idx, r.val) if j < n_cont
    ]
    a_eq = sp.csr_matrix(
        ([v for _, _, v in eq_entries], ([k for k, _, _ in eq_entries], [j for _, j, _ in eq_entries])),
        shape=(len(eq_rows), n_cont),
    )
    a_in = None
    f_in = None
    if in_rows:
        a_in = sp.csr_matrix(
            (
                [v for r in in_rows for v in r.val],
                ([k for k, r in enumerate(in_rows) for _ in r.idx], [j for r in in_rows for j in r.idx]),
            ),
            shape=(len(in_rows), n_cont),
        )
        f_in = np.array([r.rhs for r in in_rows])
    kernel = _LpKernel(
        sf.objective[:n_cont], a_eq, np.zeros(len(eq_rows)), a_in, f_in,
        np.zeros(n_cont), np.ones(n_cont),
    )

    best = -np.inf
    best_cont: np.ndarray | None = None
    best_combo = None
    profile_idx = list(instance.profile_blocks)
    for fhb_pick in itertools.product(range(-1, T), repeat=n_f):
        rhs = np.zeros(len(eq_rows))
        const_cost = 0.0
        for f, pick in enumerate(fhb_pick):
            if pick >= 0:
                rhs[pick] -= fhb_q[f]
                const_cost += fhb_cost[f, pick]
        for u_bits in itertools.product((0.0, 1.0), repeat=len(profile_idx)):
            lo = np.zeros(n_cont)
            hi = np.ones(n_cont)
            for b, u in zip(profile_idx, u_bits):
                lo[x_b0 + b] = instance.blocks[b].min_ratio * u
                hi[x_b0 + b] = u
            got = kernel.solve(lo=lo, hi=hi, b_eq=rhs)
            if got is None:
                continue
            obj, x = got
            value = -(obj + const_cost)
            if value > best:
                best = value
                best_cont = x.copy()
                best_combo = (fhb_pick, u_bits)
    if best_cont is None:
        # the all-zero assignment is always feasible, so this cannot happen
        raise RuntimeError("no feasible binary assignment found")
    x_full = np.zeros(sf.n_structural)
    x_full[:n_cont] = best_cont
    fhb_pick, u_bits = best_combo
    for k, _ in enumerate(profile_idx):
        x_full[n_cont + k] = u_bits[k]
    for f, pick in enumerate(fhb_pick):
        if pick >= 0:
            x_full[x_f0 + f * T + pick] = 1.0
    return best, x_full


def solve_milp_exact(instance: Instance, time_limit: float = 120.0) -> MilpResult:
    """Best-first branch-and-bound over the binary variables.

    Branching picks the most fractional binary (ties to the lowest index); a
    node is pruned when its LP bound cannot beat the incumbent. On time-limit
    expiry the incumbent and its proven bound are returned with status
    "time_limit".
    """
    sf = build_standard_form(instance, FormMode.INEQUALITY)
    binaries = list(sf.binary_set)
    if len(binaries) > _BNB_BINARY_GUARD:
        raise ValueError(
            f"branch-and-bound limited to {_BNB_BINARY_GUARD} binaries, got {len(binaries)}"
        )
    if sf.n_vars == 0:
        return MilpResult(0.0, np.zeros(0), 0, "optimal", 0.0)

    kernel = _LpKernel.from_standard_form(sf)
    deadline = time.monotonic() + time_limit
    incumbent_obj = np.inf  # minimization form
    incumbent_x: np.ndarray | None = None
    nodes = 0
    counter = 0
    heap: list = []  # (lp bound, tie counter, fixings, node solution)

    def solve_node(fixings):
        lo = sf.lo.copy()
        hi = sf.hi.copy()
        for j, v in fixings.items():
            lo[j] = v
            hi[j] = v
        return kernel.solve(lo=lo, hi=hi)

    status = "optimal"
    root = solve_node({})
    nodes += 1
    if root is not None:
        heapq.heappush(heap, (root[0], counter, {}, root[1]))

    while heap:
        if time.monotonic() > deadline:
            status = "time_limit"
            break
        bound, _, fixings, node_x = heapq.heappop(heap)
        prune_tol = 1e-9 * (1 + abs(incumbent_obj if np.isfinite(incumbent_obj) else 0.0))
        if bound >= incumbent_obj - prune_tol:
            continue
        frac = np.array([min(abs(node_x[j]), abs(1.0 - node_x[j])) for j in binaries])
        free = [k for k, j in enumerate(binaries) if j not in fixings]
        if not free or all(frac[k] <= _INT_TOL for k in free):
            # integral: fix the rounded binaries and re-solve for a clean point
            full_fix = dict(fixings)
            for k in free:
                full_fix[binaries[k]] = round(float(node_x[binaries[k]]))
            got = solve_node(full_fix)
            nodes += 1
            if got is not None and got[0] < incumbent_obj:
                incumbent_obj = got[0]
                incumbent_x = got[1].copy()
            continue
        k_branch = max(free, key=lambda k: (frac[k], -k))
        j_branch = binaries[k_branch]
        for value in (0.0, 1.0):
            child_fix = dict(fixings)
            child_fix[j_branch] = value
            got = solve_node(child_fix)
            nodes += 1
            if got is None or got[0] >= incumbent_obj - prune_tol:
                continue
            counter += 1
            heapq.heappush(heap, (got[0], counter, child_fix, got[1]))

    if incumbent_x is None:
        incumbent_x = np.zeros(sf.n_vars)
        incumbent_obj = 0.0
    proven = incumbent_obj
    if status == "time_limit":
        proven = min(min((entry[0] for entry in heap), default=np.inf), incumbent_obj)
    return MilpResult(
        welfare=-incumbent_obj,
        assignment=incumbent_x,
        nodes=nodes,
        status=status,
        bound_welfare=-proven,
    )
