"""Conversion of an Instance to the standard minimization form.

Variable layout is ``[x_E, x_B, u_PB, x_FHB]`` (slacks appended in equality
mode), with x_E and x_FHB stored order-major (index = order * horizon + t).
The objective is the negated welfare, so all solvers minimize.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .orders import Instance

__all__ = [
    "FormMode",
    "Row",
    "StandardForm",
    "build_standard_form",
    "welfare",
    "check_feasible",
    "Violation",
]


class FormMode(Enum):
    EQUALITY = "equality"
    INEQUALITY = "inequality"


@dataclass(frozen=True)
class Row:
    """One sparse linear row ``coeffs . x (= | <=) rhs``."""

    idx: tuple[int, ...]
    val: tuple[float, ...]
    rhs: float
    tag: tuple  # e.g. ("balance", t), ("ratio_lo", b), ("ub", j)

    def dot(self, x: np.ndarray) -> float:
        return float(np.dot(self.val, x[list(self.idx)]))


@dataclass(frozen=True)
class StandardForm:
    """Indexed variable space plus the constraint store of the clearing MILP.

    ``objective`` is the minimization vector (negated welfare). ``binary_set``
    holds u_PB and x_FHB indices; everything else (including slacks) is
    continuous. Arrays are frozen after construction.
    """

    mode: FormMode
    horizon: int
    n_vars: int
    objective: np.ndarray
    equalities: tuple[Row, ...]
    inequalities: tuple[Row, ...]
    lo: np.ndarray
    hi: np.ndarray
    binary_set: tuple[int, ...]
    continuous_set: tuple[int, ...]
    slack_map: dict[tuple, int]
    var_labels: tuple[tuple[str, str, int | None], ...]
    n_structural: int  # variable count before slacks
    lg_orders: tuple[str, ...] = ()  # ids of gradient-limited elementary orders

    def __post_init__(self):
        for arr in (self.objective, self.lo, self.hi):
            arr.setflags(write=False)

    def eq_matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        return _rows_to_csr(self.equalities, self.n_vars)

    def ineq_matrix(self) -> tuple[sp.csr_matrix, np.ndarray]:
        return _rows_to_csr(self.inequalities, self.n_vars)


def _rows_to_csr(rows: tuple[Row, ...], n: int) -> tuple[sp.csr_matrix, np.ndarray]:
    data, ri, ci = [], [], []
    for k, row in enumerate(rows):
        ri.extend([k] * len(row.idx))
        ci.extend(row.idx)
        data.extend(row.val)
    mat = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), n))
    rhs = np.array([r.rhs for r in rows], dtype=float)
    return mat, rhs


class _Layout:
    """Index bookkeeping shared by the builder and the feasibility checker."""

    def __init__(self, instance: Instance):
        T = instance.horizon
        n_e = len(instance.elementary)
        n_b = len(instance.blocks)
        n_f = len(instance.flexible)
        self.instance = instance
        self.T = T
        self.x_e0 = 0
        self.x_b0 = n_e * T
        self.u0 = self.x_b0 + n_b
        self.n_pb = len(instance.profile_blocks)
        self.x_f0 = self.u0 + self.n_pb
        self.n_structural = self.x_f0 + n_f * T
        # binary u only for profile blocks, in block order
        self.u_index = {b: self.u0 + k for k, b in enumerate(instance.profile_blocks)}
        self.block_pos = {b.id: i for i, b in enumerate(instance.blocks)}

    def x_e(self, i: int, t: int) -> int:
        return self.x_e0 + i * self.T + t

    def x_b(self, b: int) -> int:
        return self.x_b0 + b

    def u(self, b: int) -> int:
        return self.u_index[b]

    def x_f(self, f: int, t: int) -> int:
        return self.x_f0 + f * self.T + t


def _welfare_vector(instance: Instance) -> np.ndarray:
    lay = _Layout(instance)
    c = np.zeros(lay.n_structural)
    for i, o in enumerate(instance.elementary):
        for t in range(lay.T):
            c[lay.x_e(i, t)] = o.prices[t] * o.quantities[t]
    for b, order in enumerate(instance.blocks):
        c[lay.x_b(b)] = order.price * sum(order.profile)
    for f, bid in enumerate(instance.flexible):
        for t in range(lay.T):
            c[lay.x_f(f, t)] = bid.price * bid.quantity
    return c


def _structural_rows(instance: Instance) -> tuple[list[Row], list[Row]]:
    """Balance equalities and the order-type inequalities (<= form)."""
    lay = _Layout(instance)
    T = lay.T
    equalities: list[Row] = []
    for t in range(T):
        idx, val = [], []
        for i, o in enumerate(instance.elementary):
            if o.quantities[t] != 0.0:
                idx.append(lay.x_e(i, t))
                val.append(o.quantities[t])
        for b, order in enumerate(instance.blocks):
            if order.profile[t] != 0.0:
                idx.append(lay.x_b(b))
                val.append(order.profile[t])
        for f, bid in enumerate(instance.flexible):
            idx.append(lay.x_f(f, t))
            val.append(bid.quantity)
        equalities.append(Row(tuple(idx), tuple(val), 0.0, ("balance", t)))

    inequalities: list[Row] = []
    for i in instance.load_gradient_orders:
        o = instance.elementary[i]
        g_up, g_down = o.load_gradient
        for t in range(1, T):
            q_t, q_p = o.quantities[t], o.quantities[t - 1]
            up_idx, up_val = [], []
            if q_t != 0.0:
                up_idx.append(lay.x_e(i, t))
                up_val.append(q_t)
            if q_p != 0.0:
                up_idx.append(lay.x_e(i, t - 1))
                up_val.append(-q_p)
            if up_idx:
                inequalities.append(Row(tuple(up_idx), tuple(up_val), g_up, ("lg_up", i, t)))
                inequalities.append(
                    Row(tuple(up_idx), tuple(-v for v in up_val), g_down, ("lg_down", i, t))
                )
    for b in instance.profile_blocks:
        r = instance.blocks[b].min_ratio
        inequalities.append(Row((lay.u(b), lay.x_b(b)), (r, -1.0), 0.0, ("ratio_lo", b)))
        inequalities.append(Row((lay.x_b(b), lay.u(b)), (1.0, -1.0), 0.0, ("ratio_hi", b)))
    for gid, members in instance.exclusive_groups.items():
        idx = tuple(lay.x_b(b) for b in members)
        inequalities.append(Row(idx, (1.0,) * len(idx), 1.0, ("excl", gid)))
    for c in instance.linked_children:
        child = instance.blocks[c]
        idx = [lay.x_b(c)]
        val = [1.0]
        for pid in sorted(child.parents):
            idx.append(lay.x_b(lay.block_pos[pid]))
            val.append(-1.0)
        inequalities.append(Row(tuple(idx), tuple(val), 0.0, ("link", c)))
    for f in range(len(instance.flexible)):
        idx = tuple(lay.x_f(f, t) for t in range(T))
        inequalities.append(Row(idx, (1.0,) * T, 1.0, ("fhb", f)))
    return equalities, inequalities


def build_standard_form(instance: Instance, mode: FormMode = FormMode.INEQUALITY) -> StandardForm:
    """Build the standard minimization form of the clearing MILP.

    In equality mode every inequality, including the upper bounds x <= 1,
    receives a fresh slack variable; rows whose natural slack range exceeds 1
    are rescaled so that all variables (slacks included) live in [0, 1].
    """
    lay = _Layout(instance)
    n_struct = lay.n_structural
    c_struct = -_welfare_vector(instance)

    labels: list[tuple[str, str, int | None]] = []
    for i, o in enumerate(instance.elementary):
        labels.extend((o.id, "x_e", t) for t in range(lay.T))
    for order in instance.blocks:
        labels.append((order.id, "x_b", None))
    for b in instance.profile_blocks:
        labels.append((instance.blocks[b].id, "u", None))
    for bid in instance.flexible:
        labels.extend((bid.id, "x_fhb", t) for t in range(lay.T))

    binaries = sorted(lay.u_index.values()) + list(range(lay.x_f0, n_struct))
    equalities, inequalities = _structural_rows(instance)

    if mode is FormMode.INEQUALITY:
        continuous = sorted(set(range(n_struct)) - set(binaries))
        return StandardForm(
            mode=mode,
            horizon=lay.T,
            n_vars=n_struct,
            objective=c_struct,
            equalities=tuple(equalities),
            inequalities=tuple(inequalities),
            lo=np.zeros(n_struct),
            hi=np.ones(n_struct),
            binary_set=tuple(binaries),
            continuous_set=tuple(continuous),
            slack_map={},
            var_labels=tuple(labels),
            n_structural=n_struct,
            lg_orders=tuple(instance.elementary[i].id for i in instance.load_gradient_orders),
        )

    # equality mode: slack every inequality plus every upper bound x <= 1
    slack_rows = list(inequalities) + [
        Row((j,), (1.0,), 1.0, ("ub", j)) for j in range(n_struct)
    ]
    n_vars = n_struct + len(slack_rows)
    c = np.zeros(n_vars)
    c[:n_struct] = c_struct
    eq_all = list(equalities)
    slack_map: dict[tuple, int] = {}
    for k, row in enumerate(slack_rows):
        s = n_struct + k
        slack_map[row.tag] = s
        # largest reachable slack over the [0, 1] box; rescale if it exceeds 1
        span = row.rhs - sum(min(0.0, v) for v in row.val)
        scale = 1.0 / span if span > 1.0 else 1.0
        idx = row.idx + (s,)
        val = tuple(v * scale for v in row.val) + (1.0,)
        eq_all.append(Row(idx, val, row.rhs * scale, ("slacked",) + row.tag))
        labels.append((f"slack[{'/'.join(str(p) for p in row.tag)}]", "s", None))

    continuous = sorted(set(range(n_vars)) - set(binaries))
    return StandardForm(
        mode=mode,
        horizon=lay.T,
        n_vars=n_vars,
        objective=c,
        equalities=tuple(eq_all),
        inequalities=(),
        lo=np.zeros(n_vars),
        hi=np.ones(n_vars),
        binary_set=tuple(binaries),
        continuous_set=tuple(continuous),
        slack_map=slack_map,
        var_labels=tuple(labels),
        n_structural=n_struct,
        lg_orders=tuple(instance.elementary[i].id for i in instance.load_gradient_orders),
    )


def extend_with_slacks(sf: StandardForm, x_structural) -> np.ndarray:
    """Append the implied slack values to a structural assignment (equality mode)."""
    if sf.mode is not FormMode.EQUALITY:
        raise ValueError("slack extension only applies to equality-mode forms")
    x = np.zeros(sf.n_vars)
    x[: sf.n_structural] = np.asarray(x_structural, dtype=float)
    for row in sf.equalities:
        if row.tag[0] != "slacked":
            continue
        s = row.idx[-1]  # slack column appended last
        x[s] = row.rhs - sum(v * x[j] for j, v in zip(row.idx[:-1], row.val[:-1]))
    return x


def welfare(instance: Instance, assignment) -> float:
    """Welfare (maximization orientation) of a pre-slack assignment."""
    x = np.asarray(assignment, dtype=float)
    lay = _Layout(instance)
    if x.shape != (lay.n_structural,):
        raise ValueError(f"assignment length {x.shape} != {lay.n_structural} variables")
    return float(np.dot(_welfare_vector(instance), x))


@dataclass(frozen=True)
class Violation:
    constraint: tuple
    magnitude: float


def check_feasible(instance: Instance, assignment, tol: float = 1e-9) -> list[Violation]:
    """Report every violated market constraint of a pre-slack assignment.

    Empty result means feasible within ``tol``; binary entries must lie within
    ``tol`` of {0, 1}.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    x = np.asarray(assignment, dtype=float)
    lay = _Layout(instance)
    if x.shape != (lay.n_structural,):
        raise ValueError(f"assignment length {x.shape} != {lay.n_structural} variables")
    out: list[Violation] = []
    for j in range(lay.n_structural):
        if x[j] < -tol:
            out.append(Violation(("lb", j), float(-x[j])))
        if x[j] > 1.0 + tol:
            out.append(Violation(("ub", j), float(x[j] - 1.0)))
    sf_eq, sf_in = _structural_rows(instance)
    for row in sf_eq:
        gap = abs(row.dot(x) - row.rhs)
        if gap > tol:
            out.append(Violation(row.tag, float(gap)))
    for row in sf_in:
        gap = row.dot(x) - row.rhs
        if gap > tol:
            out.append(Violation(row.tag, float(gap)))
    binaries = sorted(lay.u_index.values()) + list(range(lay.x_f0, lay.n_structural))
    for j in binaries:
        frac = min(abs(x[j]), abs(x[j] - 1.0))
        if frac > tol:
            out.append(Violation(("binary", j), float(frac)))
    return out
