"""Lifted conic formulations of the clearing problem.

Variants: the slack-equality lifting (one global clique over originals plus
slacks), the inequality lifting (one global clique over original variables),
and the clique-decomposed lifting. Levels: PSD only, PSD plus entrywise
nonnegativity, and the latter strengthened with RLT rows.

The polyhedral part (the set the ADMM X-update optimizes over) is stored as
sparse rows over scalar slots plus per-slot boxes; cone membership of the
clique matrices is the solver's job.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from .lifting import (
    Clique,
    EntryRegistry,
    SelectionOp,
    build_selection_ops,
    enumerate_cliques,
    global_clique,
    lift_equalities,
    register_entries,
)
from .orders import Instance
from .rlt import generate_rlt
from .standard_form import FormMode, Row, StandardForm, build_standard_form

__all__ = ["Variant", "Level", "ConicProgram", "build_formulation", "export_text"]


class Variant(Enum):
    CPP_EQ = "eq"
    CPP_INEQ = "ineq"
    DECOMPOSED = "decomp"


class Level(Enum):
    SDP = "sdp"
    DNN = "dnn"
    DNN_RLT = "dnn-rlt"


@dataclass
class ConicProgram:
    """Decomposed relaxation in scalar-slot form.

    ``cost`` is the minimization objective (nonzero on singleton slots only);
    ``poly_eq``/``poly_ineq`` and the boxes define the polyhedral set; each
    clique's matrix must additionally be PSD. ``quad_mult`` counts matrix
    cells per slot, the constant diagonal Hessian of the consensus penalty.
    """

    variant: Variant
    level: Level
    instance: Instance
    sf: StandardForm
    registry: EntryRegistry
    cliques: list[Clique]
    ops: list[SelectionOp]
    n_slots: int
    cost: np.ndarray
    poly_eq: list[Row]
    poly_ineq: list[Row]
    lo: np.ndarray
    hi: np.ndarray
    quad_mult: np.ndarray
    strict_diag: bool = True
    _matrices: dict = field(default_factory=dict, repr=False)

    def eq_system(self):
        return self._rows_csr("eq", self.poly_eq)

    def ineq_system(self):
        return self._rows_csr("ineq", self.poly_ineq)

    def _rows_csr(self, key, rows):
        if key not in self._matrices:
            data, ri, ci = [], [], []
            for k, row in enumerate(rows):
                ri.extend([k] * len(row.idx))
                ci.extend(row.idx)
                data.extend(row.val)
            mat = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), self.n_slots))
            rhs = np.array([r.rhs for r in rows], dtype=float)
            self._matrices[key] = (mat, rhs)
        return self._matrices[key]

    def lift_point(self, x: np.ndarray) -> np.ndarray:
        """Scalar-slot vector of the lifted point (1, x, xx')."""
        x = np.asarray(x, dtype=float)
        v = np.zeros(self.n_slots)
        v[self.registry.one_slot] = 1.0
        v[1 : 1 + self.registry.n_base] = x
        for (i, j) in self.registry.pairs_sorted():
            v[self.registry.pair(i, j)] = x[i] * x[j]
        return v

    def violation(self, v: np.ndarray) -> float:
        """Largest violation of the polyhedral rows and boxes at ``v``."""
        worst = 0.0
        a_eq, b_eq = self.eq_system()
        if a_eq.shape[0]:
            worst = max(worst, float(np.max(np.abs(a_eq @ v - b_eq))))
        a_in, f_in = self.ineq_system()
        if a_in.shape[0]:
            worst = max(worst, float(np.max(a_in @ v - f_in, initial=0.0)))
        worst = max(worst, float(np.max(self.lo - v, initial=0.0)))
        worst = max(worst, float(np.max(v - self.hi, initial=0.0)))
        return worst


def build_formulation(
    instance: Instance,
    variant: Variant = Variant.DECOMPOSED,
    level: Level = Level.DNN,
    strict_diag: bool = True,
) -> ConicProgram:
    """Assemble the lifted relaxation of one instance.

    ``strict_diag=False`` drops the binary diagonal rows X_ii = x_i at the
    PSD-only level, mirroring formulations that leave them out there.
    """
    sf_ineq = build_standard_form(instance, FormMode.INEQUALITY)
    if variant is Variant.CPP_EQ:
        sf = build_standard_form(instance, FormMode.EQUALITY)
        cliques = [global_clique(sf)]
    elif variant is Variant.CPP_INEQ:
        sf = sf_ineq
        cliques = [global_clique(sf)]
    else:
        sf = sf_ineq
        cliques = enumerate_cliques(sf)
    registry = register_entries(cliques, sf)
    ops = build_selection_ops(cliques, registry)
    n_slots = registry.n_slots

    one = registry.one_slot
    poly_eq: list[Row] = [Row((one,), (1.0,), 1.0, ("one",))]
    for row in sf.equalities:
        if not row.idx:
            continue
        poly_eq.append(
            Row(
                tuple(registry.singleton(j) for j in row.idx),
                row.val,
                row.rhs,
                row.tag,
            )
        )
    poly_eq.extend(lift_equalities(sf.equalities, registry))
    keep_diag = strict_diag or level is not Level.SDP
    if keep_diag:
        for j in sf.binary_set:
            poly_eq.append(
                Row(
                    (registry.pair(j, j), registry.singleton(j)),
                    (1.0, -1.0),
                    0.0,
                    ("diag_bin", j),
                )
            )

    poly_ineq: list[Row] = []
    if variant is not Variant.CPP_EQ:
        for row in sf.inequalities:
            poly_ineq.append(
                Row(
                    tuple(registry.singleton(j) for j in row.idx),
                    row.val,
                    row.rhs,
                    row.tag,
                )
            )
        for j in sf.continuous_set:
            poly_ineq.append(
                Row(
                    (registry.pair(j, j), registry.singleton(j)),
                    (1.0, -1.0),
                    0.0,
                    ("diag_cont", j),
                )
            )
    if level is Level.DNN_RLT:
        poly_ineq.extend(generate_rlt(sf_ineq, registry))

    # boxes: [0,1] everywhere, except lifted entries at the PSD-only level,
    # which keep validity with sign-free entries in [-1, 1]
    lo = np.zeros(n_slots)
    hi = np.ones(n_slots)
    if level is Level.SDP:
        lo[1 + registry.n_base :] = -1.0

    cost = np.zeros(n_slots)
    cost[1 : 1 + registry.n_base] = sf.objective

    quad_mult = np.zeros(n_slots)
    for op in ops:
        quad_mult += op.multiplicity()

    return ConicProgram(
        variant=variant,
        level=level,
        instance=instance,
        sf=sf,
        registry=registry,
        cliques=cliques,
        ops=ops,
        n_slots=n_slots,
        cost=cost,
        poly_eq=poly_eq,
        poly_ineq=poly_ineq,
        lo=lo,
        hi=hi,
        quad_mult=quad_mult,
        strict_diag=strict_diag,
    )


def export_text(program: ConicProgram) -> str:
    """Plain-text sparse dump: header with dims and cliques, one line per row."""
    lines = [
        f"variant {program.variant.value}",
        f"level {program.level.value}",
        f"slots {program.n_slots}",
        f"cliques {len(program.cliques)}",
    ]
    for clique in program.cliques:
        kind = ":".join(str(k) for k in clique.kind)
        members = " ".join(str(m) for m in clique.members)
        lines.append(f"clique {kind} dim {clique.dim} members {members}")
    lines.append("cost " + " ".join(f"{j}:{c:.17g}" for j, c in enumerate(program.cost) if c))
    for row in program.poly_eq:
        terms = " ".join(f"{j}:{v:.17g}" for j, v in zip(row.idx, row.val))
        lines.append(f"eq {row.rhs:.17g} {terms}")
    for row in program.poly_ineq:
        terms = " ".join(f"{j}:{v:.17g}" for j, v in zip(row.idx, row.val))
        lines.append(f"le {row.rhs:.17g} {terms}")
    lines.append(
        "bounds "
        + " ".join(
            f"{j}:{program.lo[j]:.17g}:{program.hi[j]:.17g}" for j in range(program.n_slots)
        )
    )
    return "\n".join(lines) + "\n"
