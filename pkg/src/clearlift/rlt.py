"""Valid inequalities from products of linear constraints, linearized in the
lifted entries.

Four families, each restricted to registered pair slots:

* pairwise box products for every registered pair (i, j):
  X_ij <= x_i, X_ij <= x_j, X_ij >= x_i + x_j - 1;
* products of two block-order rows (ratio, exclusive-group, linked-order)
  with each other, including squares;
* products of each block-order row with the bounds 0 <= x_k <= 1 of
  structural variables whose pairs with the row support are registered;
* the profile-block activation products r u <= X_{x,u} <= u.

Rows are deduplicated by a canonical coefficient hash.
"""

from __future__ import annotations

import numpy as np

from .lifting import EntryRegistry
from .standard_form import FormMode, Row, StandardForm

__all__ = ["generate_rlt"]

_BLOCK_TAGS = ("ratio_lo", "ratio_hi", "excl", "link")


def _geq_form(row: Row) -> tuple[dict[int, float], float]:
    """Rewrite the <=-row w.x <= f as a.x - b >= 0 with a = -w, b = -f."""
    return {j: -v for j, v in zip(row.idx, row.val)}, -row.rhs


def _product_row(a1: dict[int, float], b1: float, a2: dict[int, float], b2: float,
                 registry: EntryRegistry, tag: tuple) -> Row | None:
    """Lift (a1.x - b1)(a2.x - b2) >= 0; None when a needed pair is missing."""
    quad: dict[int, float] = {}
    for i, ai in a1.items():
        for j, aj in a2.items():
            slot = registry.try_pair(i, j)
            if slot is None:
                return None
            quad[slot] = quad.get(slot, 0.0) + ai * aj
    lin: dict[int, float] = {}
    for i, ai in a1.items():
        lin[registry.singleton(i)] = lin.get(registry.singleton(i), 0.0) - b2 * ai
    for j, aj in a2.items():
        lin[registry.singleton(j)] = lin.get(registry.singleton(j), 0.0) - b1 * aj
    # quad + lin + b1 b2 >= 0  ->  -(quad + lin) <= b1 b2
    coeffs: dict[int, float] = {}
    for slot, c in list(quad.items()) + list(lin.items()):
        coeffs[slot] = coeffs.get(slot, 0.0) - c
    items = sorted((s, c) for s, c in coeffs.items() if c != 0.0)
    return Row(tuple(s for s, _ in items), tuple(c for _, c in items), b1 * b2, tag)


def _canonical_key(row: Row):
    scale = max(abs(v) for v in row.val) if row.val else 1.0
    return (
        row.idx,
        tuple(round(v / scale, 12) for v in row.val),
        round(row.rhs / scale, 12),
    )


def generate_rlt(sf: StandardForm, registry: EntryRegistry) -> list[Row]:
    if sf.mode is not FormMode.INEQUALITY:
        raise ValueError("RLT rows are generated from the inequality-mode form")
    rows: list[Row] = []

    # pairwise lifted box bounds over every registered pair
    for (i, j) in registry.pairs_sorted():
        s_ij = registry.pair(i, j)
        s_i, s_j = registry.singleton(i), registry.singleton(j)
        rows.append(Row((s_ij, s_i), (1.0, -1.0), 0.0, ("rlt_ub", i, j)))
        if i != j:
            rows.append(Row((s_ij, s_j), (1.0, -1.0), 0.0, ("rlt_ub", j, i)))
            rows.append(Row((s_i, s_j, s_ij), (1.0, 1.0, -1.0), 1.0, ("rlt_lb", i, j)))
        else:
            rows.append(Row((s_i, s_ij), (2.0, -1.0), 1.0, ("rlt_lb", i, i)))

    block_rows = [r for r in sf.inequalities if r.tag[0] in _BLOCK_TAGS]
    geq = [(_geq_form(r), r.tag) for r in block_rows]

    # products of block-order rows with each other (squares included)
    for p in range(len(geq)):
        (a1, b1), t1 = geq[p]
        for q in range(p, len(geq)):
            (a2, b2), t2 = geq[q]
            row = _product_row(a1, b1, a2, b2, registry, ("rlt_bb", t1, t2))
            if row is not None:
                rows.append(row)

    # products of block-order rows with structural variable bounds
    for (a1, b1), t1 in geq:
        for k in range(sf.n_structural):
            lo_ok = all(registry.try_pair(i, k) is not None for i in a1)
            if not lo_ok:
                continue
            row = _product_row(a1, b1, {k: 1.0}, 0.0, registry, ("rlt_bx_lo", t1, k))
            if row is not None:
                rows.append(row)
            row = _product_row(a1, b1, {k: -1.0}, -1.0, registry, ("rlt_bx_hi", t1, k))
            if row is not None:
                rows.append(row)

    # profile-block activation products r u <= X_{x,u} <= u
    for r in block_rows:
        if r.tag[0] != "ratio_lo":
            continue
        u_idx, x_idx = r.idx  # built as (u, x_b) with values (r, -1)
        ratio = r.val[0]
        s_xu = registry.try_pair(x_idx, u_idx)
        if s_xu is None:
            continue
        s_u = registry.singleton(u_idx)
        rows.append(Row((s_u, s_xu), (ratio, -1.0), 0.0, ("rlt_big_m_lo", r.tag[1])))
        rows.append(Row((s_xu, s_u), (1.0, -1.0), 0.0, ("rlt_big_m_hi", r.tag[1])))

    seen = set()
    unique: list[Row] = []
    for row in rows:
        key = _canonical_key(row)
        if key not in seen:
            seen.add(key)
            unique.append(row)
    return unique
