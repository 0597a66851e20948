"""Sparse realization of the matrix lifting x -> (1, x, xx').

Scalar slots stand for the distinct entries of the lifted matrix: slot 0 is
the constant corner, one slot per base variable, and one slot per registered
unordered pair (i, j). In decomposed mode only pairs that occur inside some
clique are registered; overlapping cliques share slots, which enforces their
consistency exactly instead of through penalty terms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .standard_form import FormMode, Row, StandardForm

__all__ = [
    "Clique",
    "EntryRegistry",
    "SelectionOp",
    "enumerate_cliques",
    "global_clique",
    "register_entries",
    "build_selection_ops",
    "lift_equalities",
]


@dataclass(frozen=True)
class Clique:
    """One lifted submatrix: the constant corner plus ``members`` base variables."""

    kind: tuple
    members: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.members) + 1


def _role_index(sf: StandardForm):
    by_role: dict[str, list[tuple[str, int | None, int]]] = {}
    for j, (oid, role, period) in enumerate(sf.var_labels):
        by_role.setdefault(role, []).append((oid, period, j))
    return by_role


def enumerate_cliques(sf: StandardForm) -> list[Clique]:
    """The three clique families: per-period, load-gradient, block-flexible.

    Period t holds the elementary variables of t, every block acceptance and
    activation, and the flexible activations of t. Load-gradient cliques pair
    the gradient-limited variables of adjacent periods with the block
    variables (omitted when no order has gradient limits). Each flexible bid
    gets one clique with its full activation row plus the block variables.
    """
    if sf.mode is not FormMode.INEQUALITY:
        raise ValueError("cliques are enumerated on the inequality-mode form")
    roles = _role_index(sf)
    T = sf.horizon
    x_b = [j for _, _, j in roles.get("x_b", [])]
    u_pb = [j for _, _, j in roles.get("u", [])]
    blocks = x_b + u_pb
    cliques: list[Clique] = []
    for t in range(T):
        x_e_t = [j for _, period, j in roles.get("x_e", []) if period == t]
        x_f_t = [j for _, period, j in roles.get("x_fhb", []) if period == t]
        cliques.append(Clique(("period", t), tuple(x_e_t + x_b + u_pb + x_f_t)))
    lg_ids = set(sf.lg_orders)
    lg_vars = {
        (oid, period): j for oid, period, j in roles.get("x_e", []) if oid in lg_ids
    }
    if lg_ids:
        order = sorted(lg_ids)
        for t in range(1, T):
            prev = [lg_vars[(oid, t - 1)] for oid in order]
            cur = [lg_vars[(oid, t)] for oid in order]
            cliques.append(Clique(("load_gradient", t), tuple(prev + cur + blocks)))
    fhb_ids: list[str] = []
    for oid, _, _ in roles.get("x_fhb", []):
        if oid not in fhb_ids:
            fhb_ids.append(oid)
    for oid in fhb_ids:
        mine = [j for o, _, j in roles.get("x_fhb", []) if o == oid]
        cliques.append(Clique(("block_fhb", oid), tuple(mine + blocks)))
    return cliques


def global_clique(sf: StandardForm) -> Clique:
    return Clique(("global",), tuple(range(sf.n_vars)))


@dataclass(frozen=True)
class EntryRegistry:
    """Deterministic slot numbering: constant, singletons, then sorted pairs."""

    n_base: int
    pair_slots: dict[tuple[int, int], int]
    n_slots: int

    one_slot = 0

    def singleton(self, i: int) -> int:
        return 1 + i

    def pair(self, i: int, j: int) -> int:
        return self.pair_slots[(i, j) if i <= j else (j, i)]

    def try_pair(self, i: int, j: int) -> int | None:
        return self.pair_slots.get((i, j) if i <= j else (j, i))

    def pairs_sorted(self) -> list[tuple[int, int]]:
        return sorted(self.pair_slots)


def register_entries(cliques: list[Clique], sf: StandardForm) -> EntryRegistry:
    """Register the pair slots occurring in some clique (all pairs when one
    clique spans every variable)."""
    pairs: set[tuple[int, int]] = set()
    for clique in cliques:
        members = sorted(clique.members)
        for a_pos, i in enumerate(members):
            for j in members[a_pos:]:
                pairs.add((i, j))
    ordered = sorted(pairs)
    base = 1 + sf.n_vars
    return EntryRegistry(
        n_base=sf.n_vars,
        pair_slots={p: base + k for k, p in enumerate(ordered)},
        n_slots=base + len(ordered),
    )


class SelectionOp:
    """Linear map between the scalar-slot vector and one clique matrix.

    ``apply`` scatters slots into a symmetric dim x dim matrix; ``adjoint``
    accumulates matrix entries back onto slots with multiplicity 2 on
    off-diagonal positions, so <apply(v), M> == <v, adjoint(M)> exactly.
    """

    def __init__(self, clique: Clique, registry: EntryRegistry):
        self.clique = clique
        dim = clique.dim
        self.dim = dim
        rows: list[int] = []
        cols: list[int] = []
        placements: list[tuple[int, int, int, int]] = []  # (p, q, slot, mult)
        idx = (registry.one_slot,) + tuple(registry.singleton(i) for i in clique.members)
        base = [-1] + list(clique.members)
        for p in range(dim):
            for q in range(p, dim):
                if p == 0:
                    slot = idx[q]
                else:
                    slot = registry.pair(base[p], base[q])
                mult = 1 if p == q else 2
                placements.append((p, q, slot, mult))
                rows.append(p * dim + q)
                cols.append(slot)
                if p != q:
                    rows.append(q * dim + p)
                    cols.append(slot)
        self.placements = placements
        self.scatter = sp.csr_matrix(
            (np.ones(len(rows)), (rows, cols)), shape=(dim * dim, registry.n_slots)
        )
        self.gather = self.scatter.T.tocsr()

    def apply(self, v: np.ndarray) -> np.ndarray:
        return (self.scatter @ v).reshape(self.dim, self.dim)

    def adjoint(self, m: np.ndarray) -> np.ndarray:
        if m.shape != (self.dim, self.dim):
            raise ValueError(f"matrix shape {m.shape} != clique dim {self.dim}")
        return self.gather @ m.reshape(-1)

    def multiplicity(self) -> np.ndarray:
        """Per-slot count of matrix cells, i.e. diag of adjoint(apply(.))."""
        out = np.zeros(self.scatter.shape[1])
        for _, _, slot, mult in self.placements:
            out[slot] += mult
        return out


def build_selection_ops(cliques: list[Clique], registry: EntryRegistry) -> list[SelectionOp]:
    return [SelectionOp(c, registry) for c in cliques]


def lift_equalities(rows: tuple[Row, ...], registry: EntryRegistry) -> list[Row]:
    """Squared-equality lifts: a'x = b becomes <aa', X> = b^2 over pair slots.

    Off-diagonal coefficients carry the fold factor 2. Rows with empty support
    lift to 0 = 0 and are dropped. Every referenced pair must be registered;
    balance rows always are, because their support lies inside one period
    clique.
    """
    out: list[Row] = []
    for row in rows:
        if not row.idx:
            continue
        idx: list[int] = []
        val: list[float] = []
        support = sorted(zip(row.idx, row.val))
        for a_pos, (i, ai) in enumerate(support):
            for j, aj in support[a_pos:]:
                slot = registry.try_pair(i, j)
                if slot is None:
                    raise KeyError(f"pair ({i}, {j}) not registered for lifted row {row.tag}")
                coeff = ai * aj if i == j else 2.0 * ai * aj
                idx.append(slot)
                val.append(coeff)
        out.append(Row(tuple(idx), tuple(val), row.rhs**2, ("lift",) + row.tag))
    return out
