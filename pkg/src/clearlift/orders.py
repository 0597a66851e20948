"""Domain types for market orders and clearing instances.

Sign convention: quantities are signed per period, demand > 0 and supply < 0,
so the per-period balance reads sum(q * x) = 0 and the welfare coefficient of
an acceptance variable is price * quantity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = [
    "ElementaryOrder",
    "BlockOrder",
    "FlexibleBid",
    "Instance",
    "instance_to_json",
    "instance_from_json",
]


def _as_floats(values) -> tuple[float, ...]:
    return tuple(float(v) for v in values)


@dataclass(frozen=True)
class ElementaryOrder:
    """Divisible per-period order with acceptance fraction in [0, 1].

    ``load_gradient``, when present, is a pair ``(g_up, g_down)`` bounding the
    change of the accepted quantity between consecutive periods; such orders
    belong to the load-gradient set.
    """

    id: str
    quantities: tuple[float, ...]
    prices: tuple[float, ...]
    load_gradient: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "quantities", _as_floats(self.quantities))
        object.__setattr__(self, "prices", _as_floats(self.prices))
        if len(self.quantities) != len(self.prices):
            raise ValueError(f"order {self.id}: quantities/prices length mismatch")
        if all(q == 0.0 for q in self.quantities):
            raise ValueError(f"order {self.id}: all-zero quantity vector")
        if self.load_gradient is not None:
            g_up, g_down = (float(g) for g in self.load_gradient)
            if g_up < 0 or g_down < 0:
                raise ValueError(f"order {self.id}: load gradients must be >= 0")
            object.__setattr__(self, "load_gradient", (g_up, g_down))

    @property
    def has_load_gradient(self) -> bool:
        return self.load_gradient is not None


@dataclass(frozen=True)
class BlockOrder:
    """Multi-period order accepted as one unit via a fraction x in [0, 1].

    Profile blocks carry a binary activation u with ``min_ratio * u <= x <= u``;
    regular blocks have ``min_ratio == 1`` and no binary. A nonempty ``parents``
    set marks this order as a linked child that can only be accepted up to the
    total acceptance of its parents.
    """

    id: str
    profile: tuple[float, ...]
    price: float
    min_ratio: float = 1.0
    is_profile_block: bool = False
    exclusive_group: str | None = None
    parents: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "profile", _as_floats(self.profile))
        object.__setattr__(self, "price", float(self.price))
        object.__setattr__(self, "min_ratio", float(self.min_ratio))
        object.__setattr__(self, "parents", frozenset(self.parents))
        if not 0.0 < self.min_ratio <= 1.0:
            raise ValueError(f"block {self.id}: min_ratio must be in (0, 1]")
        if all(q == 0.0 for q in self.profile):
            raise ValueError(f"block {self.id}: all-zero profile")
        if not self.is_profile_block and self.min_ratio != 1.0:
            raise ValueError(f"block {self.id}: regular blocks use min_ratio = 1")


@dataclass(frozen=True)
class FlexibleBid:
    """Order accepted in full in at most one period of the horizon."""

    id: str
    quantity: float
    price: float

    def __post_init__(self):
        object.__setattr__(self, "quantity", float(self.quantity))
        object.__setattr__(self, "price", float(self.price))
        if self.quantity == 0.0:
            raise ValueError(f"flexible bid {self.id}: quantity must be nonzero")


@dataclass(frozen=True)
class Instance:
    """One clearing problem: all orders plus the trading horizon.

    The all-zero acceptance vector is always feasible (empty market), so every
    valid instance is feasible. Immutable after construction; safe to share
    across concurrent solver runs.
    """

    horizon: int
    elementary: tuple[ElementaryOrder, ...] = ()
    blocks: tuple[BlockOrder, ...] = ()
    flexible: tuple[FlexibleBid, ...] = ()
    seed: int = 0
    group_tag: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "elementary", tuple(self.elementary))
        object.__setattr__(self, "blocks", tuple(self.blocks))
        object.__setattr__(self, "flexible", tuple(self.flexible))
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        for order in self.elementary:
            if len(order.quantities) != self.horizon:
                raise ValueError(f"order {order.id}: horizon mismatch")
        block_ids = [b.id for b in self.blocks]
        if len(set(block_ids)) != len(block_ids):
            raise ValueError("duplicate block ids")
        known = set(block_ids)
        for b in self.blocks:
            if len(b.profile) != self.horizon:
                raise ValueError(f"block {b.id}: horizon mismatch")
            for p in b.parents:
                if p not in known:
                    raise ValueError(f"block {b.id}: unknown parent {p}")
        self._check_parent_acyclic()

    def _check_parent_acyclic(self):
        parents = {b.id: set(b.parents) for b in self.blocks}
        state: dict[str, int] = {}  # 0 = visiting, 1 = done

        def visit(node: str, stack: list[str]):
            if state.get(node) == 1:
                return
            if state.get(node) == 0:
                raise ValueError(f"cyclic parent relation through block {node}")
            state[node] = 0
            for p in parents[node]:
                visit(p, stack)
            state[node] = 1

        for b in self.blocks:
            visit(b.id, [])

    @property
    def load_gradient_orders(self) -> tuple[int, ...]:
        """Indices into ``elementary`` of orders with load-gradient limits."""
        return tuple(i for i, o in enumerate(self.elementary) if o.has_load_gradient)

    @property
    def profile_blocks(self) -> tuple[int, ...]:
        """Indices into ``blocks`` of profile blocks (the ones carrying binaries)."""
        return tuple(i for i, b in enumerate(self.blocks) if b.is_profile_block)

    @property
    def exclusive_groups(self) -> dict[str, tuple[int, ...]]:
        groups: dict[str, list[int]] = {}
        for i, b in enumerate(self.blocks):
            if b.exclusive_group is not None:
                groups.setdefault(b.exclusive_group, []).append(i)
        return {g: tuple(v) for g, v in sorted(groups.items())}

    @property
    def linked_children(self) -> tuple[int, ...]:
        return tuple(i for i, b in enumerate(self.blocks) if b.parents)


# One JSON document per instance; reals are serialized as repr() strings
# (17 significant digits) so that load(dump(x)) is bit-stable.


def _num(x: float) -> str:
    return repr(float(x))


def instance_to_json(instance: Instance) -> str:
    doc = {
        "horizon": instance.horizon,
        "seed": instance.seed,
        "group": instance.group_tag,
        "elementary": [
            {
                "id": o.id,
                "quantities": [_num(q) for q in o.quantities],
                "prices": [_num(p) for p in o.prices],
                "load_gradient": (
                    None
                    if o.load_gradient is None
                    else {"g_up": _num(o.load_gradient[0]), "g_down": _num(o.load_gradient[1])}
                ),
            }
            for o in instance.elementary
        ],
        "blocks": [
            {
                "id": b.id,
                "profile": [_num(q) for q in b.profile],
                "price": _num(b.price),
                "min_ratio": _num(b.min_ratio),
                "is_profile_block": b.is_profile_block,
                "exclusive_group": b.exclusive_group,
                "parents": sorted(b.parents),
            }
            for b in instance.blocks
        ],
        "flexible": [
            {"id": f.id, "quantity": _num(f.quantity), "price": _num(f.price)}
            for f in instance.flexible
        ],
    }
    return json.dumps(doc, indent=2)


def instance_from_json(text: str) -> Instance:
    doc = json.loads(text)
    elementary = tuple(
        ElementaryOrder(
            id=o["id"],
            quantities=tuple(float(q) for q in o["quantities"]),
            prices=tuple(float(p) for p in o["prices"]),
            load_gradient=(
                None
                if o.get("load_gradient") is None
                else (float(o["load_gradient"]["g_up"]), float(o["load_gradient"]["g_down"]))
            ),
        )
        for o in doc["elementary"]
    )
    blocks = tuple(
        BlockOrder(
            id=b["id"],
            profile=tuple(float(q) for q in b["profile"]),
            price=float(b["price"]),
            min_ratio=float(b["min_ratio"]),
            is_profile_block=b["is_profile_block"],
            exclusive_group=b.get("exclusive_group"),
            parents=frozenset(b.get("parents", ())),
        )
        for b in doc["blocks"]
    )
    flexible = tuple(
        FlexibleBid(id=f["id"], quantity=float(f["quantity"]), price=float(f["price"]))
        for f in doc["flexible"]
    )
    return Instance(
        horizon=int(doc["horizon"]),
        elementary=elementary,
        blocks=blocks,
        flexible=flexible,
        seed=int(doc.get("seed", 0)),
        group_tag=doc.get("group"),
    )
