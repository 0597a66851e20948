"""Seeded synthetic instance generator for the five benchmark groups.

Per-period order counts per group (elementary / regular blocks / profile
blocks / flexible bids):

    G1: 2/4/4/2   G2: 2/4/4/4   G3: 2/8/8/2   G4: 2/8/8/8   G5: 4/4/4/4

Prices are uniform in [1, 100] and quantity magnitudes uniform in [5, 50];
half the elementary orders are demand-signed and half supply-signed. One
elementary supply order carries load-gradient limits (40% of its largest
per-period quantity), block profiles span a random contiguous window of at
least two periods, profile blocks draw their minimum ratio from [0.2, 0.8],
one exclusive group covers half the regular blocks, and the second profile
block is linked to the first as a child order.
"""

from __future__ import annotations

import numpy as np

from .orders import BlockOrder, ElementaryOrder, FlexibleBid, Instance

__all__ = ["GROUPS", "generate"]

# group -> (n_elementary, n_regular_blocks, n_profile_blocks, n_flexible)
GROUPS: dict[str, tuple[int, int, int, int]] = {
    "G1": (2, 4, 4, 2),
    "G2": (2, 4, 4, 4),
    "G3": (2, 8, 8, 2),
    "G4": (2, 8, 8, 8),
    "G5": (4, 4, 4, 4),
}

_PRICE = (1.0, 100.0)
_QTY = (5.0, 50.0)
_RATIO = (0.2, 0.8)


def generate(group: str, horizon: int, seed: int) -> Instance:
    """Generate one instance; deterministic for fixed (group, horizon, seed)."""
    if group not in GROUPS:
        raise ValueError(f"unknown group {group!r}; expected one of {sorted(GROUPS)}")
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    n_e, n_rb, n_pb, n_f = GROUPS[group]
    gi = sorted(GROUPS).index(group)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), gi, int(horizon)]))

    lg_order = n_e // 2  # first supply order carries the load gradient
    elementary = []
    for i in range(n_e):
        sign = 1.0 if i < n_e // 2 else -1.0
        qty = sign * rng.uniform(*_QTY, size=horizon)
        prices = rng.uniform(*_PRICE, size=horizon)
        grad = None
        if i == lg_order:
            g = 0.4 * float(np.max(np.abs(qty)))
            grad = (g, g)
        elementary.append(
            ElementaryOrder(id=f"E{i}", quantities=tuple(qty), prices=tuple(prices), load_gradient=grad)
        )

    def block_profile(sign: float) -> tuple[float, ...]:
        span = int(rng.integers(2, horizon + 1))
        start = int(rng.integers(0, horizon - span + 1))
        profile = np.zeros(horizon)
        profile[start : start + span] = sign * rng.uniform(*_QTY, size=span)
        return tuple(profile)

    blocks = []
    for b in range(n_rb):
        sign = 1.0 if b % 2 == 0 else -1.0
        blocks.append(
            BlockOrder(
                id=f"RB{b}",
                profile=block_profile(sign),
                price=float(rng.uniform(*_PRICE)),
                min_ratio=1.0,
                is_profile_block=False,
                exclusive_group="eg0" if b < (n_rb + 1) // 2 else None,
            )
        )
    for b in range(n_pb):
        sign = 1.0 if b % 2 == 0 else -1.0
        blocks.append(
            BlockOrder(
                id=f"PB{b}",
                profile=block_profile(sign),
                price=float(rng.uniform(*_PRICE)),
                min_ratio=float(rng.uniform(*_RATIO)),
                is_profile_block=True,
                parents=frozenset({"PB0"}) if (b == 1 and n_pb >= 2) else frozenset(),
            )
        )

    flexible = []
    for f in range(n_f):
        sign = 1.0 if f % 2 == 0 else -1.0
        flexible.append(
            FlexibleBid(
                id=f"F{f}",
                quantity=sign * float(rng.uniform(*_QTY)),
                price=float(rng.uniform(*_PRICE)),
            )
        )

    return Instance(
        horizon=horizon,
        elementary=tuple(elementary),
        blocks=tuple(blocks),
        flexible=tuple(flexible),
        seed=int(seed),
        group_tag=group,
    )
