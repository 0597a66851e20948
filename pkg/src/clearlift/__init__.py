"""Day-ahead market clearing with nonconvex orders: exact MILP reference,
lifted conic relaxations (SDP / DNN / DNN+RLT, global and clique-decomposed),
and a primal ADMM with certified dual bounds."""

from .orders import BlockOrder, ElementaryOrder, FlexibleBid, Instance
from .standard_form import StandardForm, build_standard_form, check_feasible, welfare
from .generator import GROUPS, generate

__all__ = [
    "BlockOrder",
    "ElementaryOrder",
    "FlexibleBid",
    "Instance",
    "StandardForm",
    "build_standard_form",
    "check_feasible",
    "welfare",
    "GROUPS",
    "generate",
]

__version__ = "0.1.0"
