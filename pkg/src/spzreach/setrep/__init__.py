"""Set representations: intervals, zonotopes, Taylor models and sparse polynomial zonotopes."""

from .ids import IdGenerator
from .interval import IntervalVector
from .zonotope import Zonotope
from .taylor_model import TaylorModel
from .polyzono import (
    PolyZonotope,
    cartesian_product,
    compact,
    empty_like,
    enclose_interval,
    enclose_template,
    enclose_zonotope,
    ensure_ids,
    eval,
    exact_add,
    from_interval,
    from_point,
    from_taylor_model,
    from_zonotope,
    linear_map,
    merge_id,
    minkowski_sum,
    partial_eval,
    projected_polynomial,
    prune_zero_rows,
    quadratic_map,
    range_along,
    reduce,
    remove_independent,
    restrict,
    restructure,
    support_function,
    translate,
    vol_ratio,
)
from .serialize import from_json, to_json

__all__ = [
    "IdGenerator",
    "IntervalVector",
    "Zonotope",
    "TaylorModel",
    "PolyZonotope",
    "cartesian_product",
    "compact",
    "empty_like",
    "enclose_interval",
    "enclose_template",
    "enclose_zonotope",
    "ensure_ids",
    "eval",
    "exact_add",
    "from_interval",
    "from_point",
    "from_taylor_model",
    "from_zonotope",
    "linear_map",
    "merge_id",
    "minkowski_sum",
    "partial_eval",
    "projected_polynomial",
    "prune_zero_rows",
    "quadratic_map",
    "range_along",
    "reduce",
    "remove_independent",
    "restrict",
    "restructure",
    "support_function",
    "translate",
    "vol_ratio",
    "from_json",
    "to_json",
]
