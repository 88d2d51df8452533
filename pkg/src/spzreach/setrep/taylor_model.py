"""Taylor models: a polynomial part over a box domain plus an interval remainder."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..polyalg import PolyExpr
from .interval import IntervalVector


@dataclass(frozen=True)
class TaylorModel:
    """``{p(x) + r : x in domain, r in remainder}`` with ``p`` vector valued."""

    polys: tuple
    remainder: IntervalVector
    domain: IntervalVector

    def __post_init__(self):
        polys = tuple(self.polys)
        object.__setattr__(self, "polys", polys)
        n = self.domain.dim
        if any(p.nvars != n for p in polys):
            raise ValueError("every polynomial must be defined over the domain variables")
        if self.remainder.dim != len(polys):
            raise ValueError("remainder dimension must equal the number of polynomials")

    @property
    def dim(self) -> int:
        return self.domain.dim

    @classmethod
    def build(cls, polys: Sequence[PolyExpr], remainder, domain) -> "TaylorModel":
        def iv(x):
            return x if isinstance(x, IntervalVector) else IntervalVector(*x)

        return cls(tuple(polys), iv(remainder), iv(domain))

    def sample(self, k: int, rng: np.random.Generator) -> np.ndarray:
        x = rng.uniform(self.domain.l, self.domain.u, size=(k, self.dim))
        r = rng.uniform(self.remainder.l, self.remainder.u, size=(k, len(self.polys)))
        vals = np.column_stack([p.eval_many(x) for p in self.polys])
        return vals + r
