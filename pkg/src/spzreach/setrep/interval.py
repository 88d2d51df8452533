"""Axis-aligned boxes."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class IntervalVector:
    """The box ``{x : l <= x <= u}``."""

    l: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        l = np.array(self.l, dtype=float).reshape(-1)
        u = np.array(self.u, dtype=float).reshape(-1)
        if l.shape != u.shape:
            raise ValueError("bound vectors differ in length")
        if np.any(np.isnan(l)) or np.any(np.isnan(u)):
            raise ValueError("NaN bound")
        if np.any(l > u):
            raise ValueError("lower bound exceeds upper bound")
        l.flags.writeable = False
        u.flags.writeable = False
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "u", u)

    @classmethod
    def from_center_radius(cls, c, r) -> "IntervalVector":
        c = np.asarray(c, dtype=float)
        r = np.abs(np.asarray(r, dtype=float))
        return cls(c - r, c + r)

    @property
    def dim(self) -> int:
        return self.l.size

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.l + self.u)

    @property
    def radius(self) -> np.ndarray:
        return 0.5 * (self.u - self.l)

    @property
    def width(self) -> np.ndarray:
        return self.u - self.l

    def volume(self) -> float:
        return float(np.prod(self.width))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.l)) and np.all(np.isfinite(self.u)))

    def contains(self, x, tol: float = 1e-9) -> bool:
        x = np.asarray(x, dtype=float)
        slack = tol * (1.0 + np.abs(x))
        return bool(np.all(x >= self.l - slack) and np.all(x <= self.u + slack))

    def contains_interval(self, other: "IntervalVector", tol: float = 0.0) -> bool:
        return bool(np.all(other.l >= self.l - tol) and np.all(other.u <= self.u + tol))

    def hull(self, other: "IntervalVector") -> "IntervalVector":
        return IntervalVector(np.minimum(self.l, other.l), np.maximum(self.u, other.u))

    def to_zonotope(self):
        from .zonotope import Zonotope

        return Zonotope(self.center, np.diag(self.radius))

    def __eq__(self, other):
        if not isinstance(other, IntervalVector):
            return NotImplemented
        return np.array_equal(self.l, other.l) and np.array_equal(self.u, other.u)

    def __repr__(self):
        return f"IntervalVector(l={self.l.tolist()}, u={self.u.tolist()})"
