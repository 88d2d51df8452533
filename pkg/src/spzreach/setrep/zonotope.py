"""Zonotopes ``{c + G beta : beta in [-1, 1]^m}``."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .interval import IntervalVector


@dataclass(frozen=True, eq=False)
class Zonotope:
    c: np.ndarray
    G: np.ndarray

    def __post_init__(self):
        c = np.array(self.c, dtype=float).reshape(-1)
        G = np.array(self.G, dtype=float)
        if G.size == 0:
            G = np.zeros((c.size, 0))
        if G.ndim == 1:
            G = G.reshape(c.size, -1)
        if G.shape[0] != c.size:
            raise ValueError(f"generator matrix has {G.shape[0]} rows, center has {c.size}")
        c.flags.writeable = False
        G.flags.writeable = False
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "G", G)

    @classmethod
    def point(cls, x) -> "Zonotope":
        x = np.asarray(x, dtype=float).reshape(-1)
        return cls(x, np.zeros((x.size, 0)))

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def ngens(self) -> int:
        return self.G.shape[1]

    @property
    def order(self) -> float:
        return self.ngens / self.dim if self.dim else 0.0

    def interval_hull(self) -> IntervalVector:
        r = np.abs(self.G).sum(axis=1)
        return IntervalVector(self.c - r, self.c + r)

    def support(self, d) -> float:
        d = np.asarray(d, dtype=float).reshape(-1)
        return float(d @ self.c + np.abs(d @ self.G).sum())

    def linear_map(self, M) -> "Zonotope":
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[1] != self.dim:
            raise ValueError("dimension mismatch")
        return Zonotope(M @ self.c, M @ self.G)

    def __add__(self, other):
        if isinstance(other, Zonotope):
            if other.dim != self.dim:
                raise ValueError("dimension mismatch")
            return Zonotope(self.c + other.c, np.hstack([self.G, other.G]))
        v = np.asarray(other, dtype=float).reshape(-1)
        return Zonotope(self.c + v, self.G)

    __radd__ = __add__

    def translate(self, v) -> "Zonotope":
        return self + np.asarray(v, dtype=float)

    def project(self, dims) -> "Zonotope":
        dims = list(dims)
        return Zonotope(self.c[dims], self.G[dims, :])

    def remove_zero_generators(self) -> "Zonotope":
        keep = np.any(self.G != 0.0, axis=0)
        return Zonotope(self.c, self.G[:, keep])

    def box(self) -> "Zonotope":
        """Interval hull written as a zonotope with only non-degenerate axes."""
        r = np.abs(self.G).sum(axis=1)
        nz = np.nonzero(r)[0]
        G = np.zeros((self.dim, nz.size))
        G[nz, np.arange(nz.size)] = r[nz]
        return Zonotope(self.c, G)

    def reduce(self, order: float, method: str = "girard") -> "Zonotope":
        """Bound the number of generators by ``order * dim``.

        With the Girard strategy the generators with the smallest value of
        ``||g||_1 - ||g||_inf`` are replaced by their interval hull.
        """
        if method != "girard":
            raise ValueError(f"unknown reduction method {method!r}")
        n, m = self.dim, self.ngens
        if n == 0 or m <= order * n:
            return self
        keep_count = int(np.floor(n * (order - 1)))
        a = m - keep_count
        score = np.abs(self.G).sum(axis=0) - np.abs(self.G).max(axis=0)
        idx = np.argsort(score, kind="stable")
        boxed = Zonotope(np.zeros(n), self.G[:, idx[:a]]).box()
        kept = self.G[:, np.sort(idx[a:])]
        return Zonotope(self.c, np.hstack([kept, boxed.G]))

    def polygon(self, dims=(0, 1)) -> np.ndarray:
        """Vertices (counter-clockwise) of the 2-D projection onto ``dims``."""
        z = self.project(dims).remove_zero_generators()
        c = z.c
        if z.ngens == 0:
            return c.reshape(1, 2)
        G = z.G.copy()
        flip = (G[1] < 0) | ((G[1] == 0) & (G[0] < 0))
        G[:, flip] *= -1
        ang = np.arctan2(G[1], G[0])
        G = G[:, np.argsort(ang, kind="stable")]
        start = c - G.sum(axis=1)
        steps = np.hstack([2 * G, -2 * G])
        pts = start + np.cumsum(steps, axis=1).T
        return np.vstack([start, pts[:-1]])

    def sample(self, k: int, rng: np.random.Generator, vertices: bool = False) -> np.ndarray:
        """``k`` points of the set; extreme factor values when ``vertices`` is set."""
        if vertices:
            beta = rng.choice([-1.0, 1.0], size=(k, self.ngens))
        else:
            beta = rng.uniform(-1.0, 1.0, size=(k, self.ngens))
        return self.c + beta @ self.G.T

    def __repr__(self):
        return f"Zonotope(c={self.c.tolist()}, G={self.G.tolist()})"
