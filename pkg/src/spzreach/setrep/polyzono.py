"""Sparse polynomial zonotopes and their set operations.

A sparse polynomial zonotope (SPZ) is the set

    { sum_i (prod_k alpha_k ** E[k, i]) G[:, i] + sum_j beta_j GI[:, j] }

over ``alpha, beta`` in the unit box. The dependent factors ``alpha_k`` carry
global integer identifiers ``id[k]`` so that two sets can recognize shared
factors; the independent factors ``beta_j`` are local to one set.

All operations are pure functions returning new immutable objects.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..polyalg import PolyExpr, RangeBound, bound as poly_bound, unit_box_ranges
from .ids import IdGenerator
from .interval import IntervalVector
from .zonotope import Zonotope

EVAL_TOL = 1e-12


def _ro(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class PolyZonotope:
    """Sparse polynomial zonotope ``{G, GI, E, id}``.

    Parameters
    ----------
    G : array_like, shape (n, h)
        Dependent generators. Columns whose exponent column is all zero act
        as (parts of) the constant offset.
    GI : array_like, shape (n, q)
        Independent generators; ``q`` may be zero.
    E : array_like of int, shape (p, h)
        Exponent matrix.
    id : array_like of int, shape (p,)
        Unique positive identifiers of the dependent factors.
    """

    G: np.ndarray
    GI: np.ndarray
    E: np.ndarray
    id: np.ndarray

    def __post_init__(self):
        G = np.array(self.G, dtype=float)
        if G.ndim == 1:
            G = G.reshape(-1, 1) if G.size else G.reshape(0, 0)
        n = G.shape[0]
        GI = np.array(self.GI, dtype=float)
        if GI.size == 0:
            GI = np.zeros((n, 0))
        elif GI.ndim == 1:
            GI = GI.reshape(n, -1)
        if GI.shape[0] != n:
            if G.shape[1] == 0 and G.shape[0] == 0:
                n = GI.shape[0]
                G = np.zeros((n, 0))
            else:
                raise ValueError("G and GI differ in row count")
        ids = np.array(self.id, dtype=np.int64).reshape(-1)
        E = np.array(self.E, dtype=np.int64)
        if E.size == 0:
            E = np.zeros((ids.size, G.shape[1]), dtype=np.int64)
        if E.ndim == 1:
            E = E.reshape(ids.size, -1)
        if E.shape != (ids.size, G.shape[1]):
            raise ValueError(
                f"exponent matrix has shape {E.shape}, expected {(ids.size, G.shape[1])}"
            )
        if np.any(E < 0):
            raise ValueError("negative exponent")
        if np.unique(ids).size != ids.size:
            raise ValueError("duplicate identifiers")
        if np.any(ids < 1):
            raise ValueError("identifiers must be positive")
        object.__setattr__(self, "G", _ro(G))
        object.__setattr__(self, "GI", _ro(GI))
        object.__setattr__(self, "E", _ro(E))
        object.__setattr__(self, "id", _ro(ids))

    # shape -----------------------------------------------------------------
    @property
    def n(self) -> int:
        return self.G.shape[0]

    @property
    def h(self) -> int:
        return self.G.shape[1]

    @property
    def q(self) -> int:
        return self.GI.shape[1]

    @property
    def p(self) -> int:
        return self.E.shape[0]

    @property
    def dim(self) -> int:
        return self.n

    def constant_mask(self) -> np.ndarray:
        return ~self.E.any(axis=0)

    @property
    def offset(self) -> np.ndarray:
        """Sum of the generators with all-zero exponents."""
        return self.G[:, self.constant_mask()].sum(axis=1)

    @property
    def order(self) -> float:
        """Generator count per dimension, not counting constant columns."""
        if self.n == 0:
            return 0.0
        return (int((~self.constant_mask()).sum()) + self.q) / self.n

    def points(self, alpha: np.ndarray, beta: np.ndarray | None = None) -> np.ndarray:
        """Points for factor rows ``alpha`` (N, p) and ``beta`` (N, q)."""
        alpha = np.atleast_2d(np.asarray(alpha, dtype=float))
        N = alpha.shape[0]
        if alpha.shape[1] != self.p:
            raise ValueError("alpha has wrong length")
        mono = _monomials(alpha, self.E)
        X = mono @ self.G.T
        if self.q:
            if beta is None:
                raise ValueError("beta required for sets with independent generators")
            beta = np.atleast_2d(np.asarray(beta, dtype=float)).reshape(N, self.q)
            X = X + beta @ self.GI.T
        return X

    def sample(self, k: int, rng: np.random.Generator, extreme: float = 0.0):
        """Random ``(alpha, beta, points)``; a share ``extreme`` of factors is set to +-1."""
        alpha = rng.uniform(-1.0, 1.0, size=(k, self.p))
        beta = rng.uniform(-1.0, 1.0, size=(k, self.q))
        if extreme > 0:
            m = rng.random(alpha.shape) < extreme
            alpha[m] = np.sign(alpha[m])
            m = rng.random(beta.shape) < extreme
            beta[m] = np.sign(beta[m])
        return alpha, beta, self.points(alpha, beta)

    def __repr__(self):
        return (
            f"PolyZonotope(n={self.n}, h={self.h}, q={self.q}, p={self.p}, "
            f"id={self.id.tolist()})"
        )


def _monomials(alpha: np.ndarray, E: np.ndarray) -> np.ndarray:
    """Monomial values, shape (N, h)."""
    N = alpha.shape[0]
    mono = np.ones((N, E.shape[1]))
    for k in range(E.shape[0]):
        e = E[k]
        nz = np.nonzero(e)[0]
        if nz.size:
            mono[:, nz] *= alpha[:, k : k + 1] ** e[nz]
    return mono


def _make(G, GI, E, ids) -> PolyZonotope:
    return PolyZonotope(G, GI, E, ids)


def empty_like(n: int) -> PolyZonotope:
    """The point set {0} in ``n`` dimensions."""
    return PolyZonotope(np.zeros((n, 0)), np.zeros((n, 0)), np.zeros((0, 0), dtype=np.int64), [])


def from_point(x) -> PolyZonotope:
    x = np.asarray(x, dtype=float).reshape(-1, 1)
    return PolyZonotope(x, np.zeros((x.shape[0], 0)), np.zeros((0, 1), dtype=np.int64), [])


# ---------------------------------------------------------------------------
# representation changes


def merge_id(pz1: PolyZonotope, pz2: PolyZonotope) -> tuple[PolyZonotope, PolyZonotope]:
    """Rewrite both sets over the common identifier list.

    The merged list is ``pz1.id`` followed by the identifiers of ``pz2`` not
    present in ``pz1``.
    """
    if np.array_equal(pz1.id, pz2.id):
        return pz1, pz2
    pos1 = {int(i): k for k, i in enumerate(pz1.id)}
    novel = [int(i) for i in pz2.id if int(i) not in pos1]
    ids = np.concatenate([pz1.id, np.asarray(novel, dtype=np.int64)])
    p = ids.size
    E1 = np.zeros((p, pz1.h), dtype=np.int64)
    E1[: pz1.p] = pz1.E
    pos = {int(i): k for k, i in enumerate(ids)}
    E2 = np.zeros((p, pz2.h), dtype=np.int64)
    rows = [pos[int(i)] for i in pz2.id]
    if rows:
        E2[rows] = pz2.E
    return _make(pz1.G, pz1.GI, E1, ids), _make(pz2.G, pz2.GI, E2, ids)


def compact(pz: PolyZonotope, prune: bool = True) -> PolyZonotope:
    """Merge generators with identical exponent columns.

    Generators of duplicated columns are summed, columns whose generator
    vanishes are dropped, and (with ``prune``) all-zero exponent rows are
    removed. First-occurrence column order is preserved.
    """
    G, E = pz.G, pz.E
    if pz.h:
        _, first, inv = np.unique(E.T, axis=0, return_index=True, return_inverse=True)
        inv = inv.reshape(-1)
        if first.size < pz.h:
            order = np.argsort(first, kind="stable")
            rank = np.empty_like(order)
            rank[order] = np.arange(order.size)
            Gm = np.zeros((pz.n, first.size))
            np.add.at(Gm.T, rank[inv], G.T)
            G = Gm
            E = E[:, first[order]]
        keep = np.any(G != 0.0, axis=0)
        if not keep.all():
            G, E = G[:, keep], E[:, keep]
    out = _make(G, pz.GI, E, pz.id)
    return prune_zero_rows(out) if prune else out


def prune_zero_rows(pz: PolyZonotope, keep_ids: Sequence[int] = ()) -> PolyZonotope:
    """Drop factors that appear in no monomial (except those in ``keep_ids``)."""
    used = pz.E.any(axis=1)
    if keep_ids is not None and len(keep_ids):
        used |= np.isin(pz.id, np.asarray(keep_ids, dtype=np.int64))
    if used.all():
        return pz
    return _make(pz.G, pz.GI, pz.E[used], pz.id[used])


def ensure_ids(pz: PolyZonotope, ids: Sequence[int]) -> PolyZonotope:
    """Append zero exponent rows for identifiers in ``ids`` missing from ``pz``."""
    missing = [int(i) for i in ids if int(i) not in set(pz.id.tolist())]
    if not missing:
        return pz
    E = np.vstack([pz.E, np.zeros((len(missing), pz.h), dtype=np.int64)])
    return _make(pz.G, pz.GI, E, np.concatenate([pz.id, missing]))


def translate(pz: PolyZonotope, v) -> PolyZonotope:
    """The set shifted by the vector ``v``."""
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != pz.n:
        raise ValueError("dimension mismatch")
    const = np.nonzero(pz.constant_mask())[0]
    if const.size:
        G = pz.G.copy()
        G[:, const[0]] += v
        return _make(G, pz.GI, pz.E, pz.id)
    G = np.hstack([v.reshape(-1, 1), pz.G])
    E = np.hstack([np.zeros((pz.p, 1), dtype=np.int64), pz.E])
    return _make(G, pz.GI, E, pz.id)


def from_zonotope(z: Zonotope, idgen: IdGenerator) -> PolyZonotope:
    """Exact conversion; every generator becomes a fresh dependent factor."""
    m = z.ngens
    G = np.hstack([z.c.reshape(-1, 1), z.G])
    E = np.hstack([np.zeros((m, 1), dtype=np.int64), np.eye(m, dtype=np.int64)])
    return _make(G, np.zeros((z.dim, 0)), E, idgen.fresh(m))


def from_interval(iv: IntervalVector, idgen: IdGenerator) -> PolyZonotope:
    return from_zonotope(Zonotope(iv.center, np.diag(iv.radius)), idgen)


def from_taylor_model(tm, idgen: IdGenerator) -> PolyZonotope:
    """Set described by a Taylor model over its domain.

    The domain is mapped affinely onto the unit box so that each domain
    variable becomes one fresh dependent factor; the remainder becomes a
    diagonal set of independent generators around its midpoint.
    """
    n = tm.dim
    mid, rad = tm.domain.center, tm.domain.radius
    rows = [p.substitute_affine(mid, rad) for p in tm.polys]
    exps = np.vstack([r.exps for r in rows]) if any(len(r) for r in rows) else np.zeros((0, n), dtype=np.int64)
    if exps.shape[0]:
        uniq = np.unique(exps, axis=0)
    else:
        uniq = np.zeros((0, n), dtype=np.int64)
    col = {tuple(e): k for k, e in enumerate(uniq.tolist())}
    G = np.zeros((len(tm.polys), uniq.shape[0]))
    for i, r in enumerate(rows):
        for c, e in zip(r.coeffs, r.exps):
            G[i, col[tuple(e.tolist())]] += c
    pz = _make(G, np.zeros((len(tm.polys), 0)), uniq.T.copy(), idgen.fresh(n))
    rmid, rrad = tm.remainder.center, tm.remainder.radius
    pz = translate(pz, rmid)
    nz = np.nonzero(rrad)[0]
    GI = np.zeros((len(tm.polys), nz.size))
    GI[nz, np.arange(nz.size)] = rrad[nz]
    return compact(_make(pz.G, GI, pz.E, pz.id), prune=False)


def remove_independent(pz: PolyZonotope, idgen: IdGenerator) -> PolyZonotope:
    """Same set with every independent generator turned into a fresh dependent factor."""
    if pz.q == 0:
        return pz
    q = pz.q
    G = np.hstack([pz.G, pz.GI])
    E = np.block(
        [
            [pz.E, np.zeros((pz.p, q), dtype=np.int64)],
            [np.zeros((q, pz.h), dtype=np.int64), np.eye(q, dtype=np.int64)],
        ]
    )
    return _make(G, np.zeros((pz.n, 0)), E, np.concatenate([pz.id, idgen.fresh(q)]))


# ---------------------------------------------------------------------------
# convex enclosures


def _zono_parts(G: np.ndarray, E: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Center and generators of a zonotope enclosing the dependent part ``G, E``."""
    const = ~E.any(axis=0)
    even = ~(E % 2).any(axis=0) & ~const
    c = G[:, const].sum(axis=1) + 0.5 * G[:, even].sum(axis=1)
    gens = G[:, ~const].copy()
    gens[:, even[~const]] *= 0.5
    return c, gens


def enclose_zonotope(pz: PolyZonotope) -> Zonotope:
    """Zonotope enclosure.

    Constant columns join the center. A monomial with only even exponents
    ranges over ``[0, 1]`` and contributes half its generator to the center
    and half as a generator. All other columns and ``GI`` stay generators.
    """
    c, gens = _zono_parts(pz.G, pz.E)
    return Zonotope(c, np.hstack([gens, pz.GI]))


def projected_polynomial(pz: PolyZonotope, d) -> PolyExpr:
    """``d^T`` times the dependent polynomial, as a polynomial in the factors."""
    d = np.asarray(d, dtype=float).reshape(-1)
    return PolyExpr(pz.p, d @ pz.G, pz.E.T)


def support_function(pz: PolyZonotope, d, bounder: Callable | None = None) -> float:
    """Upper bound on ``max {d^T x : x in pz}``.

    The dependent part is bounded with the range bounder (monomial-wise
    interval arithmetic over the unit box unless ``bounder`` is given); the
    independent part contributes ``sum |d^T GI|`` exactly.
    """
    d = np.asarray(d, dtype=float).reshape(-1)
    if d.size != pz.n:
        raise ValueError("dimension mismatch")
    w = projected_polynomial(pz, d)
    hi = poly_bound(w, bounder).hi
    return float(hi + np.abs(d @ pz.GI).sum())


def enclose_interval(pz: PolyZonotope, bounder: Callable | None = None) -> IntervalVector:
    """Interval hull enclosure (support function along +-e_i)."""
    if bounder is not None:
        lo = np.empty(pz.n)
        hi = np.empty(pz.n)
        for i in range(pz.n):
            e = np.zeros(pz.n)
            e[i] = 1.0
            b = poly_bound(projected_polynomial(pz, e), bounder)
            rI = np.abs(pz.GI[i]).sum()
            lo[i], hi[i] = b.lo - rI, b.hi + rI
        return IntervalVector(lo, hi)
    mlo, mhi = unit_box_ranges(pz.E)
    G = pz.G
    lo = np.where(G >= 0, G * mlo, G * mhi).sum(axis=1)
    hi = np.where(G >= 0, G * mhi, G * mlo).sum(axis=1)
    rI = np.abs(pz.GI).sum(axis=1)
    return IntervalVector(lo - rI, hi + rI)


def enclose_template(pz: PolyZonotope, dirs, bounder: Callable | None = None):
    """Template-polyhedron enclosure ``{x : d^T x <= s(d)}`` as ``(d, s(d))`` pairs."""
    dirs = [np.asarray(d, dtype=float) for d in dirs]
    if not dirs:
        raise ValueError("at least one direction required")
    return [(d, support_function(pz, d, bounder)) for d in dirs]


def range_along(pz: PolyZonotope, d, bounder: Callable | None = None) -> RangeBound:
    """Enclosure of ``{d^T x : x in pz}``."""
    d = np.asarray(d, dtype=float)
    b = poly_bound(projected_polynomial(pz, d), bounder)
    r = np.abs(d @ pz.GI).sum()
    return RangeBound(b.lo - r, b.hi + r)


# ---------------------------------------------------------------------------
# maps and sums


def linear_map(M, pz: PolyZonotope) -> PolyZonotope:
    """Exact image under ``x -> M x``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != pz.n:
        raise ValueError(f"matrix has {M.shape[1]} columns, set dimension is {pz.n}")
    return _make(M @ pz.G, M @ pz.GI, pz.E, pz.id)


def minkowski_sum(pz: PolyZonotope, other, idgen: IdGenerator | None = None) -> PolyZonotope:
    """Minkowski sum with an SPZ or a zonotope.

    A second SPZ is treated as independent of the first: its factors are
    relabeled with fresh identifiers from ``idgen`` before concatenation.
    """
    if isinstance(other, Zonotope):
        if other.dim != pz.n:
            raise ValueError("dimension mismatch")
        G = np.hstack([pz.G, other.c.reshape(-1, 1)])
        E = np.hstack([pz.E, np.zeros((pz.p, 1), dtype=np.int64)])
        return _make(G, np.hstack([pz.GI, other.G]), E, pz.id)
    if not isinstance(other, PolyZonotope):
        raise TypeError("expected a PolyZonotope or Zonotope")
    if other.n != pz.n:
        raise ValueError("dimension mismatch")
    if idgen is None:
        idgen = IdGenerator.after(pz.id, other.id)
    else:
        idgen.reserve_above(np.concatenate([pz.id, other.id]))
    new_ids = idgen.fresh(other.p)
    E = np.block(
        [
            [pz.E, np.zeros((pz.p, other.h), dtype=np.int64)],
            [np.zeros((other.p, pz.h), dtype=np.int64), other.E],
        ]
    )
    out = _make(
        np.hstack([pz.G, other.G]),
        np.hstack([pz.GI, other.GI]),
        E,
        np.concatenate([pz.id, new_ids]),
    )
    return compact(out, prune=False)


def exact_add(pz1: PolyZonotope, pz2: PolyZonotope) -> PolyZonotope:
    """Sum that keeps shared factors shared.

    Evaluated at a common ``alpha``, the result equals the sum of the two
    sets at that ``alpha`` (with independent generators concatenated).
    """
    if pz1.n != pz2.n:
        raise ValueError("dimension mismatch")
    a, b = merge_id(pz1, pz2)
    out = _make(
        np.hstack([a.G, b.G]),
        np.hstack([a.GI, b.GI]),
        np.hstack([a.E, b.E]),
        a.id,
    )
    return compact(out, prune=False)


def cartesian_product(pz: PolyZonotope, z: Zonotope) -> PolyZonotope:
    """``pz x z``: the zonotope center becomes a constant column, its generators independent ones."""
    n, m = pz.n, z.dim
    G = np.block([[pz.G, np.zeros((n, 1))], [np.zeros((m, pz.h)), z.c.reshape(-1, 1)]])
    E = np.hstack([pz.E, np.zeros((pz.p, 1), dtype=np.int64)])
    GI = np.block([[pz.GI, np.zeros((n, z.ngens))], [np.zeros((m, pz.q)), z.G]])
    return _make(G, GI, E, pz.id)


def quadratic_map(Q, pz: PolyZonotope, idgen: IdGenerator | None = None) -> PolyZonotope:
    """Enclosure of ``{(x^T Q_1 x, ..., x^T Q_m x) : x in pz}``.

    Exact when ``pz`` has no independent generators. Otherwise the
    independent generators are temporarily treated as extra dependent
    factors and every monomial involving them is enclosed by a zonotope.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim == 2:
        Q = Q[None]
    if Q.shape[1:] != (pz.n, pz.n):
        raise ValueError(f"quadratic forms must be {pz.n}x{pz.n}")
    m = Q.shape[0]
    p, q = pz.p, pz.q
    Gh = np.hstack([pz.G, pz.GI])
    Eh = np.block(
        [
            [pz.E, np.zeros((p, q), dtype=np.int64)],
            [np.zeros((q, pz.h), dtype=np.int64), np.eye(q, dtype=np.int64)],
        ]
    )
    hh = Gh.shape[1]
    if hh == 0:
        return empty_like(m)
    iu, ju = np.triu_indices(hh)
    off = iu != ju
    Gbar = np.empty((m, iu.size))
    for i in range(m):
        M = Gh.T @ Q[i] @ Gh
        Gbar[i] = M[iu, ju] + np.where(off, M[ju, iu], 0.0)
    Ebar = Eh[:, iu] + Eh[:, ju]
    if q:
        K = Ebar[p:].any(axis=0)
        cz, Gz = _zono_parts(Gbar[:, K], Ebar[:, K])
        H = ~K
        G = np.hstack([cz.reshape(-1, 1), Gbar[:, H]])
        E = np.hstack([np.zeros((p, 1), dtype=np.int64), Ebar[:p, H]])
        out = _make(G, Gz, E, pz.id)
    else:
        out = _make(Gbar, np.zeros((m, 0)), Ebar, pz.id)
    return compact(out, prune=False)


# ---------------------------------------------------------------------------
# complexity control


def reduce(pz: PolyZonotope, rho_d: float, method: str = "girard") -> PolyZonotope:
    """Enclosure with order at most ``rho_d``.

    The smallest generators by Euclidean norm (dependent and independent
    pooled; constant columns excluded) are enclosed by a zonotope that is
    then reduced to order one and appended to the independent generators.
    """
    if rho_d < 1:
        raise ValueError("rho_d must be at least 1")
    n = pz.n
    if n == 0 or pz.order <= rho_d:
        return pz
    const = pz.constant_mask()
    dep = np.nonzero(~const)[0]
    norms = np.concatenate([np.linalg.norm(pz.G[:, dep], axis=0), np.linalg.norm(pz.GI, axis=0)])
    total = norms.size
    a = total - int(np.floor(n * (rho_d - 1)))
    if a <= 0:
        return pz
    order = np.argsort(norms, kind="stable")
    sel = np.zeros(total, dtype=bool)
    sel[order[:a]] = True
    sel_dep, sel_ind = sel[: dep.size], sel[dep.size :]
    cz, gz = _zono_parts(pz.G[:, dep[sel_dep]], pz.E[:, dep[sel_dep]])
    z = Zonotope(cz, np.hstack([gz, pz.GI[:, sel_ind]])).reduce(1, method)
    keep_cols = np.concatenate([np.nonzero(const)[0], dep[~sel_dep]])
    keep_cols.sort()
    G = np.hstack([z.c.reshape(-1, 1), pz.G[:, keep_cols]])
    E = np.hstack([np.zeros((pz.p, 1), dtype=np.int64), pz.E[:, keep_cols]])
    GI = np.hstack([pz.GI[:, ~sel_ind], z.G])
    return compact(_make(G, GI, E, pz.id))


def restructure(
    pz: PolyZonotope,
    idgen: IdGenerator,
    p_d: int | None = None,
    protected: Sequence[int] = (),
    method: str = "girard",
) -> PolyZonotope:
    """Enclosure without independent generators.

    The independent part is reduced to order one and its generators become
    fresh dependent factors. If this would exceed ``p_d`` factors, the
    unprotected factors with the smallest contribution are first folded into
    the independent part (all monomials involving them are enclosed by a
    zonotope) so that their identifiers disappear.
    """
    if pz.q == 0:
        return pz
    idgen.reserve_above(pz.id)
    n = pz.n
    drop_cols = np.zeros(pz.h, dtype=bool)
    if p_d is not None:
        excess = pz.p + n - int(p_d)
        if excess > 0:
            prot = np.isin(pz.id, np.asarray(list(protected), dtype=np.int64))
            norms = np.linalg.norm(pz.G, axis=0)
            score = (pz.E != 0) @ norms
            cand = np.nonzero(~prot)[0]
            cand = cand[np.argsort(score[cand], kind="stable")][:excess]
            if cand.size:
                drop_cols = pz.E[cand].any(axis=0)
    cz, gz = _zono_parts(pz.G[:, drop_cols], pz.E[:, drop_cols])
    z = Zonotope(cz, np.hstack([gz, pz.GI])).reduce(1, method)
    k = z.ngens
    keep = ~drop_cols
    hk = int(keep.sum())
    G = np.hstack([z.c.reshape(-1, 1), pz.G[:, keep], z.G])
    E = np.block(
        [
            [np.zeros((pz.p, 1), dtype=np.int64), pz.E[:, keep], np.zeros((pz.p, k), dtype=np.int64)],
            [np.zeros((k, 1 + hk), dtype=np.int64), np.eye(k, dtype=np.int64)],
        ]
    )
    out = _make(G, np.zeros((n, 0)), E, np.concatenate([pz.id, idgen.fresh(k)]))
    out = compact(out, prune=False)
    return prune_zero_rows(out, keep_ids=protected)


def vol_ratio(pz: PolyZonotope) -> float:
    """Volume of the independent part's box over that of the dependent part's box."""
    if pz.q == 0:
        return 0.0
    num = float(np.prod(2.0 * np.abs(pz.GI).sum(axis=1)))
    _, gens = _zono_parts(pz.G, pz.E)
    den = float(np.prod(2.0 * np.abs(gens).sum(axis=1)))
    if den == 0.0:
        return np.inf if num > 0 else 0.0
    return num / den


# ---------------------------------------------------------------------------
# evaluation


def _check_alpha(alpha: np.ndarray, expected: int) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != expected:
        raise ValueError(f"expected {expected} factor values, got {alpha.size}")
    if np.any(np.abs(alpha) > 1.0 + EVAL_TOL) or not np.all(np.isfinite(alpha)):
        raise ValueError("factor values must lie in [-1, 1]")
    return np.clip(alpha, -1.0, 1.0)


def eval(pz: PolyZonotope, alpha) -> Zonotope:  # noqa: A001 - mirrors the set operation's name
    """Zonotope obtained by fixing every dependent factor."""
    alpha = _check_alpha(alpha, pz.p)
    mono = _monomials(alpha.reshape(1, -1), pz.E)[0]
    return Zonotope(pz.G @ mono, pz.GI)


def partial_eval(pz: PolyZonotope, ids, values, compact_result: bool = True) -> PolyZonotope:
    """Fix the factors with identifiers ``ids`` to ``values``.

    Identifiers not present in ``pz`` are ignored; all other factors stay free.
    """
    ids = np.asarray(ids, dtype=np.int64).reshape(-1)
    values = _check_alpha(values, ids.size)
    rows, vals = [], []
    pos = {int(i): k for k, i in enumerate(pz.id)}
    for i, v in zip(ids, values):
        k = pos.get(int(i))
        if k is not None:
            rows.append(k)
            vals.append(v)
    if not rows:
        return pz
    rows = np.asarray(rows)
    scale = _monomials(np.asarray(vals).reshape(1, -1), pz.E[rows])[0]
    keep = np.ones(pz.p, dtype=bool)
    keep[rows] = False
    out = _make(pz.G * scale, pz.GI, pz.E[keep], pz.id[keep])
    return compact(out, prune=False) if compact_result else out


def restrict(pz: PolyZonotope, ids, lo, hi) -> PolyZonotope:
    """Subset obtained by restricting factor ``ids[k]`` to ``[lo[k], hi[k]]``.

    The restricted factors are rescaled so that the result is again
    parameterized over the unit box.
    """
    ids = list(np.asarray(ids, dtype=np.int64).reshape(-1))
    lo = np.asarray(lo, dtype=float).reshape(-1)
    hi = np.asarray(hi, dtype=float).reshape(-1)
    if np.any(lo < -1 - EVAL_TOL) or np.any(hi > 1 + EVAL_TOL) or np.any(lo > hi):
        raise ValueError("sub-box must lie inside [-1, 1]")
    mid = np.zeros(pz.p)
    rad = np.ones(pz.p)
    for i, a, b in zip(ids, lo, hi):
        k = np.nonzero(pz.id == i)[0]
        if k.size:
            mid[k[0]] = 0.5 * (a + b)
            rad[k[0]] = 0.5 * (b - a)
    cols, exps = [], []
    for i in range(pz.n):
        f = PolyExpr(pz.p, pz.G[i], pz.E.T).substitute_affine(mid, rad)
        cols.append((i, f))
        exps.append(f.exps)
    allexp = np.vstack(exps) if exps else np.zeros((0, pz.p), dtype=np.int64)
    uniq = np.unique(allexp, axis=0) if allexp.shape[0] else np.zeros((0, pz.p), dtype=np.int64)
    index = {tuple(e): k for k, e in enumerate(uniq.tolist())}
    G = np.zeros((pz.n, uniq.shape[0]))
    for i, f in cols:
        for c, e in zip(f.coeffs, f.exps):
            G[i, index[tuple(e.tolist())]] += c
    return compact(_make(G, pz.GI, uniq.T.copy(), pz.id), prune=False)
