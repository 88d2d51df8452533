"""Using the dependency on the initial factors after the reachable sets are computed.

Because every stored set keeps the identifiers of the initial-set factors,
fixing those factors to the parameter of a single initial state yields an
enclosure of that state's reachable set without re-running the analysis.
This module builds falsification, safe-set partitioning and box
optimization on top of that extraction.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from . import setrep as S
from .dynamics import NonlinearSystem, Trajectory, simulate
from .polyalg import PolyExpr, differentiate, interval_bound
from .reach import ReachResult
from .setrep import PolyZonotope, Zonotope

MEMBERSHIP_TOL = 1e-9


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class HalfspaceSpec:
    """Safety specification ``a^T x <= b``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        if not np.any(a != 0):
            raise ValueError("normal vector must be nonzero")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @classmethod
    def parse(cls, text: str) -> "HalfspaceSpec":
        """Parse ``"a=1,2;b=6.4"``."""
        m = re.fullmatch(r"\s*a\s*=\s*([^;]+);\s*b\s*=\s*([^;]+?)\s*", text)
        if not m:
            raise ValueError(f"cannot parse specification {text!r}; expected 'a=v1,v2,...;b=value'")
        try:
            a = [float(v) for v in m.group(1).split(",")]
            b = float(m.group(2))
        except ValueError as exc:
            raise ValueError(f"non-numeric entry in specification {text!r}") from exc
        return cls(a, b)

    def __str__(self):
        return "a=" + ",".join(repr(float(v)) for v in self.a) + f";b={self.b!r}"


@dataclass(frozen=True, eq=False)
class AlphaBox:
    """Axis-aligned sub-box of the factor domain ``[-1, 1]^p``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lo, dtype=float).reshape(-1)
        hi = np.array(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise ValueError("bound vectors differ in length")
        if np.any(lo < -1 - 1e-12) or np.any(hi > 1 + 1e-12) or np.any(lo > hi):
            raise ValueError("box must satisfy -1 <= lo <= hi <= 1")
        object.__setattr__(self, "lo", np.clip(lo, -1, 1))
        object.__setattr__(self, "hi", np.clip(hi, -1, 1))

    @classmethod
    def unit(cls, p: int) -> "AlphaBox":
        return cls(-np.ones(p), np.ones(p))

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def to_dict(self) -> dict:
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


@dataclass(frozen=True, eq=False)
class FalsificationResult:
    alpha_star: np.ndarray
    x0_star: np.ndarray
    objective: float
    g_value: float
    margin: float
    verified: bool
    witness: Trajectory | None
    violation: float
    optimizer_time: float = 0.0
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# membership


def zonotope_gauge(z: Zonotope, x) -> float:
    """``min ||beta||_inf`` subject to ``c + G beta = x`` (``inf`` if infeasible)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    d = x - z.c
    q = z.ngens
    if q == 0:
        return 0.0 if np.allclose(d, 0.0, atol=MEMBERSHIP_TOL) else np.inf
    # variables [beta, t]; minimize t
    cost = np.zeros(q + 1)
    cost[-1] = 1.0
    A_eq = np.hstack([z.G, np.zeros((z.dim, 1))])
    eye = np.eye(q)
    ones = np.ones((q, 1))
    A_ub = np.vstack([np.hstack([eye, -ones]), np.hstack([-eye, -ones])])
    b_ub = np.zeros(2 * q)
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=d, bounds=[(None, None)] * q + [(0, None)], method="highs")
    if res.status == 2:
        return np.inf
    if res.status != 0:
        raise RuntimeError(f"membership LP failed: {res.message}")
    return float(res.fun)


def point_in_zonotope(z: Zonotope, x, tol: float = MEMBERSHIP_TOL) -> bool:
    """Whether ``x`` lies in ``z`` (up to ``tol``)."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != z.dim:
        raise ValueError("dimension mismatch")
    hull = z.interval_hull()
    if not hull.contains(x, tol):
        return False
    return zonotope_gauge(z, x) <= 1.0 + tol


def zonotope_gauges(z: Zonotope, X) -> np.ndarray:
    """Gauge of each row of ``X`` with respect to ``z`` (``<= 1`` means inside).

    Full-dimensional planar zonotopes use their facet normals; everything
    else solves one linear program per point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != z.dim:
        raise ValueError("dimension mismatch")
    gz = z.remove_zero_generators()
    if z.dim == 2 and gz.ngens > 0 and np.linalg.matrix_rank(gz.G) == 2:
        N = np.vstack([-gz.G[1], gz.G[0]])
        norms = np.linalg.norm(N, axis=0)
        N = N[:, norms > 0] / norms[norms > 0]
        lim = np.abs(N.T @ gz.G).sum(axis=1)
        return (np.abs((X - gz.c) @ N) / lim).max(axis=1)
    return np.array([zonotope_gauge(z, x) for x in X])


def points_in_zonotope(z: Zonotope, X, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
    """Vectorized membership for the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    hull = z.interval_hull()
    slack = tol * (1.0 + np.abs(X))
    in_hull = np.all((X >= hull.l - slack) & (X <= hull.u + slack), axis=1)
    out = np.zeros(X.shape[0], dtype=bool)
    if in_hull.any():
        out[in_hull] = zonotope_gauges(z, X[in_hull]) <= 1.0 + tol
    return out


# ---------------------------------------------------------------------------
# extraction


def extract_set(pz: PolyZonotope, x0_ids, alpha):
    """Fix the initial-set factors of ``pz`` to ``alpha``.

    Returns a :class:`Zonotope` when ``pz`` depends on no other factor and a
    smaller :class:`PolyZonotope` otherwise. Factors introduced after the
    initial time stay free.
    """
    x0_ids = np.asarray(x0_ids, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != x0_ids.size:
        raise ValueError(f"expected {x0_ids.size} factor values, got {alpha.size}")
    if np.any(np.abs(alpha) > 1 + S.polyzono.EVAL_TOL):
        raise ValueError("factor values must lie in [-1, 1]")
    if x0_ids.size == 0:
        return S.eval(pz, []) if pz.p == 0 else pz
    sorted_ids = np.sort(x0_ids)
    pos = np.searchsorted(sorted_ids, pz.id)
    inside = (pos < sorted_ids.size) & (sorted_ids[np.minimum(pos, sorted_ids.size - 1)] == pz.id)
    if inside.all():
        order = np.argsort(x0_ids)
        vals = alpha[order][pos]
        return S.eval(pz, vals)
    return S.partial_eval(pz, x0_ids, alpha)


def as_zonotope(s) -> Zonotope:
    return s if isinstance(s, Zonotope) else S.enclose_zonotope(s)


@dataclass(frozen=True, eq=False)
class Extraction:
    alpha: np.ndarray
    time_points: list  # (t, set)
    time_intervals: list  # ((t0, t1), set)
    elapsed: float

    @property
    def final(self):
        return self.time_points[-1][1]


def extract(res: ReachResult, alpha, final_only: bool = False) -> Extraction:
    """Reachable sets of the initial state with parameter ``alpha``.

    ``alpha`` is ordered like ``res.x0_ids``.
    """
    alpha = np.asarray(alpha, dtype=float).reshape(-1)
    if alpha.size != len(res.x0_ids):
        raise ValueError(f"expected {len(res.x0_ids)} factor values, got {alpha.size}")
    if np.any(np.abs(alpha) > 1 + S.polyzono.EVAL_TOL):
        raise ValueError("factor values must lie in [-1, 1]")
    start = time.perf_counter()
    ids = res.x0_ids
    if final_only:
        t, pz = res.time_points[-1]
        tp = [(t, extract_set(pz, ids, alpha))]
        ti = []
    else:
        tp = [(t, extract_set(pz, ids, alpha)) for t, pz in res.time_points]
        ti = [(t, extract_set(pz, ids, alpha)) for t, pz in res.time_intervals]
    return Extraction(alpha, tp, ti, time.perf_counter() - start)


def parameterize_point(X0: PolyZonotope, x) -> np.ndarray:
    """Factor values of the initial state ``x``.

    Requires ``X0`` to be affine in its factors with one generator per factor
    and an invertible generator matrix.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != X0.n:
        raise ValueError("dimension mismatch")
    X0 = S.compact(X0, prune=False)
    lin = ~X0.constant_mask()
    E = X0.E[:, lin]
    if np.any(E > 1) or np.any(E.sum(axis=0) != 1) or np.any(E.sum(axis=1) != 1):
        raise ValueError("initial set is not affine with one generator per factor")
    if X0.q:
        raise ValueError("initial set has independent generators")
    Gd = X0.G[:, lin][:, np.argmax(E, axis=0).argsort()]
    if Gd.shape[0] != Gd.shape[1] or abs(np.linalg.det(Gd)) < 1e-14:
        raise ValueError("generator matrix of the initial set is not invertible")
    alpha = np.linalg.solve(Gd, x - X0.offset)
    if np.any(np.abs(alpha) > 1 + 1e-9):
        raise ValueError(f"point {x.tolist()} lies outside the initial set")
    return np.clip(alpha, -1.0, 1.0)


# ---------------------------------------------------------------------------
# specification on the final set


def project_spec(R: PolyZonotope, spec: HalfspaceSpec) -> tuple[PolyExpr, float]:
    """Reduce ``a^T x <= b`` on ``R`` to ``g(alpha) <= margin``.

    ``g`` is ``a^T`` times the dependent polynomial without its constant
    term, a polynomial in the factors of ``R`` (ordered like ``R.id``). The
    specification holds on every point of the set obtained by fixing the
    factors to ``alpha`` if and only if ``g(alpha) <= margin``.
    """
    if spec.a.size != R.n:
        raise ValueError("specification dimension does not match the set")
    a = spec.a
    lin = ~R.constant_mask()
    g = PolyExpr(R.p, a @ R.G[:, lin], R.E[:, lin].T)
    margin = spec.b - float(a @ R.offset) - float(np.abs(a @ R.GI).sum())
    return g, margin


class _PolyGrad:
    """Vectorized value and gradient of a polynomial."""

    def __init__(self, g: PolyExpr):
        self.g = g
        self.grads = [differentiate(g, k) for k in range(g.nvars)]

    def value(self, X: np.ndarray) -> np.ndarray:
        return self.g.eval_many(X)

    def grad(self, X: np.ndarray) -> np.ndarray:
        return np.column_stack([d.eval_many(X) if len(d) else np.zeros(X.shape[0]) for d in self.grads])


def _starts(p: int, rng: np.random.Generator, n_random: int = 64) -> np.ndarray:
    pts = [np.zeros((1, p))]
    if p <= 4:
        axis = np.linspace(-1, 1, 5)
        pts.append(np.stack(np.meshgrid(*([axis] * p), indexing="ij"), -1).reshape(-1, p))
    elif p <= 10:
        corners = np.array(np.meshgrid(*([[-1.0, 1.0]] * p), indexing="ij")).reshape(p, -1).T
        pts.append(corners)
    pts.append(rng.uniform(-1, 1, size=(n_random, p)))
    return np.vstack(pts)


def maximize_poly(g: PolyExpr, rng: np.random.Generator, iters: int = 150, n_random: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Multi-start projected gradient ascent of ``g`` on ``[-1, 1]^p``.

    Returns all local optima (rows) and their values, best first.
    """
    p = g.nvars
    if p == 0:
        return np.zeros((1, 0)), np.array([g.constant_term()])
    pg = _PolyGrad(g)
    X = _starts(p, rng, n_random)
    lip = float(np.abs(g.coeffs).sum() * max(1, g.degree) ** 2) + 1e-12
    step = np.full(X.shape[0], 1.0 / lip)
    val = pg.value(X)
    for _ in range(iters):
        grad = pg.grad(X)
        Xn = np.clip(X + step[:, None] * grad, -1.0, 1.0)
        vn = pg.value(Xn)
        better = vn >= val
        moved = np.abs(Xn - X).max(axis=1)
        X = np.where(better[:, None], Xn, X)
        val = np.where(better, vn, val)
        step = np.where(better, step * 1.5, step * 0.5)
        if np.all(moved < 1e-12):
            break
    order = np.argsort(-val, kind="stable")
    return X[order], val[order]


def falsify(
    res: ReachResult,
    spec: HalfspaceSpec,
    seeds: int = 0,
    sys: NonlinearSystem | None = None,
    dt: float = 1e-4,
    tol: float = 1e-6,
    max_candidates: int = 5,
) -> FalsificationResult:
    """Search for an initial state whose trajectory violates ``spec`` at the final time.

    ``g`` from :func:`project_spec` is maximized over all factors of the final
    set; the initial-set part of the maximizer defines the candidate state,
    which is then simulated. Distinct candidates are tried in order of their
    ``g`` value until one is verified or ``max_candidates`` are exhausted.
    """
    sys = sys or res.system
    if sys is None:
        raise ValueError("a system is needed to verify candidates by simulation")
    R = res.final
    g, margin = project_spec(R, spec)
    rng = np.random.default_rng(seeds)
    t0 = time.perf_counter()
    X, vals = maximize_poly(g, rng)
    opt_time = time.perf_counter() - t0
    x0_pos = [int(np.nonzero(R.id == i)[0][0]) if np.any(R.id == i) else -1 for i in res.x0_ids]

    def alpha_x0(row):
        return np.array([row[k] if k >= 0 else 0.0 for k in x0_pos])

    tried: list[np.ndarray] = []
    best = None
    tf = res.time_points[-1][0]
    for row, v in zip(X, vals):
        a0 = alpha_x0(row)
        if any(np.allclose(a0, t, atol=1e-6) for t in tried):
            continue
        tried.append(a0)
        x0_star = S.eval(res.x0, a0).c
        traj = simulate(sys, x0_star, None, tf, dt)
        violation = float(spec.a @ traj.final - spec.b)
        objective = float(spec.b - margin + v)
        cand = FalsificationResult(
            a0, x0_star, objective, float(v), margin, violation > tol, traj, violation, opt_time
        )
        if best is None or cand.violation > best.violation:
            best = cand
        if cand.verified or len(tried) >= max_candidates:
            break
    return best


# ---------------------------------------------------------------------------
# safe set partition and box optimization


def _spec_poly(res: ReachResult, spec: HalfspaceSpec):
    R = res.final
    g, margin = project_spec(R, spec)
    pos = np.array([int(np.nonzero(R.id == i)[0][0]) if np.any(R.id == i) else -1 for i in res.x0_ids])
    return g, margin, pos


def _upper(g: PolyExpr, pos: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> float:
    full_lo = -np.ones(g.nvars)
    full_hi = np.ones(g.nvars)
    m = pos >= 0
    full_lo[pos[m]] = lo[m]
    full_hi[pos[m]] = hi[m]
    return interval_bound(g, (full_lo, full_hi)).hi


def partition_safe(res: ReachResult, spec: HalfspaceSpec, depth: int) -> tuple[list, list]:
    """Split the initial factor box into certified-safe and unknown boxes.

    A box is safe when the interval bound of ``g`` over it (all later factors
    ranging over ``[-1, 1]``) does not exceed the margin. Unsafe-looking
    boxes are bisected along their widest side up to ``depth`` times.
    Output order is depth-first, lower half first.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    g, margin, pos = _spec_poly(res, spec)
    p0 = len(res.x0_ids)
    safe, unknown = [], []

    def visit(lo, hi, d):
        if _upper(g, pos, lo, hi) <= margin:
            safe.append(AlphaBox(lo, hi))
            return
        if d == depth:
            unknown.append(AlphaBox(lo, hi))
            return
        k = int(np.argmax(hi - lo))
        mid = 0.5 * (lo[k] + hi[k])
        h1 = hi.copy()
        h1[k] = mid
        l2 = lo.copy()
        l2[k] = mid
        visit(lo, h1, d + 1)
        visit(l2, hi, d + 1)

    visit(-np.ones(p0), np.ones(p0), 0)
    return safe, unknown


def box_image(X0: PolyZonotope, x0_ids, box: AlphaBox) -> PolyZonotope:
    """Initial states whose parameters lie in ``box``."""
    return S.restrict(X0, x0_ids, box.lo, box.hi)


def _bisect(feasible, lo: float, hi: float, iters: int = 40) -> float:
    """Largest ``s`` in ``[lo, hi]`` with ``feasible(s)``, assuming ``feasible(lo)``."""
    if feasible(hi):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            lo = mid
        else:
            hi = mid
    return lo


def optimize_initial_box(res: ReachResult, spec: HalfspaceSpec, tol: float = 1e-6, seed: int = 0) -> AlphaBox:
    """Large sub-box of the initial factors on which ``spec`` is certified.

    For several anchor points the unit box is first shrunk towards the
    anchor by a scalar factor (bisection), then each face is pushed outward
    as far as the certificate allows, cycling until no face moves by more
    than ``tol``. The largest resulting box is returned; it is empty (zero
    width at the best anchor) when no anchor is certified.
    """
    g, margin, pos = _spec_poly(res, spec)
    return optimize_box(g, margin, pos, tol, seed)


def optimize_box(g: PolyExpr, margin: float, pos: np.ndarray, tol: float = 1e-6, seed: int = 0) -> AlphaBox:
    p0 = pos.size
    ones = np.ones(p0)

    def ok(lo, hi):
        return _upper(g, pos, lo, hi) <= margin

    if ok(-ones, ones):
        return AlphaBox.unit(p0)
    rng = np.random.default_rng(seed)
    # anchors: minimizers of g restricted to the initial factors, the center and a coarse grid
    neg = -g
    X, _ = maximize_poly(neg, rng, n_random=32)
    anchors = [np.zeros(p0)]
    for row in X[:8]:
        anchors.append(np.array([row[k] if k >= 0 else 0.0 for k in pos]))
    if p0 <= 3:
        axis = np.linspace(-1, 1, 5)
        anchors.extend(np.stack(np.meshgrid(*([axis] * p0), indexing="ij"), -1).reshape(-1, p0))
    best = None
    best_vol = -1.0
    for a in anchors:
        if not ok(a, a):
            continue
        s = _bisect(lambda s: ok(a - s * (a + 1), a + s * (1 - a)), 0.0, 1.0)
        lo, hi = a - s * (a + 1), a + s * (1 - a)
        lo, hi = _expand(ok, lo, hi, tol)
        vol = float(np.prod(hi - lo))
        if vol > best_vol:
            best, best_vol = (lo, hi), vol
    if best is None:
        return AlphaBox(np.zeros(p0), np.zeros(p0))
    return AlphaBox(*best)


def _expand(ok, lo, hi, tol, passes: int = 20):
    lo, hi = lo.copy(), hi.copy()
    for _ in range(passes):
        moved = 0.0
        for k in range(lo.size):
            old = lo[k]

            def f_lo(v):
                t = lo.copy()
                t[k] = v
                return ok(t, hi)

            lo[k] = -_bisect(lambda s: f_lo(-s), -old, 1.0, 30)
            moved = max(moved, old - lo[k])
            old = hi[k]

            def f_hi(v):
                t = hi.copy()
                t[k] = v
                return ok(lo, t)

            hi[k] = _bisect(f_hi, old, 1.0, 30)
            moved = max(moved, hi[k] - old)
        if moved < tol:
            break
    return lo, hi
