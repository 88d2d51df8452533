"""Reachable sets of polynomial ODEs by conservative polynomialization.

Each step expands the vector field to second order around the center of the
current set, propagates the affine-plus-quadratic part exactly on the sparse
polynomial zonotope (so that dependencies on the initial factors survive),
and adds a box enclosing everything else: the variation of the quadratic
term and the inputs within the step, the higher-order residual, and the
truncation errors of the matrix exponential series. The size of that box is
found by the usual enlarge-and-recompute fixed-point iteration.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from . import setrep as S
from .dynamics import NonlinearSystem, TaylorCoeffs, lagrange_remainder, taylor
from .polyalg import power_range
from .setrep import IdGenerator, IntervalVector, PolyZonotope, Zonotope


class ReachError(RuntimeError):
    """Base class for failures of the reachability engine."""


class AbstractionError(ReachError):
    """The abstraction-error fixed point was not reached; try a smaller step."""

    def __init__(self, step: int, iterations: int):
        super().__init__(
            f"abstraction error did not converge in step {step} after {iterations} iterations; "
            "reduce the step size"
        )
        self.step = step


class DivergentSetError(ReachError):
    def __init__(self, step: int):
        super().__init__(f"non-finite set enclosure in step {step}")
        self.step = step


@dataclass(frozen=True)
class ReachSettings:
    """Parameters of :func:`reach`.

    Attributes
    ----------
    tf : float
        Time horizon in seconds.
    r : float
        Step size in seconds.
    lambda_ : float
        Relative enlargement of the assumed abstraction error per iteration.
    rho_d : float
        Maximum order kept after each step.
    mu_d : float
        Volume-ratio threshold above which independent generators are turned
        into new dependent factors.
    p_d : int
        Maximum number of dependent factors.
    eta : int
        Truncation order of the matrix exponential series.
    max_abstraction_iters : int
        Iteration cap of the fixed-point loop.
    """

    tf: float = 1.0
    r: float = 0.005
    lambda_: float = 0.1
    rho_d: float = 50.0
    mu_d: float = 0.01
    p_d: int = 100
    eta: int = 6
    max_abstraction_iters: int = 10

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("step size r must be positive")
        if not self.tf >= self.r:
            raise ValueError(f"time horizon tf={self.tf} is shorter than the step size r={self.r}")
        if not self.lambda_ > 0:
            raise ValueError("lambda must be positive")
        if not self.rho_d >= 1:
            raise ValueError("rho_d must be at least 1")
        if not self.mu_d >= 0:
            raise ValueError("mu_d must be non-negative")
        if int(self.p_d) < 1:
            raise ValueError("p_d must be positive")
        if int(self.eta) < 2:
            raise ValueError("eta must be at least 2")
        if int(self.max_abstraction_iters) < 1:
            raise ValueError("max_abstraction_iters must be positive")

    @classmethod
    def from_dict(cls, data: dict) -> "ReachSettings":
        data = dict(data)
        if "lambda" in data:
            data["lambda_"] = data.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown settings: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lambda_")
        return d


# ---------------------------------------------------------------------------
# matrix exponential series


def _inf_norm(A: np.ndarray) -> float:
    return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0


def _series_tail(A: np.ndarray, r: float, eta: int) -> float:
    """Entrywise bound on ``sum_{i > eta} (A r)^i / i!``."""
    a = _inf_norm(A) * r
    eps = a / (eta + 2)
    if eps >= 1.0:
        raise ReachError(
            f"step r={r} too large for truncation order eta={eta} (||A|| r / (eta + 2) = {eps:.3g})"
        )
    return a ** (eta + 1) / math.factorial(eta + 1) / (1.0 - eps)


def exp_enclosure(A, r: float, eta: int) -> tuple[np.ndarray, float]:
    """Truncated series of ``exp(A r)`` and an entrywise bound on the truncation error."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    T = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for i in range(1, eta + 1):
        term = term @ A * (r / i)
        T = T + term
    return T, _series_tail(A, r, eta)


def gamma(A, r: float, eta: int) -> tuple[np.ndarray, float]:
    """Truncated ``sum_i A^i r^(i+1) / (i+1)!`` (the integral of ``exp(A s)`` over ``[0, r]``)
    and an entrywise bound on the truncation error."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    G = np.zeros((n, n))
    Ai = np.eye(n)
    for i in range(eta + 1):
        G = G + Ai * (r ** (i + 1) / math.factorial(i + 1))
        Ai = Ai @ A
    return G, r * _series_tail(A, r, eta)


@dataclass(frozen=True)
class _Series:
    """Precomputed sums of matrix powers used by one step."""

    T: np.ndarray  # exp(A r) truncated
    T_err: float
    Gam: np.ndarray  # integral of exp(A s), truncated
    Gam_err: float
    Tt_mid: np.ndarray  # midpoint of sum_{i>=1} [0, r^i/i!] A^i
    Tt_rad: np.ndarray  # radius of the same interval matrix, truncation included
    Gt_mid: np.ndarray  # midpoint of sum_{i>=0} [0, r^(i+1)/(i+1)!] A^i
    Gt_rad: np.ndarray
    P: np.ndarray  # sum |A^i| r^(i+1)/(i+1)!  plus truncation

    @classmethod
    def build(cls, A: np.ndarray, r: float, eta: int) -> "_Series":
        n = A.shape[0]
        T, T_err = exp_enclosure(A, r, eta)
        Gam, Gam_err = gamma(A, r, eta)
        Tt_mid = np.zeros((n, n))
        Tt_rad = np.zeros((n, n))
        Gt_mid = np.zeros((n, n))
        Gt_rad = np.zeros((n, n))
        P = np.zeros((n, n))
        Ai = np.eye(n)
        for i in range(eta + 1):
            if i >= 1:
                f = r**i / math.factorial(i)
                Tt_mid += 0.5 * f * Ai
                Tt_rad += 0.5 * f * np.abs(Ai)
            g = r ** (i + 1) / math.factorial(i + 1)
            Gt_mid += 0.5 * g * Ai
            Gt_rad += 0.5 * g * np.abs(Ai)
            P += g * np.abs(Ai)
            Ai = Ai @ A
        Tt_rad += T_err
        Gt_rad += Gam_err
        P += Gam_err
        return cls(T, T_err, Gam, Gam_err, Tt_mid, Tt_rad, Gt_mid, Gt_rad, P)


# ---------------------------------------------------------------------------
# interval helpers


def _abs_max(iv: IntervalVector) -> np.ndarray:
    return np.maximum(np.abs(iv.l), np.abs(iv.u))


def _bilinear_interval(D: np.ndarray, a: IntervalVector, b: IntervalVector) -> tuple[np.ndarray, np.ndarray]:
    """Enclosure of ``{a^T D_i b}`` for ``a``, ``b`` in the boxes (one row per ``i``)."""
    p = np.stack(
        [
            np.outer(a.l, b.l),
            np.outer(a.l, b.u),
            np.outer(a.u, b.l),
            np.outer(a.u, b.u),
        ]
    )
    plo, phi = p.min(axis=0), p.max(axis=0)
    lo = np.where(D >= 0, D * plo, D * phi).sum(axis=(1, 2))
    hi = np.where(D >= 0, D * phi, D * plo).sum(axis=(1, 2))
    return lo, hi


def _quadratic_interval(D: np.ndarray, b: IntervalVector) -> tuple[np.ndarray, np.ndarray]:
    """Enclosure of ``{1/2 b^T D_i b}`` using exact squares on the diagonal."""
    nz = b.dim
    sq_lo, sq_hi = power_range(b.l, b.u, np.full(nz, 2))
    p = np.stack([np.outer(b.l, b.l), np.outer(b.l, b.u), np.outer(b.u, b.l), np.outer(b.u, b.u)])
    plo, phi = p.min(axis=0), p.max(axis=0)
    idx = np.arange(nz)
    plo[idx, idx] = sq_lo
    phi[idx, idx] = sq_hi
    # off-diagonal pairs appear twice in the symmetric form; count each once
    W = np.triu(np.ones((nz, nz)), 1) * 2.0 + np.eye(nz)
    Dw = 0.5 * D * W
    lo = np.where(Dw >= 0, Dw * plo, Dw * phi).sum(axis=(1, 2))
    hi = np.where(Dw >= 0, Dw * phi, Dw * plo).sum(axis=(1, 2))
    return lo, hi


# ---------------------------------------------------------------------------
# one step


@dataclass(frozen=True, eq=False)
class StepResult:
    R_next: PolyZonotope
    R_post: PolyZonotope  # before reduction and restructuring
    R_tau: PolyZonotope
    Psi: IntervalVector
    Psi_bar: IntervalVector
    Psi_delta: IntervalVector
    zstar: np.ndarray
    iterations: int


def _xstar(R: PolyZonotope) -> np.ndarray:
    return S.enclose_interval(R).center


def abstr_err(R_ts: PolyZonotope, Psi_bar: IntervalVector, tc: TaylorCoeffs, U: Zonotope, settings: ReachSettings, r=None, series=None):
    """Error set ``Psi_delta`` and time-interval set for an assumed error ``Psi_bar``.

    Returns
    -------
    Psi_delta : IntervalVector
        Encloses the variation of the quadratic term and the inputs within
        the step plus the higher-order residual.
    R_tau : PolyZonotope
        Encloses all states reached during the step.
    """
    r = settings.r if r is None else r
    n = R_ts.n
    series = series or _Series.build(tc.A, r, settings.eta)
    xs = tc.zstar[:n]
    us = tc.zstar[n:]
    dR = S.translate(R_ts, -xs)
    hull_dR = S.enclose_interval(dR)
    return _abstr_err(dR, hull_dR, S.enclose_zonotope(dR), Psi_bar, tc, U, us, series, xs)


def _abstr_err(dR, hull_dR, zono_dR, Psi_bar, tc, U, us, series: _Series, xs):
    n = dR.n
    m = U.dim
    amax = _abs_max(hull_dR)
    # state drift over [t, t + r]
    cpsi, dpsi = Psi_bar.center, Psi_bar.radius
    drift_c = series.Tt_mid @ zono_dR.c + series.Gt_mid @ cpsi
    drift_G = series.Tt_mid @ zono_dR.G
    drift_r = series.Tt_rad @ amax + series.Gt_rad @ np.abs(cpsi) + series.P @ dpsi
    drift = Zonotope(drift_c, drift_G) + Zonotope(np.zeros(n), np.diag(drift_r)).box()
    hull_drift = drift.interval_hull()
    # box of z - z* over the step
    dU = U + (-us)
    hull_dU = dU.interval_hull()
    dx_tau = IntervalVector(hull_dR.l + hull_drift.l, hull_dR.u + hull_drift.u)
    z_box = IntervalVector(
        np.concatenate([dx_tau.l, hull_dU.l]) + tc.zstar,
        np.concatenate([dx_tau.u, hull_dU.u]) + tc.zstar,
    )
    if not z_box.is_finite():
        raise DivergentSetError(-1)
    L = lagrange_remainder(tc, z_box)
    # variation of the quadratic term and the inputs
    z1 = IntervalVector(np.concatenate([hull_dR.l, np.zeros(m)]), np.concatenate([hull_dR.u, np.zeros(m)]))
    z2 = IntervalVector(np.concatenate([hull_drift.l, hull_dU.l]), np.concatenate([hull_drift.u, hull_dU.u]))
    blo, bhi = _bilinear_interval(tc.D, z1, z2)
    qlo, qhi = _quadratic_interval(tc.D, z2)
    Bu = np.abs(tc.B @ dU.G).sum(axis=1) if m else np.zeros(n)
    Bc = tc.B @ dU.c if m else np.zeros(n)
    lo = blo + qlo + L.l + Bc - Bu
    hi = bhi + qhi + L.u + Bc + Bu
    Psi_delta = IntervalVector(lo, hi)
    R_tau = S.translate(S.minkowski_sum(dR, drift), xs)
    return Psi_delta, R_tau


def post(R_ts: PolyZonotope, tc: TaylorCoeffs, V: PolyZonotope, Vdelta, L, settings: ReachSettings, r=None, series=None) -> PolyZonotope:
    """Set at the end of the step.

    ``exp(A r) (R - x*)`` and ``Gamma(r) V`` share the dependent factors and
    are combined with :func:`~spzreach.setrep.exact_add`; the response to the
    remaining error ``Vdelta + L`` and all series truncation errors are added
    as a box.
    """
    r = settings.r if r is None else r
    n = R_ts.n
    series = series or _Series.build(tc.A, r, settings.eta)
    xs = tc.zstar[:n]
    dR = S.translate(R_ts, -xs)
    err = _as_interval(Vdelta, n)
    if L is not None:
        Lb = _as_interval(L, n)
        err = IntervalVector(err.l + Lb.l, err.u + Lb.u)
    return _post(dR, V, err, series, xs)


def _as_interval(x, n) -> IntervalVector:
    if x is None:
        return IntervalVector(np.zeros(n), np.zeros(n))
    if isinstance(x, IntervalVector):
        return x
    if isinstance(x, Zonotope):
        return x.interval_hull()
    if isinstance(x, PolyZonotope):
        return S.enclose_interval(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as an error set")


def _post(dR: PolyZonotope, V: PolyZonotope, err: IntervalVector, series: _Series, xs) -> PolyZonotope:
    n = dR.n
    F1 = S.linear_map(series.T, dR)
    F2 = S.linear_map(series.Gam, V)
    core = S.exact_add(F1, F2)
    tail_c = series.Gam @ err.center
    # truncation errors are entrywise bounds, so they hit every row alike
    trunc = (
        series.T_err * _abs_max(S.enclose_interval(dR)).sum()
        + series.Gam_err * _abs_max(S.enclose_interval(V)).sum()
        + series.Gam_err * np.abs(err.center).sum()
    )
    tail_r = trunc + series.P @ err.radius
    tail = Zonotope(tail_c, np.zeros((n, 0))) + Zonotope(np.zeros(n), np.diag(tail_r)).box()
    return S.translate(S.minkowski_sum(core, tail), xs)


def _vset(tc: TaylorCoeffs, dR: PolyZonotope, n: int) -> PolyZonotope:
    """``w + 1/2 sq(D_xx, R - x*)``: the part of the error that depends on the factors."""
    Dxx = tc.D[:, :n, :n]
    if np.any(Dxx != 0.0):
        V = S.quadratic_map(0.5 * Dxx, dR)
        return S.translate(V, tc.w)
    return S.from_point(tc.w)


# overflow shows up as a non-finite enclosure and is reported as DivergentSetError
@np.errstate(over="ignore", invalid="ignore")
def step(
    sys: NonlinearSystem,
    R: PolyZonotope,
    U: Zonotope,
    settings: ReachSettings,
    idgen: IdGenerator,
    protected: Sequence[int] = (),
    index: int = 0,
    r: float | None = None,
    zstar=None,
    Psi_bar: IntervalVector | None = None,
    finalize: bool = True,
) -> StepResult:
    """Advance ``R`` by one step.

    ``zstar`` and ``Psi_bar`` replay a previous step's expansion point and
    assumed abstraction error instead of recomputing them.
    """
    r = settings.r if r is None else r
    n = R.n
    if zstar is None:
        hull = S.enclose_interval(R)
        if not hull.is_finite():
            raise DivergentSetError(index)
        zstar = np.concatenate([hull.center, U.c])
    zstar = np.asarray(zstar, dtype=float)
    tc = taylor(sys, zstar)
    series = _Series.build(tc.A, r, settings.eta)
    xs, us = zstar[:n], zstar[n:]
    dR = S.translate(R, -xs)
    hull_dR = S.enclose_interval(dR)
    zono_dR = S.enclose_zonotope(dR)
    V = _vset(tc, dR, n)
    hull_V = S.enclose_interval(V)

    def compute(bar):
        try:
            pd, rt = _abstr_err(dR, hull_dR, zono_dR, bar, tc, U, us, series, xs)
        except DivergentSetError:
            raise DivergentSetError(index) from None
        psi = IntervalVector(hull_V.l + pd.l, hull_V.u + pd.u)
        return pd, rt, psi

    if Psi_bar is not None:
        iters = 1
        Psi_delta, R_tau, Psi = compute(Psi_bar)
        # a replayed error set is only sound if it still covers the recomputed one
        slack = 1e-12 * (1.0 + float(np.abs(np.concatenate([Psi_bar.l, Psi_bar.u])).max()))
        if not Psi_bar.contains_interval(Psi, tol=slack):
            raise AbstractionError(index, iters)
    else:
        Psi = IntervalVector(np.zeros(n), np.zeros(n))
        for iters in range(1, settings.max_abstraction_iters + 1):
            grow = Psi.radius * settings.lambda_
            bar = IntervalVector(Psi.l - grow, Psi.u + grow)
            Psi_delta, R_tau, Psi = compute(bar)
            if not Psi.is_finite():
                raise DivergentSetError(index)
            if bar.contains_interval(Psi):
                Psi_bar = bar
                break
        else:
            raise AbstractionError(index, settings.max_abstraction_iters)
    R_post = _post(dR, V, Psi_delta, series, xs)
    R_next = R_post
    if finalize:
        R_next = finalize_set(R_post, settings, idgen, protected)
    if not S.enclose_interval(R_next).is_finite():
        raise DivergentSetError(index)
    return StepResult(R_next, R_post, R_tau, Psi, Psi_bar, Psi_delta, zstar, iters)


def finalize_set(R: PolyZonotope, settings: ReachSettings, idgen: IdGenerator, protected: Sequence[int] = ()) -> PolyZonotope:
    """Order reduction followed by restructuring when the independent part dominates."""
    R = S.reduce(R, settings.rho_d)
    R = S.ensure_ids(R, protected)
    if S.vol_ratio(R) > settings.mu_d:
        R = S.restructure(R, idgen, settings.p_d, protected=protected)
    return S.ensure_ids(R, protected)


# ---------------------------------------------------------------------------
# full run


@dataclass(frozen=True, eq=False)
class ReachResult:
    """Output of :func:`reach`.

    ``time_points[s] = (t_s, R(t_s))`` for ``s = 0..N`` (the first entry is
    the initial set); ``time_intervals[s] = ((t_s, t_{s+1}), R(tau_s))``.
    """

    time_points: list
    time_intervals: list
    abstraction_errors: list
    assumed_errors: list
    expansion_points: list
    x0_ids: np.ndarray
    settings: ReachSettings
    U: Zonotope
    system: NonlinearSystem | None = None
    iterations: list = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def x0(self) -> PolyZonotope:
        return self.time_points[0][1]

    @property
    def final(self) -> PolyZonotope:
        return self.time_points[-1][1]

    @property
    def steps(self) -> int:
        return len(self.time_intervals)


def time_grid(tf: float, r: float) -> np.ndarray:
    """Step boundaries ``0, r, 2r, ..., tf``; the last step absorbs a fractional remainder."""
    N = max(1, int(math.ceil(tf / r - 1e-9)))
    t = np.arange(N + 1) * r
    t[-1] = tf
    return t


def reach(
    sys: NonlinearSystem,
    x0,
    U: Zonotope | None = None,
    settings: ReachSettings | None = None,
    idgen: IdGenerator | None = None,
    replay: ReachResult | None = None,
) -> ReachResult:
    """Reachable sets of ``sys`` from ``x0`` under inputs in ``U``.

    Parameters
    ----------
    x0 : PolyZonotope, Zonotope or IntervalVector
        Initial set. Independent generators are converted into dependent
        factors first, so every initial state has a unique parameter.
    U : Zonotope, optional
        Input set (dimension ``sys.m``).
    replay : ReachResult, optional
        Reuse the expansion points and assumed abstraction errors of an
        earlier run (for example to propagate a subset of its initial set).

    Raises
    ------
    AbstractionError
        The fixed-point loop did not converge; the step index is reported.
    DivergentSetError
        An enclosure became non-finite.
    """
    settings = settings or ReachSettings()
    if U is None:
        U = Zonotope(np.zeros(sys.m), np.zeros((sys.m, 0)))
    if U.dim != sys.m:
        raise ValueError(f"input set has dimension {U.dim}, system has {sys.m} inputs")
    idgen = idgen or IdGenerator()
    if isinstance(x0, IntervalVector):
        X0 = S.from_interval(x0, idgen)
    elif isinstance(x0, Zonotope):
        X0 = S.from_zonotope(x0, idgen)
    else:
        idgen.reserve_above(x0.id)
        X0 = S.remove_independent(x0, idgen)
    if X0.n != sys.n:
        raise ValueError(f"initial set has dimension {X0.n}, system has {sys.n} states")
    x0_ids = X0.id.copy()
    ts = time_grid(settings.tf, settings.r)
    start = time.perf_counter()
    R = X0
    tp, ti, errs, bars, zs, its = [(0.0, X0)], [], [], [], [], []
    for s in range(ts.size - 1):
        rs = ts[s + 1] - ts[s]
        kwargs = {}
        if replay is not None:
            kwargs = {"zstar": replay.expansion_points[s], "Psi_bar": replay.assumed_errors[s]}
        res = step(sys, R, U, settings, idgen, x0_ids, index=s, r=rs, **kwargs)
        R = res.R_next
        tp.append((float(ts[s + 1]), R))
        ti.append(((float(ts[s]), float(ts[s + 1])), res.R_tau))
        errs.append(res.Psi)
        bars.append(res.Psi_bar)
        zs.append(res.zstar)
        its.append(res.iterations)
    elapsed = time.perf_counter() - start
    return ReachResult(tp, ti, errs, bars, zs, x0_ids, settings, U, sys, its, elapsed)
