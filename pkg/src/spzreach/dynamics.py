"""Polynomial ODE models, Taylor data at an expansion point, and an RK4 simulator."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from .polyalg import PolyExpr, differentiate, eval_interval, parse
from .setrep import IntervalVector


class DivergenceError(RuntimeError):
    """A simulated state became non-finite."""


def _compile(polys: Sequence[PolyExpr], nvars: int) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized evaluator ``Z (N, nvars) -> (N, len(polys))``.

    Source code is generated from the canonical term lists, which only hold
    floats and integer exponents.
    """
    lines = ["def field(Z):", f"    out = np.empty((Z.shape[0], {len(polys)}))"]
    for k in range(nvars):
        lines.append(f"    z{k} = Z[:, {k}]")
    for i, p in enumerate(polys):
        terms = []
        for c, e in zip(p.coeffs, p.exps):
            factors = [repr(float(c))]
            for k in np.nonzero(e)[0]:
                factors.append(f"z{k}" if e[k] == 1 else f"z{k}**{int(e[k])}")
            terms.append("*".join(factors))
        expr = " + ".join(terms) if terms else "0.0"
        lines.append(f"    out[:, {i}] = {expr}")
    lines.append("    return out")
    scope = {"np": np}
    exec("\n".join(lines), scope)  # noqa: S102 - generated from numeric term data only
    return scope["field"]


@dataclass(frozen=True, eq=False)
class NonlinearSystem:
    """``x' = f(x, u)`` with ``f`` polynomial in ``z = [x; u]``.

    Parameters
    ----------
    n, m : int
        State and input dimensions.
    f : sequence of PolyExpr
        One polynomial per state over ``n + m`` variables.
    vars, inputs : sequence of str, optional
        Variable names used for parsing and printing.
    """

    n: int
    m: int
    f: tuple
    vars: tuple = ()
    inputs: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "f", tuple(self.f))
        if not self.vars:
            object.__setattr__(self, "vars", tuple(f"x{i + 1}" for i in range(self.n)))
        if not self.inputs and self.m:
            object.__setattr__(self, "inputs", tuple(f"u{i + 1}" for i in range(self.m)))
        object.__setattr__(self, "vars", tuple(self.vars))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if len(self.f) != self.n:
            raise ValueError(f"expected {self.n} right-hand sides, got {len(self.f)}")
        if any(p.nvars != self.n + self.m for p in self.f):
            raise ValueError("every right-hand side must be defined over n + m variables")
        if len(self.vars) != self.n or len(self.inputs) != self.m:
            raise ValueError("variable name count mismatch")

    @classmethod
    def from_strings(cls, f: Sequence[str], vars: Sequence[str], inputs: Sequence[str] = ()):
        names = list(vars) + list(inputs)
        return cls(len(vars), len(inputs), tuple(parse(s, names) for s in f), tuple(vars), tuple(inputs))

    @classmethod
    def from_dict(cls, data: dict) -> "NonlinearSystem":
        vars_ = data.get("vars") or [f"x{i + 1}" for i in range(int(data["n"]))]
        inputs = data.get("inputs") or [f"u{i + 1}" for i in range(int(data.get("m", 0)))]
        if "n" in data and int(data["n"]) != len(vars_):
            raise ValueError("'n' does not match the number of state variables")
        if "m" in data and int(data["m"]) != len(inputs):
            raise ValueError("'m' does not match the number of inputs")
        return cls.from_strings(data["f"], vars_, inputs)

    @classmethod
    def load(cls, path) -> "NonlinearSystem":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        names = list(self.vars) + list(self.inputs)
        return {
            "n": self.n,
            "m": self.m,
            "vars": list(self.vars),
            "inputs": list(self.inputs),
            "f": [p.to_string(names) for p in self.f],
        }

    @property
    def nz(self) -> int:
        return self.n + self.m

    @cached_property
    def field(self) -> Callable[[np.ndarray], np.ndarray]:
        return _compile(self.f, self.nz)

    def __call__(self, x, u=None) -> np.ndarray:
        z = np.concatenate([np.asarray(x, dtype=float).reshape(-1), _input_vec(u, self.m)])
        return self.field(z.reshape(1, -1))[0]

    @cached_property
    def jacobian_polys(self) -> tuple:
        return tuple(tuple(differentiate(p, j) for j in range(self.nz)) for p in self.f)

    @cached_property
    def hessian_polys(self) -> tuple:
        return tuple(
            tuple(tuple(differentiate(g, k) for k in range(self.nz)) for g in row)
            for row in self.jacobian_polys
        )

    @cached_property
    def _jac_field(self):
        return _compile([g for row in self.jacobian_polys for g in row], self.nz)

    @cached_property
    def _hess_field(self):
        return _compile([h for row in self.hessian_polys for r in row for h in r], self.nz)

    @cached_property
    def degree(self) -> int:
        return max((p.degree for p in self.f), default=0)


def _input_vec(u, m: int) -> np.ndarray:
    if m == 0:
        return np.zeros(0)
    if u is None:
        return np.zeros(m)
    u = np.asarray(u, dtype=float).reshape(-1)
    if u.size != m:
        raise ValueError(f"expected {m} inputs, got {u.size}")
    return u


@dataclass(frozen=True, eq=False)
class TaylorCoeffs:
    """Second-order expansion ``f(z) = w + [A B] dz + 1/2 dz^T D_i dz + third_i(dz)``.

    ``third`` holds, per state, the exact residual of degree three and higher
    as a polynomial in ``dz = z - zstar``.
    """

    zstar: np.ndarray
    w: np.ndarray
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    third: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.w.size

    @property
    def J(self) -> np.ndarray:
        return np.hstack([self.A, self.B])

    def model(self, z) -> np.ndarray:
        """Value of the expansion (including the residual) at ``z``."""
        dz = np.asarray(z, dtype=float) - self.zstar
        quad = 0.5 * np.einsum("j,ijk,k->i", dz, self.D, dz)
        r3 = np.array([p(dz) for p in self.third]) if self.third else np.zeros(self.n)
        return self.w + self.J @ dz + quad + r3


def taylor(sys: NonlinearSystem, zstar) -> TaylorCoeffs:
    """Exact derivatives of ``sys`` at ``zstar`` and the residual beyond order two."""
    zstar = np.asarray(zstar, dtype=float).reshape(-1)
    if zstar.size != sys.nz:
        raise ValueError(f"expansion point must have {sys.nz} entries")
    Z = zstar.reshape(1, -1)
    w = sys.field(Z)[0]
    J = sys._jac_field(Z)[0].reshape(sys.n, sys.nz)
    D = sys._hess_field(Z)[0].reshape(sys.n, sys.nz, sys.nz)
    D = 0.5 * (D + np.transpose(D, (0, 2, 1)))
    third = tuple(
        p.substitute_affine(zstar, np.ones(sys.nz)).truncate_degree(3) if p.degree >= 3 else PolyExpr(sys.nz)
        for p in sys.f
    )
    return TaylorCoeffs(zstar, w, J[:, : sys.n], J[:, sys.n :], D, third)


def lagrange_remainder(tc: TaylorCoeffs, box: IntervalVector, bounder=None) -> IntervalVector:
    """Enclosure of the residual beyond order two for ``z`` in ``box``."""
    nz = tc.zstar.size
    if box.dim != nz:
        raise ValueError(f"box must have dimension {nz}")
    lo = box.l - tc.zstar
    hi = box.u - tc.zstar
    l = np.zeros(tc.n)
    u = np.zeros(tc.n)
    for i, p in enumerate(tc.third):
        if p.is_zero():
            continue
        b = eval_interval(p, (lo, hi), bounder)
        l[i], u[i] = b.lo, b.hi
    return IntervalVector(l, u)


# ---------------------------------------------------------------------------
# simulation


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", np.asarray(self.states, dtype=float))

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _input_fn(u, m: int) -> Callable[[float], np.ndarray]:
    if callable(u):
        return lambda t: _input_vec(u(t), m)
    const = _input_vec(u, m)
    return lambda t: const


def _step_count(tf: float, dt: float) -> tuple[int, float]:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if tf < 0:
        raise ValueError("tf must be non-negative")
    steps = int(np.ceil(tf / dt - 1e-9))
    return steps, (tf / steps if steps else 0.0)


def simulate_batch(sys: NonlinearSystem, X0, u=None, tf: float = 1.0, dt: float = 1e-3, record_every: int = 0):
    """Classical RK4 for many initial states at once.

    Returns the final states ``(N, n)``; with ``record_every = k > 0`` also the
    list of recorded times and the state array ``(T, N, n)`` sampled every
    ``k`` steps (first and last step always included). The step is adjusted
    so that an integer number of equal steps ends exactly at ``tf``. Inputs
    are held constant over each step at their value at the step start.
    """
    X = np.array(X0, dtype=float, ndmin=2)
    steps, h = _step_count(tf, dt)
    ufn = _input_fn(u, sys.m)
    f = sys.field
    N = X.shape[0]

    def rhs(x, U):
        return f(np.hstack([x, U]) if sys.m else x)

    times, rec = [0.0], [X.copy()]
    # overflow is reported as DivergenceError below
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(steps):
            t = s * h
            U = np.broadcast_to(ufn(t), (N, sys.m))
            k1 = rhs(X, U)
            k2 = rhs(X + 0.5 * h * k1, U)
            k3 = rhs(X + 0.5 * h * k2, U)
            k4 = rhs(X + h * k3, U)
            X = X + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.all(np.isfinite(X)):
                raise DivergenceError(f"non-finite state at t={t + h:.6g}")
            if record_every and ((s + 1) % record_every == 0 or s + 1 == steps):
                times.append((s + 1) * h)
                rec.append(X.copy())
    if record_every:
        return X, np.asarray(times), np.stack(rec)
    return X


def simulate(sys: NonlinearSystem, x0, u=None, tf: float = 1.0, dt: float = 1e-3) -> Trajectory:
    """Single RK4 trajectory recorded at every step."""
    x0 = np.asarray(x0, dtype=float).reshape(1, -1)
    if x0.shape[1] != sys.n:
        raise ValueError(f"initial state must have {sys.n} entries")
    _, times, states = simulate_batch(sys, x0, u, tf, dt, record_every=1)
    return Trajectory(times, states[:, 0, :])
