"""Sparse multivariate polynomials, differentiation and range bounding.

A :class:`PolyExpr` is a list of monomials ``c * x_1^e_1 * ... * x_n^e_n``
stored as a coefficient vector and an integer exponent matrix with one row
per term. Instances are immutable and always kept in canonical form
(distinct exponent rows, no zero coefficients, rows sorted).
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "PolyExpr",
    "RangeBound",
    "ParseError",
    "parse",
    "eval_point",
    "eval_interval",
    "differentiate",
    "bound",
    "interval_bound",
    "SplitBound",
    "unit_box_ranges",
    "power_range",
]


class ParseError(ValueError):
    """Raised for malformed polynomial expressions.

    ``position`` is the 0-based character offset of the offending token.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


@dataclass(frozen=True)
class RangeBound:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"invalid range [{self.lo}, {self.hi}]")

    def __contains__(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class PolyExpr:
    """Immutable sparse polynomial over ``nvars`` variables.

    Parameters
    ----------
    nvars : int
        Number of variables.
    coeffs : array_like, shape (k,)
        Term coefficients.
    exps : array_like, shape (k, nvars)
        Non-negative integer exponents, one row per term.
    """

    __slots__ = ("nvars", "coeffs", "exps")

    def __init__(self, nvars: int, coeffs=(), exps=None):
        nvars = int(nvars)
        if nvars < 0:
            raise ValueError("nvars must be non-negative")
        coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
        if exps is None:
            exps = np.zeros((coeffs.size, nvars), dtype=np.int64)
        exps = np.asarray(exps, dtype=np.int64).reshape(coeffs.size, nvars)
        if np.any(exps < 0):
            raise ValueError("exponents must be non-negative")
        coeffs, exps = _normalize(coeffs, exps)
        object.__setattr__(self, "nvars", nvars)
        object.__setattr__(self, "coeffs", _freeze(coeffs))
        object.__setattr__(self, "exps", _freeze(exps))

    def __setattr__(self, name, value):
        raise AttributeError("PolyExpr is immutable")

    # construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, value: float, nvars: int) -> "PolyExpr":
        return cls(nvars, [value], np.zeros((1, nvars), dtype=np.int64))

    @classmethod
    def variable(cls, index: int, nvars: int) -> "PolyExpr":
        e = np.zeros((1, nvars), dtype=np.int64)
        e[0, index] = 1
        return cls(nvars, [1.0], e)

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[float, Sequence[int]]], nvars: int) -> "PolyExpr":
        terms = list(terms)
        if not terms:
            return cls(nvars)
        coeffs = [t[0] for t in terms]
        exps = [list(t[1]) for t in terms]
        return cls(nvars, coeffs, exps)

    # inspection ------------------------------------------------------------
    @property
    def terms(self) -> list[tuple[float, tuple[int, ...]]]:
        return [(float(c), tuple(int(v) for v in e)) for c, e in zip(self.coeffs, self.exps)]

    @property
    def degree(self) -> int:
        if self.coeffs.size == 0:
            return 0
        return int(self.exps.sum(axis=1).max())

    def is_zero(self) -> bool:
        return self.coeffs.size == 0

    def constant_term(self) -> float:
        mask = ~self.exps.any(axis=1)
        return float(self.coeffs[mask].sum())

    def __len__(self):
        return self.coeffs.size

    def __eq__(self, other):
        if not isinstance(other, PolyExpr):
            return NotImplemented
        return (
            self.nvars == other.nvars
            and self.coeffs.shape == other.coeffs.shape
            and np.array_equal(self.exps, other.exps)
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash((self.nvars, self.coeffs.tobytes(), self.exps.tobytes()))

    def __repr__(self):
        return f"PolyExpr({self.to_string()!r}, nvars={self.nvars})"

    # arithmetic ------------------------------------------------------------
    def _coerce(self, other) -> "PolyExpr":
        if isinstance(other, PolyExpr):
            if other.nvars != self.nvars:
                raise ValueError("variable count mismatch")
            return other
        if np.isscalar(other):
            return PolyExpr.constant(float(other), self.nvars)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return PolyExpr(
            self.nvars,
            np.concatenate([self.coeffs, other.coeffs]),
            np.vstack([self.exps, other.exps]),
        )

    __radd__ = __add__

    def __neg__(self):
        return PolyExpr(self.nvars, -self.coeffs, self.exps)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return PolyExpr(self.nvars, self.coeffs * float(other), self.exps)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.is_zero() or other.is_zero():
            return PolyExpr(self.nvars)
        coeffs = np.outer(self.coeffs, other.coeffs).reshape(-1)
        exps = (self.exps[:, None, :] + other.exps[None, :, :]).reshape(-1, self.nvars)
        return PolyExpr(self.nvars, coeffs, exps)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if int(k) != k or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = PolyExpr.constant(1.0, self.nvars)
        base = self
        k = int(k)
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # evaluation ------------------------------------------------------------
    def __call__(self, x):
        return eval_point(self, x)

    def eval_many(self, X: np.ndarray) -> np.ndarray:
        """Evaluate at each row of ``X`` (shape ``(N, nvars)``)."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.nvars:
            raise ValueError("dimension mismatch")
        if self.coeffs.size == 0:
            return np.zeros(X.shape[0])
        # table of powers X[:, k]**e, then one gather per variable
        top = int(self.exps.max()) if self.exps.size else 0
        powers = np.ones((top + 1,) + X.shape)
        for e in range(1, top + 1):
            powers[e] = powers[e - 1] * X
        mono = np.ones((X.shape[0], self.exps.shape[0]))
        for k in range(self.nvars):
            mono *= powers[self.exps[:, k], :, k].T
        return mono @ self.coeffs

    def gradient(self) -> list["PolyExpr"]:
        return [differentiate(self, i) for i in range(self.nvars)]

    def substitute_affine(self, offset, scale) -> "PolyExpr":
        """Polynomial in ``y`` obtained by substituting ``x_k = offset_k + scale_k * y_k``."""
        offset = np.asarray(offset, dtype=float).reshape(self.nvars)
        scale = np.asarray(scale, dtype=float).reshape(self.nvars)
        result = PolyExpr(self.nvars)
        if self.is_zero():
            return result
        max_exp = self.exps.max(axis=0)
        # powers[k][e] = (offset_k + scale_k y_k)^e
        powers = []
        for k in range(self.nvars):
            lin = PolyExpr.constant(offset[k], self.nvars) + PolyExpr.variable(k, self.nvars) * scale[k]
            row = [PolyExpr.constant(1.0, self.nvars)]
            for _ in range(int(max_exp[k])):
                row.append(row[-1] * lin)
            powers.append(row)
        parts_c, parts_e = [], []
        for c, e in zip(self.coeffs, self.exps):
            term = PolyExpr.constant(c, self.nvars)
            for k in np.nonzero(e)[0]:
                term = term * powers[k][e[k]]
            parts_c.append(term.coeffs)
            parts_e.append(term.exps)
        return PolyExpr(self.nvars, np.concatenate(parts_c), np.vstack(parts_e))

    def truncate_degree(self, min_degree: int) -> "PolyExpr":
        """Keep only the terms of total degree ``>= min_degree``."""
        keep = self.exps.sum(axis=1) >= min_degree
        return PolyExpr(self.nvars, self.coeffs[keep], self.exps[keep])

    # serialization ---------------------------------------------------------
    def to_string(self, varnames: Sequence[str] | None = None) -> str:
        if varnames is None:
            varnames = [f"x{i + 1}" for i in range(self.nvars)]
        if self.is_zero():
            return "0"
        pieces = []
        for c, e in zip(self.coeffs, self.exps):
            factors = []
            for k in np.nonzero(e)[0]:
                factors.append(varnames[k] if e[k] == 1 else f"{varnames[k]}^{int(e[k])}")
            mag = abs(float(c))
            body = "*".join(([repr(mag)] if mag != 1.0 or not factors else []) + factors)
            sign = "-" if c < 0 else "+"
            pieces.append((sign, body))
        first_sign, first_body = pieces[0]
        out = ("-" if first_sign == "-" else "") + first_body
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def to_json(self) -> dict:
        return {"nvars": self.nvars, "terms": [[c, list(e)] for c, e in self.terms]}

    @classmethod
    def from_json(cls, data: dict) -> "PolyExpr":
        terms = data["terms"]
        if "nvars" in data:
            nvars = int(data["nvars"])
        elif terms:
            nvars = len(terms[0][1])
        else:
            raise ValueError("cannot infer nvars of an empty polynomial")
        return cls.from_terms(((float(c), e) for c, e in terms), nvars)


def _normalize(coeffs: np.ndarray, exps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if coeffs.size == 0:
        return coeffs.copy(), exps.copy()
    uniq, inv = np.unique(exps, axis=0, return_inverse=True)
    summed = np.zeros(uniq.shape[0])
    np.add.at(summed, inv.reshape(-1), coeffs)
    keep = summed != 0.0
    return summed[keep], np.ascontiguousarray(uniq[keep])


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*^()]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        start = m.start(kind)
        value = m.group(kind)
        if value == "**":
            value = "^"
        tokens.append((kind, value, start))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, varnames: Sequence[str]):
        self.tokens = _tokenize(text)
        self.i = 0
        self.index = {name: k for k, name in enumerate(varnames)}
        self.nvars = len(varnames)

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.take()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}", tok[2])
        return tok

    def parse(self) -> PolyExpr:
        result = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return result

    def expr(self) -> PolyExpr:
        result = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            rhs = self.term()
            result = result + rhs if op == "+" else result - rhs
        return result

    def term(self) -> PolyExpr:
        result = self.unary()
        while self.peek()[1] == "*":
            self.take()
            result = result * self.unary()
        return result

    def unary(self) -> PolyExpr:
        if self.peek()[1] == "-":
            self.take()
            return -self.unary()
        if self.peek()[1] == "+":
            self.take()
            return self.unary()
        return self.power()

    def power(self) -> PolyExpr:
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            tok = self.take()
            if tok[1] == "-":
                raise ParseError("negative exponent", tok[2])
            if tok[0] != "num":
                raise ParseError("exponent must be an integer literal", tok[2])
            if not re.fullmatch(r"\d+", tok[1]):
                raise ParseError("non-integer exponent", tok[2])
            if self.peek()[1] == "^":
                raise ParseError("chained exponent", self.peek()[2])
            return base ** int(tok[1])
        return base

    def atom(self) -> PolyExpr:
        kind, value, pos = self.take()
        if kind == "num":
            return PolyExpr.constant(float(value), self.nvars)
        if kind == "id":
            if value not in self.index:
                raise ParseError(f"unknown identifier {value!r}", pos)
            return PolyExpr.variable(self.index[value], self.nvars)
        if value == "(":
            inner = self.expr()
            self.expect(")")
            return inner
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {value!r}", pos)


def parse(text: str, varnames: Sequence[str]) -> PolyExpr:
    """Parse ``text`` into a canonical polynomial over ``varnames``.

    Grammar: identifiers, real literals, ``+ - *``, ``^`` (or ``**``) with a
    non-negative integer literal exponent, and parentheses.
    """
    if len(set(varnames)) != len(varnames):
        raise ValueError("duplicate variable names")
    return _Parser(text, varnames).parse()


# ---------------------------------------------------------------------------
# evaluation and bounding


def eval_point(f: PolyExpr, x) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != f.nvars:
        raise ValueError(f"expected {f.nvars} values, got {x.size}")
    if f.is_zero():
        return 0.0
    return float(np.prod(x[None, :] ** f.exps, axis=1) @ f.coeffs)


def power_range(lo: np.ndarray, hi: np.ndarray, k: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact range of ``x**k`` for ``x`` in ``[lo, hi]`` (elementwise)."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    k = np.asarray(k)
    a = lo**k
    b = hi**k
    even = (k % 2 == 0) & (k > 0)
    straddle = (lo < 0) & (hi > 0)
    pmin = np.where(even & straddle, 0.0, np.minimum(a, b))
    pmax = np.maximum(a, b)
    return pmin, pmax


def _mul_intervals(alo, ahi, blo, bhi):
    p = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return p.min(axis=0), p.max(axis=0)


def _monomial_ranges(exps: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    k_terms = exps.shape[0]
    mlo = np.ones(k_terms)
    mhi = np.ones(k_terms)
    for k in range(exps.shape[1]):
        e = exps[:, k]
        if not e.any():
            continue
        plo, phi = power_range(np.full(k_terms, lo[k]), np.full(k_terms, hi[k]), e)
        mlo, mhi = _mul_intervals(mlo, mhi, plo, phi)
    return mlo, mhi


def unit_box_ranges(exps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ranges of monomials over ``[-1, 1]^p``; ``exps`` has one column per monomial.

    Returns ``(lo, hi)`` with ``[1, 1]`` for constant columns, ``[0, 1]`` for
    columns with only even exponents and ``[-1, 1]`` otherwise.
    """
    exps = np.asarray(exps)
    h = exps.shape[1]
    if exps.shape[0] == 0:
        return np.ones(h), np.ones(h)
    const = ~exps.any(axis=0)
    even = ~(exps % 2).any(axis=0)
    lo = np.where(const, 1.0, np.where(even, 0.0, -1.0))
    return lo, np.ones(h)


def interval_bound(f: PolyExpr, box) -> RangeBound:
    """Natural interval extension, monomial by monomial, with exact powers."""
    lo, hi = _box_arrays(box, f.nvars)
    if f.is_zero():
        return RangeBound(0.0, 0.0)
    mlo, mhi = _monomial_ranges(f.exps, lo, hi)
    c = f.coeffs
    tlo = np.where(c >= 0, c * mlo, c * mhi)
    thi = np.where(c >= 0, c * mhi, c * mlo)
    return RangeBound(float(tlo.sum()), float(thi.sum()))


def _box_arrays(box, nvars):
    if box is None:
        return -np.ones(nvars), np.ones(nvars)
    if hasattr(box, "l") and hasattr(box, "u"):
        lo, hi = np.asarray(box.l, dtype=float), np.asarray(box.u, dtype=float)
    else:
        lo, hi = (np.asarray(v, dtype=float) for v in box)
    if lo.size != nvars or hi.size != nvars:
        raise ValueError(f"box dimension {lo.size} does not match {nvars} variables")
    return lo.reshape(-1), hi.reshape(-1)


def eval_interval(f: PolyExpr, iv, bounder: Callable | None = None) -> RangeBound:
    """Sound enclosure of ``{f(x) : x in iv}``.

    ``iv`` is an :class:`~spzreach.setrep.IntervalVector` or a ``(lo, hi)``
    pair. The default strategy is :func:`interval_bound`.
    """
    return (bounder or interval_bound)(f, iv)


def bound(f: PolyExpr, bounder: Callable | None = None) -> RangeBound:
    """Range bound of ``f`` over the unit box ``[-1, 1]^nvars``."""
    if bounder is None:
        if f.is_zero():
            return RangeBound(0.0, 0.0)
        mlo, mhi = unit_box_ranges(f.exps.T)
        c = f.coeffs
        return RangeBound(
            float(np.where(c >= 0, c * mlo, c * mhi).sum()),
            float(np.where(c >= 0, c * mhi, c * mlo).sum()),
        )
    return bounder(f, None)


class SplitBound:
    """Branch-and-bound refinement of :func:`interval_bound`.

    Boxes are bisected along their widest side until the gap between the
    sound bound and the best sampled value drops below ``tol`` on each side,
    or ``max_boxes`` boxes have been processed. The result is always a sound
    enclosure; it converges to the exact range as ``tol`` goes to zero.
    """

    def __init__(self, tol: float = 1e-4, max_boxes: int = 20000):
        self.tol = tol
        self.max_boxes = max_boxes

    def __call__(self, f: PolyExpr, box) -> RangeBound:
        lo, hi = _box_arrays(box, f.nvars)
        if f.is_zero():
            return RangeBound(0.0, 0.0)
        upper = -self._side(-f, lo, hi)
        lower = self._side(f, lo, hi)
        return RangeBound(lower, upper)

    def _side(self, f: PolyExpr, lo, hi) -> float:
        """Sound lower bound of ``f`` over the box."""
        best = eval_point(f, 0.5 * (lo + hi))
        heap = [(interval_bound(f, (lo, hi)).lo, 0, lo, hi)]
        counter = 1
        processed = 0
        while heap:
            lb, _, blo, bhi = heap[0]
            if best - lb <= self.tol or processed >= self.max_boxes:
                return lb
            heapq.heappop(heap)
            processed += 1
            k = int(np.argmax(bhi - blo))
            mid = 0.5 * (blo[k] + bhi[k])
            for a, b in ((blo[k], mid), (mid, bhi[k])):
                clo, chi = blo.copy(), bhi.copy()
                clo[k], chi[k] = a, b
                best = min(best, eval_point(f, 0.5 * (clo + chi)))
                heapq.heappush(heap, (interval_bound(f, (clo, chi)).lo, counter, clo, chi))
                counter += 1
        return best


def differentiate(f: PolyExpr, var: int) -> PolyExpr:
    if not 0 <= var < f.nvars:
        raise IndexError(f"variable index {var} out of range")
    e = f.exps[:, var]
    mask = e > 0
    exps = f.exps[mask].copy()
    exps[:, var] -= 1
    return PolyExpr(f.nvars, f.coeffs[mask] * e[mask], exps)


def factorial(k: int) -> float:
    return float(math.factorial(k))
