import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from spzreach.polyalg import (
    ParseError,
    PolyExpr,
    SplitBound,
    bound,
    differentiate,
    eval_interval,
    eval_point,
    interval_bound,
    parse,
    power_range,
    unit_box_ranges,
)

SEEDS = [0, 1, 2, 3, 4]
NAMES = ["x", "y", "z"]


def random_poly(rng, nvars=3, nterms=6, max_exp=3):
    exps = rng.integers(0, max_exp + 1, size=(nterms, nvars))
    return PolyExpr(nvars, rng.normal(size=nterms), exps)


def random_box(rng, nvars=3):
    c = rng.uniform(-2, 2, nvars)
    r = rng.uniform(0.05, 1.5, nvars)
    return c - r, c + r


def test_parse_matches_sympy_expansion():
    text = "(1 - x^2)*y - x + 3*(y - 2*z)^2"
    f = parse(text, NAMES)
    x, y, z = sp.symbols("x y z")
    ref = sp.Poly(sp.expand((1 - x**2) * y - x + 3 * (y - 2 * z) ** 2), x, y, z)
    got = {e: c for c, e in f.terms}
    want = {tuple(m): float(c) for m, c in ref.terms()}
    assert got.keys() == want.keys()
    for k in want:
        assert got[k] == pytest.approx(want[k], abs=1e-14)


def test_parse_accepts_double_star_and_unary_minus():
    assert parse("-x**2 + -(-y)", NAMES) == parse("y - x^2", NAMES)


@pytest.mark.parametrize(
    "text,pos",
    [("(1 - x^2*y", 10), ("x + * y", 4), ("x^y", 2), ("x + w", 4), ("2..3", 2)],
)
def test_parse_errors_report_position(text, pos):
    with pytest.raises(ParseError) as info:
        parse(text, NAMES)
    assert info.value.position == pos


def test_parse_rejects_negative_exponent():
    with pytest.raises(ParseError):
        parse("x^-1", NAMES)


@pytest.mark.parametrize("seed", SEEDS)
def test_print_parse_round_trip(seed):
    rng = np.random.default_rng(seed)
    f = random_poly(rng)
    g = parse(f.to_string(NAMES), NAMES)
    assert sorted(g.terms) == sorted(f.terms)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(-10, 10, allow_nan=False).filter(lambda v: v != 0),
            st.tuples(*[st.integers(0, 4)] * 3),
        ),
        min_size=0,
        max_size=8,
        unique_by=lambda t: t[1],
    )
)
def test_round_trip_property(terms):
    f = PolyExpr.from_terms(terms, 3)
    assert parse(f.to_string(NAMES), NAMES) == f
    assert PolyExpr.from_json(f.to_json()) == f


@pytest.mark.parametrize("seed", SEEDS)
def test_arithmetic_agrees_with_pointwise(seed):
    rng = np.random.default_rng(seed)
    f, g = random_poly(rng), random_poly(rng)
    X = rng.uniform(-1.5, 1.5, size=(50, 3))
    fx, gx = f.eval_many(X), g.eval_many(X)
    np.testing.assert_allclose((f + g).eval_many(X), fx + gx, rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose((f - g).eval_many(X), fx - gx, rtol=1e-12, atol=1e-10)
    np.testing.assert_allclose((f * g).eval_many(X), fx * gx, rtol=1e-10, atol=1e-10)
    np.testing.assert_allclose((f**3).eval_many(X), fx**3, rtol=1e-9, atol=1e-9)


def test_canonical_form_merges_and_drops_terms():
    f = PolyExpr(2, [1.0, 2.0, -3.0], [[1, 0], [1, 0], [1, 0]])
    assert f.is_zero()
    g = PolyExpr(2, [1.0, 2.0], [[0, 1], [0, 1]])
    assert g.terms == [(3.0, (0, 1))]


@pytest.mark.parametrize("seed", SEEDS)
def test_interval_bound_is_sound(seed):
    rng = np.random.default_rng(seed)
    for _ in range(4):
        f = random_poly(rng)
        lo, hi = random_box(rng)
        rb = eval_interval(f, (lo, hi))
        X = rng.uniform(lo, hi, size=(10_000, 3))
        v = f.eval_many(X)
        assert v.min() >= rb.lo - 1e-12 * (1 + abs(rb.lo))
        assert v.max() <= rb.hi + 1e-12 * (1 + abs(rb.hi))


@pytest.mark.parametrize("seed", SEEDS)
def test_split_bound_is_sound_and_tighter(seed):
    rng = np.random.default_rng(seed)
    f = random_poly(rng, nterms=5)
    lo, hi = random_box(rng)
    plain = interval_bound(f, (lo, hi))
    split = SplitBound(tol=1e-3, max_boxes=2000)(f, (lo, hi))
    v = f.eval_many(rng.uniform(lo, hi, size=(10_000, 3)))
    assert split.lo <= v.min() + 1e-12 and v.max() <= split.hi + 1e-12
    assert plain.lo <= split.lo + 1e-12 and split.hi <= plain.hi + 1e-12


@pytest.mark.parametrize("seed", SEEDS)
def test_affine_bound_is_exact(seed):
    rng = np.random.default_rng(seed)
    c = rng.normal(size=4)
    f = PolyExpr(3, c, [[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
    lo, hi = random_box(rng)
    rb = interval_bound(f, (lo, hi))
    # the extremes of an affine function sit at box corners
    corners = np.array(np.meshgrid(*zip(lo, hi))).reshape(3, -1).T
    v = f.eval_many(corners)
    assert abs(rb.lo - v.min()) <= 1e-12 * (1 + abs(v.min()))
    assert abs(rb.hi - v.max()) <= 1e-12 * (1 + abs(v.max()))


def test_power_range_even_power_straddling_zero():
    lo, hi = power_range(np.array([-2.0, 1.0, -3.0]), np.array([1.0, 2.0, -1.0]), np.array([2, 3, 2]))
    np.testing.assert_allclose(lo, [0.0, 1.0, 1.0])
    np.testing.assert_allclose(hi, [4.0, 8.0, 9.0])


def test_unit_box_ranges_classes():
    E = np.array([[0, 2, 1, 2], [0, 0, 0, 1]])
    lo, hi = unit_box_ranges(E)
    np.testing.assert_array_equal(lo, [1, 0, -1, -1])
    np.testing.assert_array_equal(hi, [1, 1, 1, 1])


def test_unit_box_bound_example():
    # 2a + 3a^2 - b over [-1, 1]^2: a^2 in [0, 1]
    f = parse("2*a + 3*a^2 - b", ["a", "b"])
    rb = bound(f)
    assert (rb.lo, rb.hi) == (-3.0, 6.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_differentiate_matches_central_differences(seed):
    rng = np.random.default_rng(seed)
    f = random_poly(rng)
    h = 1e-5
    X = rng.uniform(-1, 1, size=(100, 3))
    for i in range(3):
        d = differentiate(f, i).eval_many(X)
        e = np.zeros(3)
        e[i] = h
        fd = (f.eval_many(X + e) - f.eval_many(X - e)) / (2 * h)
        assert np.max(np.abs(d - fd)) <= 1e-6


def test_differentiate_matches_sympy():
    f = parse("x^3*y^2 - 4*x*z + 7", NAMES)
    x, y, z = sp.symbols("x y z")
    ref = sp.diff(x**3 * y**2 - 4 * x * z + 7, x)
    got = differentiate(f, 0)
    pt = np.array([0.3, -1.7, 2.2])
    assert eval_point(got, pt) == pytest.approx(float(ref.subs({x: 0.3, y: -1.7, z: 2.2})), rel=1e-13)


def test_substitute_affine_matches_composition():
    rng = np.random.default_rng(3)
    f = random_poly(rng)
    off, sc = rng.normal(size=3), rng.uniform(0.2, 2, 3)
    g = f.substitute_affine(off, sc)
    X = rng.uniform(-1, 1, size=(50, 3))
    np.testing.assert_allclose(g.eval_many(X), f.eval_many(off + sc * X), rtol=1e-10, atol=1e-10)


def test_truncate_degree_keeps_high_terms():
    f = parse("1 + x + x*y + x^2*y + z^4", NAMES)
    assert f.truncate_degree(3) == parse("x^2*y + z^4", NAMES)


def test_eval_point_checks_size():
    with pytest.raises(ValueError):
        eval_point(parse("x", NAMES), [1.0, 2.0])
