import itertools
import time

import numpy as np
import pytest

from conftest import SEEDS, hrep_contains, vdp_system
from spzreach import setrep as S
from spzreach.depreach import (
    AlphaBox,
    HalfspaceSpec,
    as_zonotope,
    box_image,
    extract,
    extract_set,
    falsify,
    maximize_poly,
    optimize_box,
    parameterize_point,
    partition_safe,
    point_in_zonotope,
    points_in_zonotope,
    project_spec,
    zonotope_gauge,
    zonotope_gauges,
)
from spzreach.dynamics import simulate_batch
from spzreach.polyalg import PolyExpr
from spzreach.setrep import PolyZonotope, Zonotope

SPEC = HalfspaceSpec([1.0, 2.0], 6.4)


def printed_final_set():
    """Final Van der Pol set as printed with two decimals (factors a1, a2; two independent generators)."""
    G = np.array([[0.73, 0.25, 0.26, -0.04, 0.0], [2.52, -0.1, 0.2, -0.09, -0.1]])
    E = np.array([[0, 1, 0, 2, 1], [0, 0, 1, 0, 1]])
    GI = np.array([[0.05, 0.0], [0.0, 0.27]])
    return PolyZonotope(G, GI, E, [1, 2])


def test_extract_printed_set_at_example_parameters():
    z = as_zonotope(extract_set(printed_final_set(), [1, 2], [0.5, 0.4]))
    # x1 = 0.73 + 0.125 + 0.104 - 0.01, x2 = 2.52 - 0.05 + 0.08 - 0.0225 - 0.02
    np.testing.assert_allclose(z.c, [0.949, 2.5075], atol=1e-12)
    np.testing.assert_allclose(z.G, [[0.05, 0.0], [0.0, 0.27]])


def hrep3_contains(z, X, tol=1e-9):
    """3-D membership from the facet normals (cross products of generator pairs)."""
    G = z.G
    N = [np.cross(G[:, i], G[:, j]) for i, j in itertools.combinations(range(G.shape[1]), 2)]
    N = np.array([v / np.linalg.norm(v) for v in N if np.linalg.norm(v) > 1e-12]).T
    lhs = np.abs((np.atleast_2d(X) - z.c) @ N)
    rhs = np.abs(N.T @ G).sum(axis=1)
    return np.all(lhs <= rhs + tol, axis=1)


# ---------------------------------------------------------------------------
# specification parsing


def test_spec_parse_and_str():
    s = HalfspaceSpec.parse("a=1,2;b=6.4")
    np.testing.assert_array_equal(s.a, [1.0, 2.0])
    assert s.b == 6.4
    assert HalfspaceSpec.parse(str(s)).b == 6.4
    for bad in ("a=1,2", "a=1,x;b=2", "b=1;a=2", "a=0,0;b=1"):
        with pytest.raises(ValueError):
            HalfspaceSpec.parse(bad)


def test_alpha_box_validation():
    assert AlphaBox.unit(3).volume == 8.0
    with pytest.raises(ValueError):
        AlphaBox([0.5], [0.2])
    with pytest.raises(ValueError):
        AlphaBox([-1.5], [0.2])


# ---------------------------------------------------------------------------
# membership


@pytest.mark.parametrize("seed", SEEDS)
def test_point_in_zonotope_matches_facet_oracle_2d(seed):
    rng = np.random.default_rng(seed)
    z = Zonotope(rng.normal(size=2), rng.normal(size=(2, 5)))
    hull = z.interval_hull()
    X = rng.uniform(hull.l - 0.2, hull.u + 0.2, size=(400, 2))
    ref = hrep_contains(z, X, tol=0.0)
    got = np.array([point_in_zonotope(z, x, tol=0.0) for x in X[:100]])
    # points extremely close to the boundary may flip; none are expected here
    np.testing.assert_array_equal(got, ref[:100])
    np.testing.assert_array_equal(points_in_zonotope(z, X, tol=0.0), ref)


@pytest.mark.parametrize("seed", SEEDS)
def test_point_in_zonotope_matches_facet_oracle_3d(seed):
    rng = np.random.default_rng(seed)
    z = Zonotope(rng.normal(size=3), rng.normal(size=(3, 5)))
    hull = z.interval_hull()
    X = rng.uniform(hull.l, hull.u, size=(150, 3))
    ref = hrep3_contains(z, X, tol=0.0)
    got = points_in_zonotope(z, X, tol=0.0)
    np.testing.assert_array_equal(got, ref)


@pytest.mark.parametrize("seed", SEEDS)
def test_planar_gauge_agrees_with_lp(seed):
    rng = np.random.default_rng(seed)
    z = Zonotope(rng.normal(size=2), rng.normal(size=(2, 4)))
    X = z.c + rng.normal(size=(30, 2))
    fast = zonotope_gauges(z, X)
    lp = np.array([zonotope_gauge(z, x) for x in X])
    np.testing.assert_allclose(fast, lp, rtol=1e-7, atol=1e-9)


def test_degenerate_zonotope_membership():
    z = Zonotope([0.0, 0.0], [[1.0], [1.0]])
    assert point_in_zonotope(z, [0.5, 0.5])
    assert not point_in_zonotope(z, [0.5, 0.4])
    assert point_in_zonotope(Zonotope.point([1.0, 2.0]), [1.0, 2.0])


# ---------------------------------------------------------------------------
# extraction


def test_parameterize_point_example():
    X0 = S.from_interval(S.IntervalVector([-1.2, 0.8], [-0.8, 1.2]), S.IdGenerator())
    np.testing.assert_allclose(parameterize_point(X0, [-0.9, 1.08]), [0.5, 0.4], atol=1e-12)
    with pytest.raises(ValueError):
        parameterize_point(X0, [0.0, 0.0])


def test_extract_set_full_and_partial():
    pz = PolyZonotope([[1.0, 2.0, 3.0]], np.zeros((1, 0)), [[0, 1, 1], [0, 0, 1]], [4, 9])
    z = extract_set(pz, [4, 9], [0.5, -1.0])
    assert isinstance(z, Zonotope) and z.c[0] == pytest.approx(1 + 1 - 1.5)
    part = extract_set(pz, [4], [0.5])
    assert isinstance(part, PolyZonotope) and part.id.tolist() == [9]
    with pytest.raises(ValueError):
        extract_set(pz, [4], [1.5])


def test_extract_soundness_at_every_time(vdp):
    sysm = vdp_system()
    rng = np.random.default_rng(7)
    alphas = rng.uniform(-1, 1, size=(100, 2))
    X0 = np.array([S.eval(vdp.x0, a).c for a in alphas])
    sub = 5  # substeps per reach step (r = 0.005, dt = 1e-3)
    _, _, rec = simulate_batch(sysm, X0, None, 1.0, 1e-3, record_every=1)
    for k, a in enumerate(alphas):
        ex = extract(vdp, a)
        for s, (_, zs) in enumerate(ex.time_points):
            assert hrep_contains(as_zonotope(zs), rec[s * sub, k])[0]
        for s, (_, zs) in enumerate(ex.time_intervals):
            assert hrep_contains(as_zonotope(zs), rec[s * sub : (s + 1) * sub + 1, k]).all()


def test_extract_point_endpoint_rk4_fine(vdp):
    sysm = vdp_system()
    rng = np.random.default_rng(8)
    alphas = rng.uniform(-1, 1, size=(100, 2))
    X0 = np.array([S.eval(vdp.x0, a).c for a in alphas])
    XT = simulate_batch(sysm, X0, None, 1.0, 1e-4)
    ok = [hrep_contains(as_zonotope(extract(vdp, a, final_only=True).final), x)[0] for a, x in zip(alphas, XT)]
    assert all(ok)
    assert hrep_contains(S.enclose_zonotope(vdp.final), XT).all()


def test_extraction_within_full_enclosure(vdp):
    rng = np.random.default_rng(9)
    dirs = rng.normal(size=(20, 2))
    for a in rng.uniform(-1, 1, size=(20, 2)):
        ex = extract(vdp, a)
        for (t, zs), (_, pz) in zip(ex.time_points[::20], vdp.time_points[::20]):
            small, big = as_zonotope(zs), S.enclose_zonotope(pz)
            for d in dirs:
                assert small.support(d) <= big.support(d) + 1e-12


def test_extraction_is_fast(vdp):
    t0 = time.perf_counter()
    for a in np.random.default_rng(0).uniform(-1, 1, size=(20, 2)):
        extract(vdp, a, final_only=True)
    assert (time.perf_counter() - t0) / 20 < 0.1 * vdp.elapsed


# ---------------------------------------------------------------------------
# specification projection


def test_project_spec_printed_values():
    g, margin = project_spec(printed_final_set(), SPEC)
    coef = {e: c for c, e in g.terms}
    assert coef[(1, 0)] == pytest.approx(0.05, abs=0.005)
    assert coef[(0, 1)] == pytest.approx(0.66, abs=0.005)
    assert coef[(2, 0)] == pytest.approx(-0.22, abs=0.005)
    assert coef[(1, 1)] == pytest.approx(-0.2, abs=0.005)
    assert margin == pytest.approx(0.04, abs=0.005)


@pytest.mark.parametrize("seed", SEEDS)
def test_project_spec_equality_structure(seed):
    rng = np.random.default_rng(seed)
    from conftest import random_pz

    R = random_pz(rng, h=6, q=3, p=3)
    spec = HalfspaceSpec(rng.normal(size=2), 1.0)
    g, margin = project_spec(R, spec)
    a = spec.a
    base = float(a @ R.offset)
    spread = float(np.abs(a @ R.GI).sum())
    al = rng.uniform(-1, 1, size=(1000, 3))
    be = rng.uniform(-1, 1, size=(1000, R.q))
    lhs = R.points(al, be) @ a
    bound = base + g.eval_many(al) + spread
    assert np.all(lhs <= bound + 1e-10)
    # the bound is attained with beta = sign(a^T GI)
    be_star = np.tile(np.sign(a @ R.GI), (1000, 1))
    np.testing.assert_allclose(R.points(al, be_star) @ a, bound, atol=1e-10)
    # spec holds on eval(R)(alpha) exactly when g(alpha) <= margin
    assert margin == pytest.approx(spec.b - base - spread)


def test_maximize_poly_finds_global_max():
    g = PolyExpr.from_terms([(0.05, (1, 0)), (0.66, (0, 1)), (-0.22, (2, 0)), (-0.2, (1, 1))], 2)
    X, vals = maximize_poly(g, np.random.default_rng(0))
    grid = np.stack(np.meshgrid(np.linspace(-1, 1, 401), np.linspace(-1, 1, 401)), -1).reshape(-1, 2)
    assert vals[0] >= g.eval_many(grid).max() - 1e-9


# ---------------------------------------------------------------------------
# applications on the Van der Pol run


def test_falsify_verified(vdp):
    fr = falsify(vdp, SPEC, seeds=0)
    assert fr.verified
    assert fr.violation > 1e-6
    assert SPEC.a @ fr.witness.final - SPEC.b == pytest.approx(fr.violation)
    assert fr.optimizer_time < 5.0
    np.testing.assert_allclose(fr.witness.states[0], fr.x0_star)


def test_falsify_unreachable_spec(vdp):
    fr = falsify(vdp, HalfspaceSpec([1.0, 0.0], 1e6))
    assert not fr.verified and fr.violation < 0


def test_partition_tiles_and_is_sound(vdp):
    safe, unknown = partition_safe(vdp, SPEC, 6)
    assert sum(b.volume for b in safe) + sum(b.volume for b in unknown) == pytest.approx(4.0, abs=1e-12)
    assert safe and unknown
    rng = np.random.default_rng(4)
    sysm = vdp_system()
    alphas = np.vstack([rng.uniform(b.lo, b.hi, size=(1000, 2)) for b in safe])
    X0 = np.array([S.eval(vdp.x0, a).c for a in alphas])
    XT = simulate_batch(sysm, X0, None, 1.0, 1e-3)
    assert np.all(XT @ SPEC.a <= SPEC.b)


def test_partition_depth_zero(vdp):
    safe, unknown = partition_safe(vdp, SPEC, 0)
    assert not safe and len(unknown) == 1
    safe, unknown = partition_safe(vdp, HalfspaceSpec([1.0, 2.0], 100.0), 3)
    assert len(safe) == 1 and not unknown


def test_box_image_matches_restricted_initial_states(vdp):
    box = AlphaBox([0.0, -0.5], [0.5, 0.5])
    img = box_image(vdp.x0, vdp.x0_ids, box)
    iv = S.enclose_interval(img)
    np.testing.assert_allclose(iv.l, [-1.0, 0.9], atol=1e-12)
    np.testing.assert_allclose(iv.u, [-0.9, 1.1], atol=1e-12)


def _ia_upper_grid(lo1, hi1, lo2, hi2):
    """Natural interval bound of 0.05 a1 + 0.66 a2 - 0.22 a1^2 - 0.2 a1 a2 (vectorized)."""
    t1 = np.maximum(0.05 * lo1, 0.05 * hi1)
    t2 = np.maximum(0.66 * lo2, 0.66 * hi2)
    sq_lo = np.where((lo1 < 0) & (hi1 > 0), 0.0, np.minimum(lo1**2, hi1**2))
    t3 = -0.22 * sq_lo
    prods = np.stack([lo1 * lo2, lo1 * hi2, hi1 * lo2, hi1 * hi2])
    t4 = -0.2 * prods.min(axis=0)
    return t1 + t2 + t3 + t4


def test_optimize_box_against_grid_oracle():
    g = PolyExpr.from_terms([(0.05, (1, 0)), (0.66, (0, 1)), (-0.22, (2, 0)), (-0.2, (1, 1))], 2)
    box = optimize_box(g, 0.04, np.array([0, 1]))
    # certified by an independent evaluation of the interval bound
    assert _ia_upper_grid(*(np.array([v]) for v in (box.lo[0], box.hi[0], box.lo[1], box.hi[1])))[0] <= 0.04 + 1e-12
    axis = np.linspace(-1, 1, 50)
    i, j = np.triu_indices(50, 1)
    lo_a, hi_a = axis[i], axis[j]
    L1, L2 = np.meshgrid(lo_a, lo_a, indexing="ij")
    H1, H2 = np.meshgrid(hi_a, hi_a, indexing="ij")
    ok = _ia_upper_grid(L1, H1, L2, H2) <= 0.04
    vol = np.where(ok, (H1 - L1) * (H2 - L2), 0.0)
    assert box.volume >= 0.9 * vol.max()
