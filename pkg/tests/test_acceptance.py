"""Acceptance criteria, one test each.

Every test records a PASS/FAIL line that is printed in the pytest terminal
summary (section "acceptance criteria"). Criterion 6 is derived from the
outcome of the property-test modules in the same run.
"""

import time

import numpy as np

from conftest import hrep_contains, record, vdp_system, vdp_x0
from spzreach import setrep as S
from spzreach.depreach import HalfspaceSpec, as_zonotope, extract, extract_set, falsify, project_spec
from spzreach.dynamics import NonlinearSystem, simulate_batch, taylor
from spzreach.polyalg import SplitBound
from spzreach.reach import ReachSettings, _vset, post, reach
from spzreach.setrep import IdGenerator, PolyZonotope, Zonotope

SPEC = HalfspaceSpec([1.0, 2.0], 6.4)


def test_criterion_1_scalar_post_step():
    t0 = time.perf_counter()
    sysm = NonlinearSystem.from_strings(["x + x^2"], ["x"])
    tc = taylor(sysm, [0.0])
    R = PolyZonotope([[1.0]], np.zeros((1, 0)), [[1]], [1])
    out = post(R, tc, _vset(tc, R, 1), None, None, ReachSettings(tf=1.0, r=1.0, eta=20))
    hull = S.enclose_interval(out, SplitBound(tol=1e-4))
    elapsed = time.perf_counter() - t0
    c = S.compact(out)
    cols = {int(e): g for e, g in zip(c.E[0], c.G[0])}
    g1, g2 = cols.get(1, np.nan), cols.get(2, np.nan)
    ok = (
        abs(g1 - np.e) <= 1e-6
        and abs(g2 - (np.e - 1)) <= 1e-6
        and abs(hull.l[0] + 1.075) <= 2e-3
        and abs(hull.u[0] - 4.436) <= 2e-3
        and elapsed < 1.0
    )
    record(1, ok, f"set {g1:.6f} a + {g2:.6f} a^2, hull [{hull.l[0]:.4f}, {hull.u[0]:.4f}], {elapsed:.3f} s")
    assert ok


def test_criterion_2_vanderpol_dependency(vdp):
    t0 = time.perf_counter()
    sysm = vdp_system()
    rng = np.random.default_rng(0)
    alphas = rng.uniform(-1, 1, size=(100, 2))
    X0 = np.array([S.eval(vdp.x0, a).c for a in alphas])
    XT = simulate_batch(sysm, X0, None, 1.0, 1e-4)
    in_extract = sum(
        bool(hrep_contains(as_zonotope(extract(vdp, a, final_only=True).final), x)[0]) for a, x in zip(alphas, XT)
    )
    in_full = int(hrep_contains(S.enclose_zonotope(vdp.final), XT).sum())
    total = vdp.elapsed + time.perf_counter() - t0
    ok = in_extract == 100 and in_full == 100 and total < 60
    record(2, ok, f"{in_extract}/100 in extracted sets, {in_full}/100 in R(tf), {total:.1f} s including reach")
    assert ok


def test_criterion_3_spec_projection_printed_set():
    G = np.array([[0.73, 0.25, 0.26, -0.04, 0.0], [2.52, -0.1, 0.2, -0.09, -0.1]])
    E = np.array([[0, 1, 0, 2, 1], [0, 0, 1, 0, 1]])
    R = PolyZonotope(G, np.diag([0.05, 0.27]), E, [1, 2])
    g, margin = project_spec(R, SPEC)
    coef = {e: c for c, e in g.terms}
    got = [coef.get((1, 0), 0.0), coef.get((0, 1), 0.0), coef.get((2, 0), 0.0), coef.get((1, 1), 0.0)]
    want = [0.05, 0.66, -0.22, -0.2]
    ok = all(abs(a - b) <= 0.005 for a, b in zip(got, want)) and abs(margin - 0.04) <= 0.005
    record(3, ok, f"coefficients {np.round(got, 4).tolist()}, margin {margin:.4f}")
    assert ok


def test_criterion_4_falsification(vdp):
    fr = falsify(vdp, SPEC, seeds=0)
    ex = extract(vdp, fr.alpha_star)
    fast = fr.optimizer_time + ex.elapsed
    idg = IdGenerator()
    t0 = time.perf_counter()
    reach(vdp_system(), Zonotope.point(fr.x0_star), None, vdp.settings, idg)
    rerun = time.perf_counter() - t0
    ok = fr.verified and fr.violation > 1e-6 and fr.optimizer_time < 5.0 and rerun >= 10 * fast
    record(
        4, ok,
        f"verified={fr.verified}, violation {fr.violation:.4g}, optimizer {fr.optimizer_time:.3f} s, "
        f"extraction {ex.elapsed:.3f} s vs point reach {rerun:.2f} s ({rerun / fast:.0f}x)",
    )
    assert ok


def _synthetic(n, rng):
    h, p = 4 * n, 2 * n
    E = rng.integers(0, 3, size=(p, h))
    return PolyZonotope(rng.normal(size=(n, h)), rng.normal(size=(n, n)), E, np.arange(1, p + 1))


def test_criterion_5_extraction_complexity():
    t_start = time.perf_counter()
    rng = np.random.default_rng(0)
    ns = np.array([4, 8, 16, 32, 64])
    times = []
    for n in ns:
        pz = _synthetic(n, rng)
        ids = pz.id
        alphas = rng.uniform(-1, 1, size=(50, pz.p))
        extract_set(pz, ids, alphas[0])
        best = np.inf
        for _ in range(5):
            t0 = time.perf_counter()
            for a in alphas:
                extract_set(pz, ids, a)
            best = min(best, (time.perf_counter() - t0) / len(alphas))
        times.append(best)
    slope = float(np.polyfit(np.log(ns), np.log(times), 1)[0])
    total = time.perf_counter() - t_start
    ok = slope <= 2.5 and total < 30
    record(5, ok, f"fitted exponent {slope:.2f} (times {', '.join(f'{t * 1e6:.0f}us' for t in times)}), {total:.1f} s")
    assert ok


def test_criterion_7_refinement(vdp):
    idg = IdGenerator()
    fine = reach(vdp_system(), vdp_x0(idg), None, ReachSettings(tf=1.0, r=0.0025), idg)
    wc = S.enclose_interval(vdp.final).width
    wf = S.enclose_interval(fine.final).width
    ok = bool(np.all(wf <= 1.01 * wc))
    record(7, ok, f"hull widths r=0.005 {np.round(wc, 4).tolist()}, r=0.0025 {np.round(wf, 4).tolist()}")
    assert ok
