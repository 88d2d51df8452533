import numpy as np
import pytest

from conftest import SEEDS, vdp_system
from spzreach.dynamics import (
    DivergenceError,
    NonlinearSystem,
    lagrange_remainder,
    simulate,
    simulate_batch,
    taylor,
)
from spzreach.polyalg import ParseError
from spzreach.setrep import IntervalVector


def cubic_system():
    return NonlinearSystem.from_strings(
        ["x2 + 0.3*x1^3 - u", "-x1 + x1*x2^2 + 2*u^2 - x2^4"], ["x1", "x2"], ["u"]
    )


def test_from_dict_and_round_trip():
    sysm = vdp_system()
    assert (sysm.n, sysm.m, sysm.degree) == (2, 0, 3)
    again = NonlinearSystem.from_dict(sysm.to_dict())
    assert again.to_dict() == sysm.to_dict()
    np.testing.assert_allclose(sysm([-1.0, 1.0]), [1.0, 1.0])


def test_from_dict_validation():
    with pytest.raises(ValueError):
        NonlinearSystem.from_dict({"n": 3, "vars": ["a", "b"], "f": ["a", "b"]})
    with pytest.raises(ValueError):
        NonlinearSystem.from_dict({"vars": ["a", "b"], "f": ["a"]})
    with pytest.raises(ParseError):
        NonlinearSystem.from_dict({"vars": ["a"], "f": ["a +"]})


@pytest.mark.parametrize("seed", SEEDS)
def test_vectorized_field_matches_polynomials(seed):
    rng = np.random.default_rng(seed)
    sysm = cubic_system()
    Z = rng.normal(size=(30, 3))
    F = sysm.field(Z)
    ref = np.column_stack([p.eval_many(Z) for p in sysm.f])
    np.testing.assert_allclose(F, ref, rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("seed", SEEDS)
def test_taylor_decomposition_identity(seed):
    rng = np.random.default_rng(seed)
    sysm = cubic_system()
    zs = rng.normal(size=3)
    tc = taylor(sysm, zs)
    for z in zs + rng.uniform(-0.5, 0.5, size=(100, 3)):
        f = sysm(z[:2], z[2:])
        assert np.max(np.abs(f - tc.model(z))) <= 1e-10


def test_taylor_derivatives_match_finite_differences():
    sysm = cubic_system()
    zs = np.array([0.4, -0.7, 0.2])
    tc = taylor(sysm, zs)
    h = 1e-5
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        fd = (sysm(*np.split(zs + e, [2])) - sysm(*np.split(zs - e, [2]))) / (2 * h)
        np.testing.assert_allclose(tc.J[:, j], fd, atol=1e-6)
    # D is symmetric per state
    np.testing.assert_array_equal(tc.D, np.transpose(tc.D, (0, 2, 1)))


def test_quadratic_system_has_no_residual():
    sysm = NonlinearSystem.from_strings(["x*y", "x^2 - y"], ["x", "y"])
    tc = taylor(sysm, [0.3, 0.1])
    assert all(p.is_zero() for p in tc.third)
    r = lagrange_remainder(tc, IntervalVector([-1.0, -1.0], [1.0, 1.0]))
    np.testing.assert_array_equal(r.l, 0.0)
    np.testing.assert_array_equal(r.u, 0.0)


@pytest.mark.parametrize("seed", SEEDS)
def test_lagrange_remainder_is_sound(seed):
    rng = np.random.default_rng(seed)
    sysm = cubic_system()
    c = rng.normal(size=3)
    box = IntervalVector(c - 0.4, c + 0.3)
    tc = taylor(sysm, box.center + rng.uniform(-0.1, 0.1, 3))
    rem = lagrange_remainder(tc, box)
    Z = rng.uniform(box.l, box.u, size=(10_000, 3))
    dz = Z - tc.zstar
    R = np.column_stack([p.eval_many(dz) for p in tc.third])
    assert np.all(R >= rem.l - 1e-12) and np.all(R <= rem.u + 1e-12)


def test_rk4_global_error_is_fourth_order():
    sysm = NonlinearSystem.from_strings(["x"], ["x"])
    dts = np.array([0.1, 0.05, 0.025, 0.0125])
    errs = [abs(simulate(sysm, [1.0], None, 1.0, dt).final[0] - np.e) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert slope >= 3.5


def test_simulate_batch_matches_single_runs():
    sysm = vdp_system()
    X0 = np.array([[-1.0, 1.0], [-0.9, 1.1], [-1.2, 0.8]])
    batch = simulate_batch(sysm, X0, None, 0.5, 1e-3)
    for x0, xb in zip(X0, batch):
        np.testing.assert_allclose(simulate(sysm, x0, None, 0.5, 1e-3).final, xb, rtol=1e-14)


def test_simulate_batch_records_grid():
    sysm = vdp_system()
    X, t, rec = simulate_batch(sysm, [[-1.0, 1.0]], None, 0.1, 0.01, record_every=5)
    np.testing.assert_allclose(t, [0.0, 0.05, 0.1])
    assert rec.shape == (3, 1, 2)
    np.testing.assert_array_equal(rec[-1], X)


def test_simulate_with_inputs():
    sysm = NonlinearSystem.from_strings(["u"], ["x"], ["u"])
    assert simulate(sysm, [0.0], [2.0], 1.5, 0.1).final[0] == pytest.approx(3.0)
    assert simulate(sysm, [0.0], lambda t: [1.0], 1.0, 0.1).final[0] == pytest.approx(1.0)


def test_simulate_detects_divergence():
    sysm = NonlinearSystem.from_strings(["x^2"], ["x"])
    with pytest.raises(DivergenceError):
        simulate(sysm, [10.0], None, 5.0, 0.01)
