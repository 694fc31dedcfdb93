import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from usreg.optimizer import OptimizerError, SimplexConfig, minimize

TIGHT = SimplexConfig(x_tol=1e-7, f_tol=1e-14, max_evals=20000)


def bowl(c):
    c = np.asarray(c, dtype=float)
    return lambda p: float(np.sum((np.asarray(p) - c) ** 2))


def test_quadratic_bowl_from_seeded_starts():
    rng = np.random.default_rng(8)
    c = np.array([1.0, -2.0, 0.5, 3.0, -1.0, 0.0])
    for _ in range(20):
        d = rng.normal(size=6)
        x0 = c + d / np.linalg.norm(d) * rng.uniform(0, 5)
        res = minimize(bowl(c), x0, TIGHT)
        assert np.max(np.abs(res.x - c)) < 1e-4
        assert res.reason == "x_tol"


def test_embedded_rosenbrock():
    def f(p):
        x, y = p[0], p[1]
        return float((1 - x) ** 2 + 100 * (y - x * x) ** 2 + np.sum(np.asarray(p[2:]) ** 2))
    res = minimize(f, np.zeros(6), TIGHT)
    assert np.max(np.abs(res.x[:2] - 1.0)) < 1e-3


def test_constant_cost_stops_on_f_tol():
    res = minimize(lambda p: 0.25, np.zeros(6))
    assert res.reason == "f_tol" and res.fun == 0.25 and res.evals == 7


def test_best_cost_never_increases():
    rng = np.random.default_rng(1)
    for _ in range(10):
        c = rng.uniform(-3, 3, 6)
        w = rng.uniform(0.5, 5, 6)
        res = minimize(lambda p: float(np.sum(w * (p - c) ** 2) + np.sin(p[0]) ** 2), np.zeros(6))
        assert all(b <= a for a, b in zip(res.history, res.history[1:]))
        assert res.fun <= res.history[0]


def test_shrink_moves_vertices_toward_best_by_sigma():
    # a cost that rejects every candidate off the initial simplex forces shrinks
    seen = []
    x0 = np.zeros(2)
    pts0 = [x0, x0 + [4, 0], x0 + [0, 4]]

    def f(p):
        return float(np.sum(p ** 2)) if any(np.array_equal(p, q) for q in pts0) else 1e9

    cfg = SimplexConfig(max_evals=12)
    prev = {}

    def cb(it, op, simplex, costs):
        seen.append((op, simplex.copy(), prev.get("s")))
        prev["s"] = simplex.copy()

    prev["s"] = np.array(pts0, dtype=float)
    minimize(f, x0, cfg, callback=cb)
    op, after, before = seen[0]
    assert op == "shrink"
    np.testing.assert_array_equal(after[0], before[0])
    np.testing.assert_allclose(after[1:], before[0] + 0.5 * (before[1:] - before[0]), atol=0)


def test_determinism():
    rng = np.random.default_rng(4)
    c = rng.normal(size=6)
    calls = [[], []]

    def make(k):
        def f(p):
            calls[k].append(p.copy())
            return float(np.sum(np.abs(p - c)))
        return f

    a = minimize(make(0), np.zeros(6))
    b = minimize(make(1), np.zeros(6))
    assert a.evals == b.evals and np.array_equal(a.x, b.x)
    assert all(np.array_equal(p, q) for p, q in zip(calls[0], calls[1]))


def test_max_evals_and_timeout():
    res = minimize(bowl(np.full(6, 100.0)), np.zeros(6), SimplexConfig(max_evals=30))
    assert res.reason == "max_evals" and res.evals <= 30 + 6
    res = minimize(bowl(np.full(6, 100.0)), np.zeros(6), SimplexConfig(max_time=0.0, max_evals=10**6))
    assert res.reason == "timeout"


def test_restart_runs_a_second_simplex():
    one = minimize(bowl(np.ones(6)), np.zeros(6))
    two = minimize(bowl(np.ones(6)), np.zeros(6), SimplexConfig(restart=True))
    assert two.evals > one.evals and two.fun <= one.fun


def test_initial_simplex_layout():
    first = []
    minimize(lambda p: (first.append(p.copy()), 1.0)[1], np.arange(6.0),
             SimplexConfig(initial_size_units=3.5))
    np.testing.assert_array_equal(first[0], np.arange(6.0))
    for i in range(6):
        np.testing.assert_array_equal(first[i + 1], np.arange(6.0) + 3.5 * np.eye(6)[i])


def test_non_finite_start_is_an_error():
    with pytest.raises(OptimizerError):
        minimize(lambda p: float("nan"), np.zeros(6))


@pytest.mark.parametrize("kwargs", [dict(initial_size_units=2.0), dict(initial_size_units=6.0),
                                    dict(reflection=2.0, expansion=1.5), dict(shrink=0.0),
                                    dict(contraction=1.0), dict(max_evals=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimplexConfig(**kwargs)


def test_size_override():
    assert SimplexConfig(initial_size_units=1.0, allow_any_size=True).initial_size_units == 1.0


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=6, max_size=6))
def test_result_never_worse_than_start(x0):
    f = lambda p: float(np.sum(np.cos(p)) + 0.1 * np.sum(p ** 2))
    res = minimize(f, x0, SimplexConfig(max_evals=200))
    assert res.fun <= f(np.asarray(x0))
