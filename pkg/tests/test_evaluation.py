import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from medol.core import RunConfig, run_medol
from medol.dataio import Dataset
from medol.errors import ParameterError
from medol.evaluation import (EvalConfig, StationarityReport, evaluate_run, full_gradient_norm,
                              goldstein_min_norm, goldstein_proxy, min_norm_point, project_simplex)
from medol.objectives import ObjectiveSuite, capped_l1_svm, l1_norm_objective, noisy_quadratic
from medol.topology import ring_matrix


def abs_suite():
    return ObjectiveSuite.of([l1_norm_objective(1)])


def test_full_gradient_norm_examples():
    q = ObjectiveSuite.of([noisy_quadratic(2, np.array([1.0, 2.0]))])
    assert full_gradient_norm(q, [1.0, 2.0]) == 0.0
    assert full_gradient_norm(abs_suite(), [2.0]) == 1.0
    svm = ObjectiveSuite.of([capped_l1_svm(Dataset.from_dense([[1.0, 0.0]], [1.0]), 0.1, 1.0)])
    assert full_gradient_norm(svm, [0.5, 0.0]) == pytest.approx(0.9)


def test_goldstein_proxy_examples():
    rng = np.random.default_rng(0)
    est, se = goldstein_proxy(abs_suite(), [0.0], 1.0, 4000, rng)
    assert est <= 3 * se
    est, se = goldstein_proxy(abs_suite(), [2.0], 1.0, 200, rng)
    assert est == pytest.approx(1.0)
    q = ObjectiveSuite.of([noisy_quadratic(2, np.zeros(2))])
    est, se = goldstein_proxy(q, [1.0, 0.0], 1e-6, 200, rng)
    assert est == pytest.approx(1.0, abs=3 * se + 1e-6)


@pytest.mark.parametrize("kw", [dict(delta=0.0), dict(delta=-1.0), dict(samples=99), dict(a=1.0)])
def test_goldstein_proxy_errors(kw):
    args = dict(delta=0.5, samples=100, a=0.5)
    args.update(kw)
    with pytest.raises(ParameterError):
        goldstein_proxy(abs_suite(), [0.0], args["delta"], args["samples"], np.random.default_rng(0),
                        a=args["a"])


def test_goldstein_min_norm_examples():
    rng = np.random.default_rng(1)
    assert goldstein_min_norm(abs_suite(), [0.0], 1.0, 16, rng) == pytest.approx(0.0, abs=1e-8)
    assert goldstein_min_norm(abs_suite(), [2.0], 1.0, 16, rng) == pytest.approx(1.0)
    single = goldstein_min_norm(abs_suite(), [0.2], 1.0, 1, np.random.default_rng(2))
    assert single == pytest.approx(1.0)
    with pytest.raises(ParameterError):
        goldstein_min_norm(abs_suite(), [0.0], 1.0, 0, rng)


def test_goldstein_min_norm_monotone_in_k():
    suite = ObjectiveSuite.of([l1_norm_objective(3, 1.0), noisy_quadratic(3, np.ones(3))])
    x = np.array([0.1, -0.2, 0.3])
    values = [goldstein_min_norm(suite, x, 0.4, k, np.random.default_rng(7)) for k in range(1, 40)]
    assert all(b <= a + 1e-7 for a, b in zip(values, values[1:]))


def test_min_norm_not_above_proxy():
    suite = ObjectiveSuite.of([l1_norm_objective(2, 1.0)])
    rng = np.random.default_rng(3)
    for x in ([0.0, 0.0], [0.1, -0.05], [0.3, 0.2]):
        est, se = goldstein_proxy(suite, x, 0.5, 2000, rng, full_batch=True)
        gmin = goldstein_min_norm(suite, x, 0.5, 64, rng)
        assert gmin <= est + 3 * se


def test_project_simplex():
    p = project_simplex([0.3, 2.0, -1.0])
    assert np.allclose(p, [0, 1, 0])
    p = project_simplex([0.5, 0.5, 0.5])
    assert np.allclose(p, [1 / 3] * 3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        v = rng.standard_normal(6) * 3
        p = project_simplex(v)
        assert p.sum() == pytest.approx(1.0) and np.all(p >= 0)
        # optimality: no random simplex point is closer
        q = rng.dirichlet(np.ones(6), 200)
        assert np.linalg.norm(p - v) <= np.linalg.norm(q - v, axis=1).min() + 1e-12


def grid_min_norm(G):
    k = G.shape[0]
    steps = np.arange(0, 1001) / 1000
    if k == 2:
        lam = np.stack([steps, 1 - steps], axis=1)
    else:
        a, b = np.meshgrid(steps, steps, indexing="ij")
        keep = a + b <= 1 + 1e-12
        lam = np.stack([a[keep], b[keep], np.clip(1 - a[keep] - b[keep], 0, None)], axis=1)
    return np.linalg.norm(lam @ G, axis=1).min()


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), k=st.integers(2, 3), d=st.integers(1, 3))
def test_min_norm_point_matches_grid(seed, k, d):
    G = np.random.default_rng(seed).uniform(-2, 2, (k, d))
    point, lam = min_norm_point(G)
    assert lam.sum() == pytest.approx(1.0) and np.all(lam >= -1e-15)
    assert np.allclose(point, lam @ G)
    grid = grid_min_norm(G)
    # the grid is within one step times the hull diameter of the true minimum
    diameter = max(np.linalg.norm(a - b) for a, b in itertools.combinations(G, 2))
    assert np.linalg.norm(point) <= grid + 1e-7
    assert grid <= np.linalg.norm(point) + 1e-3 * diameter + 1e-9


def test_min_norm_point_degenerate_cases():
    point, lam = min_norm_point([[1.0, 2.0]])
    assert np.array_equal(point, [1.0, 2.0])
    point, _ = min_norm_point(np.array([[1.0, 1.0]] * 4))
    assert np.allclose(point, [1.0, 1.0])
    point, _ = min_norm_point(np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0]]))
    assert np.linalg.norm(point) < 1e-4


def test_report_serialization_order():
    r = StationarityReport(1.0, 0.5, 0.01, 0.2, 0.1, 1064, None)
    keys = list(json.loads(r.to_json()))
    assert keys == ["grad_norm", "smoothed_grad_norm", "smoothed_grad_std_error",
                    "goldstein_estimate", "delta", "samples_used", "test_acc"]


def test_evaluate_run_single_and_identical_candidates():
    suite = ObjectiveSuite.of([l1_norm_objective(2)])
    cfg = EvalConfig(samples=200, k_samples=8)
    reports, summary = evaluate_run(np.array([[0.3, -0.2]]), suite, 0.1, cfg)
    assert len(reports) == 1
    for key in ("grad_norm", "smoothed_grad_norm", "goldstein_estimate"):
        assert summary[key] == getattr(reports[0], key)
    reports, summary = evaluate_run(np.tile([0.3, -0.2], (4, 1)), suite, 0.1, cfg)
    assert len({r.grad_norm for r in reports}) == 1
    assert summary["candidates"] == 4


def test_evaluate_run_is_deterministic_and_validates():
    suite = ObjectiveSuite.of([l1_norm_objective(2)])
    cands = np.random.default_rng(0).standard_normal((3, 2)) * 0.1
    a = evaluate_run(cands, suite, 0.2, EvalConfig(samples=150, seed=4))
    b = evaluate_run(cands, suite, 0.2, EvalConfig(samples=150, seed=4))
    assert a == b
    with pytest.raises(ParameterError):
        evaluate_run(cands, suite, 0.0)
    with pytest.raises(ParameterError):
        evaluate_run(np.zeros((0, 2)), suite, 0.1)


def test_evaluate_quadratic_solved_run():
    suite = ObjectiveSuite.of([noisy_quadratic(3, np.zeros(3)) for _ in range(4)])
    res = run_medol(RunConfig(K=2, T=3, D=0.1, eta=0.1), suite, ring_matrix(4, 3))
    reports, summary = evaluate_run(res, suite, 0.2, EvalConfig(samples=500))
    assert summary["smoothed_grad_norm"] <= 3 * summary["smoothed_grad_std_error"]
    assert summary["grad_norm"] == 0.0


def test_goldstein_gap_on_abs():
    suite = abs_suite()
    assert goldstein_min_norm(suite, [0.0], 0.5, 64, np.random.default_rng(0)) < 0.05
    assert full_gradient_norm(suite, [0.5]) == 1.0
    est, se = goldstein_proxy(suite, [0.0], 0.5, 2000, np.random.default_rng(1), full_batch=True)
    assert est <= 3 * se


def test_eval_config_defaults():
    cfg = EvalConfig()
    assert (cfg.samples, cfg.k_samples, cfg.a, cfg.mode) == (1000, 64, 0.5, "first")
