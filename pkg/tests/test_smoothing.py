import numpy as np
import pytest
from scipy import stats

from medol.dataio import Dataset
from medol.errors import ParameterError
from medol.objectives import ObjectiveSuite, capped_l1_svm, l1_norm_objective, noisy_quadratic
from medol.smoothing import (first_order_gradient, sample_unit_ball, sample_unit_sphere,
                             smoothed_gradient_mc, smoothed_value_mc, zero_order_gradient)

N = 100_000


def ball_smoothed_l1_gradient(x, delta, scale):
    """Exact gradient of the ball-smoothed ``scale * ||x||_1``.

    A coordinate of the uniform ball in ``d`` dimensions is ``2B - 1`` with
    ``B ~ Beta((d+1)/2, (d+1)/2)``, so each partial derivative is
    ``scale * (2 P(u_j < x_j / delta) - 1)``.
    """
    d = len(x)
    a = (d + 1) / 2
    return scale * (2 * stats.beta.cdf((np.asarray(x) / delta + 1) / 2, a, a) - 1)


class Constant:
    dim = 3
    sample_count = 1

    def value(self, x, xi):
        return 4.2


def test_ball_samples_stay_inside_and_reject_d0():
    rng = np.random.default_rng(0)
    for d in (1, 2, 7, 50):
        assert all(np.linalg.norm(sample_unit_ball(d, rng)) <= 1 for _ in range(200))
    with pytest.raises(ParameterError):
        sample_unit_ball(0, rng)
    with pytest.raises(ParameterError):
        sample_unit_sphere(0, rng)


def test_ball_moments():
    rng = np.random.default_rng(1)
    u = np.array([sample_unit_ball(1, rng)[0] for _ in range(N)])
    assert abs(u.mean()) <= 3 * (1 / np.sqrt(3)) / np.sqrt(N)
    v = np.array([sample_unit_ball(5, rng) for _ in range(N)])
    sq = (v**2).sum(axis=1)
    assert abs(sq.mean() - 5 / 7) <= 3 * sq.std(ddof=1) / np.sqrt(N)


def test_sphere_samples():
    rng = np.random.default_rng(2)
    z = np.array([sample_unit_sphere(4, rng) for _ in range(N)])
    assert np.allclose(np.linalg.norm(z, axis=1), 1.0, atol=1e-12)
    assert np.all(np.abs(z.mean(axis=0)) <= 3 / np.sqrt(N))
    ones = np.array([sample_unit_sphere(1, rng)[0] for _ in range(10_000)])
    assert set(np.unique(ones)) == {-1.0, 1.0}
    assert abs((ones > 0).mean() - 0.5) < 0.02


def test_first_order_examples():
    rng = np.random.default_rng(3)
    F = capped_l1_svm(Dataset.from_dense([[1.0, 0.0]], [1.0]), 0.1, 1.0)
    x = np.array([0.5, 0.2])
    s = first_order_gradient(F, x, 0.0, 0, rng)
    assert np.array_equal(s.g, F.subgradient(x, 0)) and s.z is None
    L = l1_norm_objective(1)
    assert all(first_order_gradient(L, [1.0], 0.5, 0, rng).g[0] == 1.0 for _ in range(500))


def test_first_order_quadratic_mean():
    rng = np.random.default_rng(4)
    d, dp = 3, 0.7
    F = noisy_quadratic(d, np.array([1.0, 0.0, -1.0]))
    x = np.array([0.2, 0.4, 0.1])
    G = np.array([first_order_gradient(F, x, dp, 0, rng).g for _ in range(N)])
    band = 3 * (dp / np.sqrt(d + 2)) / np.sqrt(N)
    assert np.all(np.abs(G.mean(axis=0) - (x - F.x_star)) <= band)


def test_zero_order_examples():
    rng = np.random.default_rng(5)
    L = l1_norm_objective(1)
    for _ in range(100):
        s = zero_order_gradient(L, [1.0], 0.5, 0, rng)
        assert s.g[0] == pytest.approx(1.0, abs=1e-15)
        assert s.kind == "zero"
    assert np.array_equal(zero_order_gradient(Constant(), np.zeros(3), 0.1, 0, rng).g, np.zeros(3))
    with pytest.raises(ParameterError):
        zero_order_gradient(L, [1.0], 0.0, 0, rng)


def test_zero_order_output_is_parallel_to_direction():
    rng = np.random.default_rng(6)
    F = l1_norm_objective(4)
    s = zero_order_gradient(F, np.array([0.3, -0.1, 0.0, 0.2]), 0.2, 0, rng)
    assert np.allclose(np.cross(s.g[:3], s.z[:3]), 0, atol=1e-12)
    assert np.allclose(s.g, (s.g @ s.z) * s.z)


def test_zero_order_linear_mean():
    # a single sample far from the hinge behaves linearly: F = 1 - <a, x>
    a = np.array([0.6, -0.8])
    F = capped_l1_svm(Dataset.from_dense([a], [1.0]), 0.0, 1.0)
    rng = np.random.default_rng(7)
    G = np.array([zero_order_gradient(F, np.zeros(2), 0.1, 0, rng).g for _ in range(N)])
    se = G.std(axis=0, ddof=1) / np.sqrt(N)
    assert np.all(np.abs(G.mean(axis=0) - (-a)) <= 3 * se)


def test_zero_order_same_sample_for_both_evaluations():
    calls = []

    class Spy:
        dim = 2

        def value(self, x, xi):
            calls.append(xi)
            return float(np.sum(x))

    zero_order_gradient(Spy(), np.zeros(2), 0.1, 11, np.random.default_rng(0))
    assert calls == [11, 11]


@pytest.mark.parametrize("d,x", [(1, [0.3]), (10, np.linspace(-0.4, 0.5, 10))])
def test_zero_order_unbiased_against_exact_smoothing(d, x):
    scale = 1 / np.sqrt(d)
    F = l1_norm_objective(d, scale)
    rng = np.random.default_rng(8)
    dp = 0.5
    G = np.array([zero_order_gradient(F, x, dp, 0, rng).g for _ in range(N)])
    se = G.std(axis=0, ddof=1) / np.sqrt(N)
    assert np.all(np.abs(G.mean(axis=0) - ball_smoothed_l1_gradient(x, dp, scale)) <= 4 * se + 1e-12)
    assert np.mean((G**2).sum(axis=1)) <= 16 * np.sqrt(2 * np.pi) * d * F.lipschitz**2


def test_exact_smoothing_oracle_in_one_dimension():
    x = np.array([-0.7, -0.2, 0.0, 0.4, 1.3])
    assert np.allclose([ball_smoothed_l1_gradient([v], 1.0, 1.0)[0] for v in x], np.clip(x, -1, 1))


def test_smoothed_value_examples():
    rng = np.random.default_rng(9)
    f = lambda v: abs(float(v[0]))  # noqa: E731
    assert smoothed_value_mc(f, [0.4], 0.0, 10, rng) == (0.4, 0.0)
    est, se = smoothed_value_mc(f, [0.0], 1.0, N, rng)
    assert abs(est - 0.5) <= 3 * se
    lin = lambda v: float(v @ [1.0, -2.0])  # noqa: E731
    est, se = smoothed_value_mc(lin, np.array([0.5, 0.5]), 0.3, 20_000, rng)
    assert abs(est + 0.5) <= 3 * se


def test_smoothed_gradient_examples():
    rng = np.random.default_rng(10)
    Q = noisy_quadratic(2, np.array([1.0, -1.0]))
    x = np.array([0.0, 0.5])
    est, se = smoothed_gradient_mc(Q, x, 0.4, 20_000, rng)
    assert np.all(np.abs(est - (x - Q.x_star)) <= 3 * se + 1e-12)
    A = l1_norm_objective(1)
    est, se = smoothed_gradient_mc(A, [0.0], 0.5, 20_000, rng)
    assert abs(est[0]) <= 3 * se[0]
    est, se = smoothed_gradient_mc(A, [2.0], 1.0, 2_000, rng)
    assert est[0] == pytest.approx(1.0)


def test_smoothed_gradient_on_suite_and_full_batch():
    rng = np.random.default_rng(11)
    suite = ObjectiveSuite.of([noisy_quadratic(2, np.array([1.0, 0.0]), 0.5, seed=1),
                               noisy_quadratic(2, np.array([-1.0, 2.0]), 0.5, seed=2)])
    x = np.array([0.3, 0.3])
    target = x - np.array([0.0, 1.0])
    est, se = smoothed_gradient_mc(suite, x, 0.2, 20_000, rng)
    assert np.all(np.abs(est - target) <= 3 * se)
    est, se = smoothed_gradient_mc(suite, x, 0.2, 5_000, rng, full_batch=True)
    assert np.all(np.abs(est - target) <= 3 * se + 1e-12)
    with pytest.raises(ParameterError):
        smoothed_gradient_mc(suite, x, 0.2, 10, rng, mode="zero", full_batch=True)
    with pytest.raises(ParameterError):
        smoothed_gradient_mc(suite, x, 0.2, 0, rng)


def test_smoothing_approximation_bound():
    rng = np.random.default_rng(12)
    fixtures = [(l1_norm_objective(1), 1), (l1_norm_objective(10, 1 / np.sqrt(10)), 10)]
    for F, d in fixtures:
        delta = 0.3
        for _ in range(30):
            x = rng.standard_normal(d) * 0.5
            est, se = smoothed_value_mc(F.full_value, x, delta, 500, rng)
            assert abs(est - F.full_value(x)) <= delta * F.lipschitz + 3 * se
