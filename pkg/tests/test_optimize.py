import numpy as np
import pytest

from uqkit.errors import NonFiniteObjective
from uqkit.optimize import lbfgsb_minimize


def quadratic(x):
    return float((x[0] - 3.0) ** 2), np.array([2.0 * (x[0] - 3.0)])


def rosenbrock(x):
    a, b = x
    value = (1 - a) ** 2 + 100.0 * (b - a * a) ** 2
    grad = np.array(
        [-2.0 * (1 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]
    )
    return float(value), grad


def test_unconstrained_quadratic():
    x_opt, value = lbfgsb_minimize(quadratic, [0.0], [(0.0, 10.0)])
    assert x_opt[0] == pytest.approx(3.0, abs=1e-6)
    assert value == pytest.approx(0.0, abs=1e-12)


def test_active_bound():
    x_opt, value = lbfgsb_minimize(quadratic, [0.0], [(0.0, 2.0)])
    assert x_opt[0] == pytest.approx(2.0, abs=1e-8)
    assert value == pytest.approx(1.0, abs=1e-6)


def test_rosenbrock():
    x_opt, value = lbfgsb_minimize(rosenbrock, [-1.2, 1.0], [(-5.0, 5.0)] * 2, max_iter=1000)
    assert value < 1e-8
    np.testing.assert_allclose(x_opt, [1.0, 1.0], atol=1e-4)


def test_never_exceeds_start_value():
    # pathological gradient direction: wrapped objective must not end worse
    def noisy(x):
        return float(np.cos(20 * x[0]) + 0.1 * x[0] ** 2), np.array(
            [-20 * np.sin(20 * x[0]) + 0.2 * x[0]]
        )

    f0, _ = noisy(np.array([0.3]))
    _, value = lbfgsb_minimize(noisy, [0.3], [(-4.0, 4.0)])
    assert value <= f0


def test_result_within_bounds():
    x_opt, _ = lbfgsb_minimize(quadratic, [1.0], [(0.5, 2.5)])
    assert 0.5 <= x_opt[0] <= 2.5


def test_nonfinite_at_start_raises():
    def bad(x):
        return float("nan"), np.zeros(1)

    with pytest.raises(NonFiniteObjective):
        lbfgsb_minimize(bad, [0.0], [(-1.0, 1.0)])


def test_nonfinite_region_backtracks():
    # objective blows up left of 0.5; optimum sits at the finite minimum 1.0
    def partial(x):
        if x[0] < 0.5:
            return float("inf"), np.zeros(1)
        return float((x[0] - 1.0) ** 2), np.array([2.0 * (x[0] - 1.0)])

    x_opt, value = lbfgsb_minimize(partial, [3.0], [(-10.0, 10.0)])
    assert x_opt[0] == pytest.approx(1.0, abs=1e-5)
