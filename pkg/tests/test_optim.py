"""Update-rule recurrences and determinism."""
import numpy as np
import pytest

from waveanom.errors import ConfigError, NumericalError
from waveanom.optim import OptimizerState, optimizer_step
from waveanom.tensor import parameter


def test_plain_sgd_single_step():
    p = parameter([0.0])
    opt = OptimizerState(rule="sgd_momentum", learning_rate=1.0, momentum=0.0, l2=0.0)
    optimizer_step(opt, [p], [np.array([1.0])])
    np.testing.assert_allclose(p.data, [-1.0])


def test_momentum_second_step_magnitude():
    # v1 = -lr*g, v2 = 0.6*v1 - lr*g -> |v2| = lr * 1.6
    p = parameter([0.0])
    opt = OptimizerState(rule="sgd_momentum", learning_rate=0.005, momentum=0.6, l2=0.0)
    optimizer_step(opt, [p], [np.array([1.0])])
    first = p.data.copy()
    optimizer_step(opt, [p], [np.array([1.0])])
    second_update = p.data - first
    np.testing.assert_allclose(np.abs(second_update), [0.005 * 1.6], rtol=1e-12)


def test_zero_gradient_no_motion():
    p = parameter([1.0, -2.0])
    opt = OptimizerState(rule="sgd_momentum", learning_rate=0.1, momentum=0.0, l2=0.0)
    optimizer_step(opt, [p], [np.zeros(2)])
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_l2_pulls_towards_zero():
    p = parameter([2.0])
    opt = OptimizerState(rule="sgd_momentum", learning_rate=0.1, momentum=0.0, l2=0.1)
    optimizer_step(opt, [p], [np.zeros(1)])
    np.testing.assert_allclose(p.data, [2.0 - 0.1 * 0.1 * 2.0])


def test_adam_first_step_is_lr_sized():
    # With bias correction the first Adam step is ~lr * sign(g).
    p = parameter([0.0])
    opt = OptimizerState(rule="adam", learning_rate=1e-3, l2=0.0)
    optimizer_step(opt, [p], [np.array([3.7])])
    np.testing.assert_allclose(p.data, [-1e-3], rtol=1e-6)


def test_adam_matches_hand_recurrence():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    p = parameter([1.0])
    opt = OptimizerState(rule="adam", learning_rate=lr, l2=0.0)
    m = v = 0.0
    x = 1.0
    for t in range(1, 6):
        g = 2 * x  # loss x^2: refresh gradient from current value
        optimizer_step(opt, [p], [np.array([g])])
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x = x - lr * (m / (1 - b1 ** t)) / (np.sqrt(v / (1 - b2 ** t)) + eps)
        np.testing.assert_allclose(p.data, [x], rtol=1e-12)


def test_rmsprop_step():
    p = parameter([0.0])
    opt = OptimizerState(rule="rmsprop", learning_rate=0.01, l2=0.0)
    optimizer_step(opt, [p], [np.array([2.0])])
    s = 0.1 * 4.0
    np.testing.assert_allclose(p.data, [-0.01 * 2.0 / (np.sqrt(s) + 1e-8)])


def test_nan_gradient_raises_with_diagnostic():
    p = parameter([0.0])
    opt = OptimizerState(rule="sgd_momentum", learning_rate=0.1)
    with pytest.raises(NumericalError, match="parameter 0"):
        optimizer_step(opt, [p], [np.array([np.nan])])


def test_invalid_hyperparameters():
    with pytest.raises(ConfigError):
        OptimizerState(learning_rate=0.0)
    with pytest.raises(ConfigError):
        OptimizerState(momentum=1.0)
    with pytest.raises(ConfigError):
        OptimizerState(l2=-0.1)
    with pytest.raises(ConfigError):
        OptimizerState(rule="adagrad")


@pytest.mark.parametrize("rule", ["sgd_momentum", "adam", "rmsprop"])
def test_bit_identical_trajectories(rule, rng):
    def run():
        r = np.random.default_rng(7)
        p = parameter(r.normal(size=(4, 3)))
        opt = OptimizerState(rule=rule, learning_rate=0.01, momentum=0.6, l2=0.1)
        for _ in range(20):
            optimizer_step(opt, [p], [r.normal(size=(4, 3))])
        return p.data

    a, b = run(), run()
    assert a.tobytes() == b.tobytes()


def test_moment_buffers_match_parameter_shapes(rng):
    p1 = parameter(rng.normal(size=(3, 2)))
    p2 = parameter(rng.normal(size=(5,)))
    opt = OptimizerState(rule="adam", learning_rate=0.01)
    optimizer_step(opt, [p1, p2], [np.ones((3, 2)), np.ones(5)])
    assert opt.slots[0][0].shape == (3, 2)
    assert opt.slots[1][1].shape == (5,)
