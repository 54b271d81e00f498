"""Adam: bias-corrected update formula, fixed points, convergence."""

import numpy as np
import pytest

from respden.errors import ShapeError
from respden.optim import AdamState, adam_step
from respden.tensor import Tensor

from oracles import adam_scripted


def test_first_step_is_signlike():
    lr = 0.05
    for g in (0.7, -2.3):
        p = Tensor(np.array([1.0]), requires_grad=True)
        state = AdamState()
        adam_step({"w": p}, {"w": np.array([g])}, state, lr=lr)
        update = p.data[0] - 1.0
        np.testing.assert_allclose(update, -lr * g / (abs(g) + 1e-8), atol=1e-15)
        np.testing.assert_allclose(update, -lr * np.sign(g), rtol=1e-6)


def test_zero_grad_zero_decay_is_fixed_point():
    p = Tensor(np.array([[1.5, -2.0]]), requires_grad=True)
    state = AdamState()
    for _ in range(5):
        adam_step({"w": p}, {"w": np.zeros((1, 2))}, state, lr=0.1, weight_decay=0.0)
    np.testing.assert_array_equal(p.data, [[1.5, -2.0]])


def test_quadratic_convergence_matches_scripted_oracle():
    lr, steps = 0.1, 100
    p = Tensor(np.array([0.0]), requires_grad=True)
    state = AdamState()
    trajectory = [float(p.data[0])]
    for _ in range(steps):
        g = 2.0 * (p.data - 3.0)
        adam_step({"w": p}, {"w": g}, state, lr=lr)
        trajectory.append(float(p.data[0]))

    oracle = adam_scripted(lambda w: 2.0 * (w - 3.0), 0.0, lr, steps)
    np.testing.assert_allclose(trajectory, oracle, atol=1e-12)
    assert abs(trajectory[-1] - 3.0) < 0.5

    # approach is monotone until the iterate first crosses the optimum
    dists = [abs(w - 3.0) for w in trajectory]
    crossing = next(i for i, w in enumerate(trajectory) if w >= 3.0)
    assert all(dists[i + 1] < dists[i] for i in range(crossing - 1))


def test_decoupled_weight_decay_applied_before_adaptive_step():
    lr, wd = 0.1, 0.5
    p = Tensor(np.array([2.0]), requires_grad=True)
    adam_step({"w": p}, {"w": np.zeros(1)}, AdamState(), lr=lr, weight_decay=wd)
    # zero gradient: only the multiplicative decay acts
    np.testing.assert_allclose(p.data, [2.0 * (1.0 - lr * wd)], atol=1e-15)


def test_shape_mismatch_rejected():
    p = Tensor(np.zeros((2, 2)), requires_grad=True)
    with pytest.raises(ShapeError):
        adam_step({"w": p}, {"w": np.zeros(3)}, AdamState(), lr=0.1)


def test_non_positive_lr_rejected():
    p = Tensor(np.zeros(1), requires_grad=True)
    with pytest.raises(ValueError):
        adam_step({"w": p}, {"w": np.zeros(1)}, AdamState(), lr=0.0)
