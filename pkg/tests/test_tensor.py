"""Autodiff core: forward values, gradient contracts, error handling."""

import numpy as np
import pytest

from respden.errors import NumericError, ShapeError
from respden.gradcheck import check_loss_gradients
from respden.tensor import (
    Tensor,
    layer_norm,
    matmul,
    mean,
    mul,
    no_grad,
    soft_shrink,
    softmax,
    swish_glu,
    total_sum,
)

from oracles import naive_matmul


class TestMatmul:
    def test_identity(self):
        eye = Tensor(np.eye(2))
        m = Tensor([[2.0, 3.0], [4.0, 5.0]])
        np.testing.assert_array_equal(matmul(eye, m).data, m.data)

    def test_inner_product(self):
        out = matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.data, [[11.0]])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(0)
        a, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2))
        got = matmul(Tensor(a), Tensor(b)).data
        np.testing.assert_allclose(got, naive_matmul(a, b), atol=1e-12)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(3, 4\).*\(3, 2\)"):
            matmul(Tensor(np.zeros((3, 4))), Tensor(np.zeros((3, 2))))

    def test_gradient_contract(self):
        rng = np.random.default_rng(1)
        a = Tensor(rng.standard_normal((3, 4)), requires_grad=True)
        b = Tensor(rng.standard_normal((4, 2)), requires_grad=True)
        w = rng.standard_normal((3, 2))
        total_sum(mul(Tensor(w), matmul(a, b))).backward()
        np.testing.assert_allclose(a.grad, w @ b.data.T, atol=1e-12)
        np.testing.assert_allclose(b.grad, a.data.T @ w, atol=1e-12)


class TestSoftmax:
    def test_uniform(self):
        np.testing.assert_allclose(softmax(Tensor([0.0, 0.0, 0.0]), axis=0).data, [1 / 3] * 3)

    def test_analytic_two_point(self):
        out = softmax(Tensor([0.0, np.log(3.0)]), axis=0)
        np.testing.assert_allclose(out.data, [0.25, 0.75], atol=1e-15)

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal((4, 6))
        base = softmax(Tensor(x), axis=1).data
        shifted = softmax(Tensor(x + 13.7), axis=1).data
        np.testing.assert_allclose(shifted, base, atol=1e-12)

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            out = softmax(Tensor(rng.standard_normal((5, 7)) * 10), axis=1).data
            np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)
            assert (out > 0).all() and (out < 1).all()

    def test_invalid_axis(self):
        with pytest.raises(ShapeError):
            softmax(Tensor(np.zeros((2, 2))), axis=5)


class TestLayerNorm:
    def test_constant_row_collapses_to_beta(self):
        out = layer_norm(Tensor([[3.0, 3.0, 3.0]]), Tensor(np.ones(3)), Tensor(np.zeros(3)))
        np.testing.assert_allclose(out.data, 0.0, atol=1e-12)

    def test_already_normalized_row(self):
        out = layer_norm(Tensor([[-1.0, 1.0]]), Tensor(np.ones(2)), Tensor(np.zeros(2)), eps=1e-12)
        np.testing.assert_allclose(out.data, [[-1.0, 1.0]], atol=1e-6)

    def test_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(4)
        x = Tensor(rng.standard_normal((2, 5)), requires_grad=True)
        g = Tensor(rng.standard_normal(5), requires_grad=True)
        b = Tensor(rng.standard_normal(5), requires_grad=True)
        w = Tensor(rng.standard_normal((2, 5)))
        rows = check_loss_gradients(
            lambda: total_sum(mul(w, layer_norm(x, g, b))), {"x": x, "gamma": g, "beta": b}
        )
        assert max(r.max_rel_err for r in rows) < 1e-4

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            layer_norm(Tensor(np.zeros((2, 5))), Tensor(np.ones(4)), Tensor(np.zeros(5)))


class TestSwishGlu:
    def test_zero_input(self):
        rng = np.random.default_rng(5)
        out = swish_glu(Tensor(np.zeros((2, 3))), Tensor(rng.standard_normal((3, 4))),
                        Tensor(rng.standard_normal((3, 4))), Tensor(rng.standard_normal((4, 3))))
        np.testing.assert_array_equal(out.data, 0.0)

    def test_scalar_chain(self):
        one = Tensor([[1.0]])
        out = swish_glu(one, one, one, one)
        np.testing.assert_allclose(out.data, [[1.0 / (1.0 + np.exp(-1.0))]], atol=1e-12)

    def test_gradient_vs_finite_differences(self):
        rng = np.random.default_rng(6)
        x = Tensor(rng.standard_normal((2, 4)), requires_grad=True)
        w1 = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        w2 = Tensor(rng.standard_normal((4, 5)), requires_grad=True)
        w3 = Tensor(rng.standard_normal((5, 4)), requires_grad=True)
        w = Tensor(rng.standard_normal((2, 4)))
        rows = check_loss_gradients(
            lambda: total_sum(mul(w, swish_glu(x, w1, w2, w3))),
            {"x": x, "w1": w1, "w2": w2, "w3": w3},
        )
        assert max(r.max_rel_err for r in rows) < 1e-4


class TestSoftShrink:
    def test_above_threshold(self):
        np.testing.assert_allclose(soft_shrink(Tensor([0.05]), 0.02).data, [0.03], atol=1e-15)

    def test_dead_zone(self):
        assert soft_shrink(Tensor([-0.01]), 0.02).data[0] == 0.0

    def test_zero_alpha_identity(self):
        rng = np.random.default_rng(7)
        x = rng.standard_normal(20)
        np.testing.assert_array_equal(soft_shrink(Tensor(x), 0.0).data, x)

    def test_dead_zone_exactness_and_outside_magnitude(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal(200)
        alpha = 0.5
        out = soft_shrink(Tensor(x), alpha).data
        inside = np.abs(x) <= alpha
        assert (out[inside] == 0.0).all()
        np.testing.assert_allclose(np.abs(out[~inside]), np.abs(x[~inside]) - alpha, atol=1e-15)

    def test_boundary_belongs_to_dead_zone(self):
        out = soft_shrink(Tensor([0.02, -0.02]), 0.02)
        np.testing.assert_array_equal(out.data, [0.0, 0.0])
        x = Tensor([0.02], requires_grad=True)
        total_sum(soft_shrink(x, 0.02)).backward()
        np.testing.assert_array_equal(x.grad, [0.0])

    def test_negative_alpha_rejected(self):
        with pytest.raises(ValueError):
            soft_shrink(Tensor([1.0]), -0.1)


class TestBackward:
    def test_linear_case_grad_is_ones(self):
        w = Tensor(np.random.default_rng(9).standard_normal((3, 4)), requires_grad=True)
        total_sum(w).backward()
        np.testing.assert_array_equal(w.grad, np.ones((3, 4)))

    def test_quadratic_case_grad_is_2w(self):
        w = Tensor(np.random.default_rng(10).standard_normal((2, 5)), requires_grad=True)
        total_sum(mul(w, w)).backward()
        np.testing.assert_allclose(w.grad, 2 * w.data, atol=1e-12)

    def test_accumulation_across_multiple_uses(self):
        x = Tensor([2.0], requires_grad=True)
        total_sum(x + x).backward()
        np.testing.assert_array_equal(x.grad, [2.0])

    def test_non_scalar_loss_rejected(self):
        x = Tensor(np.zeros((2, 2)), requires_grad=True)
        with pytest.raises(ShapeError):
            (x + x).backward()

    def test_unreachable_parameter_keeps_zero_grad(self):
        used = Tensor([1.0, 2.0], requires_grad=True)
        unused = Tensor([3.0], requires_grad=True)
        total_sum(used).backward()
        np.testing.assert_array_equal(unused.grad, [0.0])

    def test_tape_is_freed(self):
        x = Tensor([1.0], requires_grad=True)
        y = x + x
        total_sum(y).backward()
        assert y._parents == () and y._backward_fn is None


class TestFiniteGuard:
    def test_non_finite_construction_rejected(self):
        with pytest.raises(NumericError):
            Tensor([np.inf])
        with pytest.raises(NumericError):
            Tensor([np.nan])

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_overflowing_op_raises_instead_of_propagating(self):
        x = Tensor([1e308])
        with pytest.raises(NumericError):
            x + x

    def test_finite_inputs_produce_finite_outputs(self):
        rng = np.random.default_rng(11)
        x = Tensor(rng.standard_normal((3, 3)) * 50)
        for out in (softmax(x, axis=1), soft_shrink(x, 0.1), mean(x)):
            assert np.isfinite(out.data).all()


class TestBroadcastAndModes:
    def test_bias_add_gradient_shapes(self):
        x = Tensor(np.ones((3, 4)), requires_grad=True)
        b = Tensor(np.ones(4), requires_grad=True)
        total_sum(x + b).backward()
        assert x.grad.shape == (3, 4) and b.grad.shape == (4,)
        np.testing.assert_array_equal(b.grad, 3 * np.ones(4))

    def test_scalar_times_matrix(self):
        s = Tensor(np.asarray(2.0), requires_grad=True)
        m = Tensor(np.ones((2, 2)))
        total_sum(mul(s, m)).backward()
        np.testing.assert_allclose(s.grad, 4.0)

    def test_no_grad_builds_no_graph(self):
        x = Tensor([1.0], requires_grad=True)
        with no_grad():
            y = x + x
        assert not y.requires_grad and y._backward_fn is None

    def test_mean_axis(self):
        x = Tensor(np.arange(12.0).reshape(3, 4), requires_grad=True)
        out = mean(x, axis=0)
        np.testing.assert_allclose(out.data, x.data.mean(axis=0))
        total_sum(out).backward()
        np.testing.assert_allclose(x.grad, np.full((3, 4), 1 / 3))
