"""Autodiff engine: op semantics, backward contracts, the gradient oracle."""

import numpy as np
import pytest

from liarnet import tensor as T
from liarnet.tensor import GraphError, OracleError, ShapeError, Tensor


class TestMatmul:
    def test_identity(self):
        eye = Tensor(np.eye(2))
        m = Tensor([[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(T.matmul(eye, m).data, [[1, 2], [3, 4]])

    def test_hand_computed(self):
        out = T.matmul(Tensor([[1.0, 2.0]]), Tensor([[3.0], [4.0]]))
        np.testing.assert_array_equal(out.data, [[11.0]])

    def test_gradients_match_finite_differences(self):
        rng = np.random.default_rng(7)
        a = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        b = Tensor(rng.normal(size=(4, 2)), requires_grad=True)
        report = T.finite_diff_check(lambda: T.matmul(a, b).sum(), {"a": a, "b": b},
                                     step=1e-3, tol=1e-6)
        assert report.passed, str(report)

    def test_shape_mismatch_names_both_shapes(self):
        with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 3\)"):
            T.matmul(Tensor(np.zeros((2, 3))), Tensor(np.zeros((2, 3))))


class TestConcat:
    def test_axis1(self):
        out = T.concat([Tensor([[1.0], [2.0]]), Tensor([[3.0], [4.0]])], axis=1)
        np.testing.assert_array_equal(out.data, [[1, 3], [2, 4]])

    def test_single_tensor_is_identity(self):
        t = Tensor([[1.0, 2.0]])
        assert T.concat([t], axis=0) is t

    def test_gradient_of_sum_is_ones_on_each_input(self):
        a = Tensor(np.random.default_rng(0).normal(size=(2, 3)), requires_grad=True)
        b = Tensor(np.random.default_rng(1).normal(size=(2, 2)), requires_grad=True)
        T.concat([a, b], axis=1).sum().backward()
        np.testing.assert_array_equal(a.grad, np.ones((2, 3)))
        np.testing.assert_array_equal(b.grad, np.ones((2, 2)))

    def test_incompatible_shapes(self):
        with pytest.raises(ShapeError):
            T.concat([Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 3)))], axis=1)

    def test_concat_then_slice_back_is_identity(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            shapes = [(4, int(rng.integers(1, 5))) for _ in range(3)]
            parts = [rng.normal(size=s) for s in shapes]
            out = T.concat([Tensor(p) for p in parts], axis=1).data
            lo = 0
            for p in parts:
                hi = lo + p.shape[1]
                np.testing.assert_array_equal(out[:, lo:hi], p)
                lo = hi


class TestRelu:
    def test_values(self):
        np.testing.assert_array_equal(T.relu(Tensor([-1.0, 0.0, 2.0])).data, [0, 0, 2])

    def test_all_negative_gives_zero_output_and_gradient(self):
        x = Tensor([-1.0, -2.0, -3.0], requires_grad=True)
        T.relu(x).sum().backward()
        np.testing.assert_array_equal(x.grad, np.zeros(3))

    def test_gradient_away_from_kink(self):
        rng = np.random.default_rng(11)
        vals = rng.uniform(0.05, 1.0, size=12) * np.where(rng.random(12) < 0.5, -1, 1)
        x = Tensor(vals, requires_grad=True)
        w = Tensor(rng.normal(size=12))
        report = T.finite_diff_check(lambda: T.mul(T.relu(x), w).sum(), {"x": x},
                                     step=1e-3, tol=1e-6)
        assert report.passed, str(report)


class TestSoftmax:
    def test_uniform_input(self):
        out = T.softmax(Tensor(np.zeros(6)))
        np.testing.assert_allclose(out.data, np.full(6, 1 / 6), atol=1e-15)

    def test_large_values_stable(self):
        out = T.softmax(Tensor([1000.0, 0.0]))
        assert np.all(np.isfinite(out.data))
        np.testing.assert_allclose(out.data, [1.0, 0.0], atol=1e-15)

    def test_probability_vector_and_argmax_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            x = rng.normal(0, 3, size=6)
            s = T.softmax(Tensor(x)).data
            assert abs(s.sum() - 1.0) <= 1e-12
            assert np.all(s >= 0)
            assert np.argmax(s) == np.argmax(x)


class TestBackward:
    def test_linear_gradient(self):
        x = Tensor([[2.0, -1.0, 3.0]])
        w = Tensor(np.zeros((3, 1)), requires_grad=True)
        T.matmul(x, w).sum().backward()
        np.testing.assert_array_equal(w.grad, [[2.0], [-1.0], [3.0]])

    def test_shared_node_accumulates_both_paths(self):
        rng = np.random.default_rng(2)
        w = Tensor(rng.normal(size=(2, 2)), requires_grad=True)
        c1 = Tensor(rng.normal(size=(2, 2)))
        c2 = Tensor(rng.normal(size=(2, 2)))

        def f():
            return T.add(T.mul(w, c1).sum(), T.mul(w, c2).sum())

        report = T.finite_diff_check(f, {"w": w}, step=1e-3, tol=1e-8)
        assert report.passed, str(report)
        T.zero_grads([w])
        f().backward()
        np.testing.assert_allclose(w.grad, c1.data + c2.data, atol=1e-15)

    def test_backward_twice_raises(self):
        loss = Tensor([1.0, 2.0], requires_grad=True).sum()
        loss.backward()
        with pytest.raises(GraphError, match="already"):
            loss.backward()

    def test_non_scalar_loss_raises(self):
        with pytest.raises(GraphError, match="scalar"):
            T.relu(Tensor([1.0, 2.0], requires_grad=True)).backward()

    def test_every_reachable_parameter_gets_a_gradient(self):
        a = Tensor(np.ones((2, 2)), requires_grad=True)
        b = Tensor(np.ones(2), requires_grad=True)
        T.add(T.relu(a), b).sum().backward()
        assert a.grad is not None and b.grad is not None

    def test_forward_is_deterministic(self):
        rng = np.random.default_rng(9)
        x = Tensor(rng.normal(size=(4, 3)))
        w = Tensor(rng.normal(size=(3, 2)))
        one = T.softmax(T.matmul(x, w)).data
        two = T.softmax(T.matmul(x, w)).data
        assert np.array_equal(one, two)


class TestNoGrad:
    def test_no_graph_is_built(self):
        x = Tensor(np.ones(3), requires_grad=True)
        with T.no_grad():
            out = T.relu(x).sum()
        assert not out.requires_grad and out._backward is None


class TestFiniteDiffCheck:
    def test_quadratic_is_sharp(self):
        rng = np.random.default_rng(4)
        w = Tensor(rng.normal(size=8), requires_grad=True)
        report = T.finite_diff_check(lambda: T.mul(w, w).sum(), {"w": w},
                                     step=1e-4, tol=1e-8)
        assert report.passed, str(report)
        assert report.max_rel_error < 1e-8

    def test_dense_relu_softmax_crossentropy_pipeline(self):
        from liarnet.optim import categorical_crossentropy
        rng = np.random.default_rng(6)
        x = Tensor(rng.normal(size=(3, 5)))
        w1 = Tensor(rng.normal(0, 0.5, size=(5, 4)), requires_grad=True)
        b1 = Tensor(rng.normal(0, 0.2, size=4), requires_grad=True)
        w2 = Tensor(rng.normal(0, 0.5, size=(4, 6)), requires_grad=True)
        labels = np.array([0, 3, 5])

        def f():
            h = T.relu(T.add(T.matmul(x, w1), b1))
            return categorical_crossentropy(T.softmax(T.matmul(h, w2)), labels)

        report = T.finite_diff_check(f, {"w1": w1, "b1": b1, "w2": w2},
                                     step=1e-3, tol=1e-4)
        assert report.passed, str(report)

    def test_corrupted_backward_rule_is_located(self):
        w = Tensor(np.array([1.5, -0.5, 2.0]), requires_grad=True)

        def broken_square(t):
            out = Tensor(t.data * t.data, _prev=(t,), _op="broken_square")

            def _backward():
                g = 2.0 * t.data * out.grad
                g[1] *= 3.0  # deliberately wrong at element 1
                T._accum(t, g)
            out._backward = _backward
            return out

        report = T.finite_diff_check(lambda: broken_square(w).sum(), {"w": w},
                                     step=1e-4, tol=1e-6)
        assert not report.passed
        assert report.worst_param == "w"
        assert report.worst_index == 1

    def test_nondeterministic_objective_rejected(self):
        state = {"calls": 0}

        def f():
            state["calls"] += 1
            return Tensor(np.asarray(float(state["calls"])))

        with pytest.raises(OracleError):
            T.finite_diff_check(f, {"w": Tensor(np.ones(1), requires_grad=True)})
