"""
Tests for the reverse-mode autodiff tape and its operations.
"""

import sys

import numpy as np
import pytest

sys.path.insert(0, 'src')

from advlayout import autodiff as ad
from advlayout.autodiff import Tape, Tensor, grad_check
from advlayout.errors import DomainError, NonScalarLoss, ShapeMismatch


def weights_like(out: Tensor) -> np.ndarray:
    """Fixed positive weights so the checked loss depends on every output entry."""
    return 1.0 + 0.1 * np.arange(out.value.size, dtype=float).reshape(out.shape)


def weighted_sum(tape: Tape, out: Tensor) -> Tensor:
    return ad.sum(ad.elementwise_mul(out, tape.constant(weights_like(out))))


B = np.random.default_rng(0).uniform(0.1, 0.5, size=(4, 3))
C = np.random.default_rng(1).uniform(0.5, 2.0, size=(3, 4))
INDEX = np.array([0, 2, 2])

UNARY_OPS = {
    "add": lambda tape, x: ad.add(x, tape.constant(C)),
    "add_broadcast": lambda tape, x: ad.add(x, tape.constant(C[:1])),
    "sub": lambda tape, x: ad.sub(tape.constant(C), x),
    "scalar_mul": lambda tape, x: ad.scalar_mul(x, -1.5),
    "elementwise_mul": lambda tape, x: ad.elementwise_mul(x, x),
    "matmul": lambda tape, x: ad.matmul(x, tape.constant(B)),
    "row_concat": lambda tape, x: ad.row_concat(x, ad.scalar_mul(x, 2.0)),
    "leaky_relu": lambda tape, x: ad.leaky_relu(x, 0.2),
    "leaky_relu_negative": lambda tape, x: ad.leaky_relu(ad.scalar_mul(x, -1.0), 0.2),
    "sigmoid": lambda tape, x: ad.sigmoid(x),
    "softplus": lambda tape, x: ad.softplus(x),
    "log": lambda tape, x: ad.log(x),
    "pow_half": lambda tape, x: ad.pow_scalar(x, 0.5),
    "pow_three": lambda tape, x: ad.pow_scalar(x, 3.0),
    "mean_rows": lambda tape, x: ad.mean_rows(x),
    "sum": lambda tape, x: ad.sum(x),
    "scatter_mean": lambda tape, x: ad.scatter_mean(x, INDEX, 4),
    "gather_rows": lambda tape, x: ad.gather_rows(x, np.array([2, 0, 2, 1])),
    "l2_norm_rows": lambda tape, x: ad.l2_norm_rows(x),
}


def test_documented_example():
    tape = Tape()
    w = tape.variable(np.ones((3, 1)))
    x = tape.constant(np.arange(6.0).reshape(2, 3))
    loss = ad.sum(ad.sigmoid(ad.matmul(x, w)))
    grads = tape.backward(loss)
    z = x.value @ w.value
    s = 1 / (1 + np.exp(-z))
    assert loss.item() == pytest.approx(float(s.sum()))
    assert np.allclose(grads[w], x.value.T @ (s * (1 - s)))


@pytest.mark.parametrize("name", sorted(UNARY_OPS))
def test_op_gradients_match_finite_differences(name):
    x = np.random.default_rng(7).uniform(0.5, 2.0, size=(3, 4))
    op = UNARY_OPS[name]
    assert grad_check(lambda tape, xt: weighted_sum(tape, op(tape, xt)), x) < 1e-5


def _composite(seed: int):
    rng = np.random.default_rng(seed)
    matrices = [rng.uniform(0.1, 0.5, size=(4, 4)) for _ in range(6)]
    factors = [rng.uniform(0.5, 2.0, size=(3, 4)) for _ in range(6)]
    blocks = [int(b) for b in rng.integers(0, 8, size=6)]

    def f(tape: Tape, x: Tensor) -> Tensor:
        h = x
        for k, block in enumerate(blocks):
            if block == 0:
                h = ad.sigmoid(h)
            elif block == 1:
                h = ad.softplus(h)
            elif block == 2:
                h = ad.log(ad.add(h, tape.constant(np.ones(h.shape))))
            elif block == 3:
                h = ad.scalar_mul(h, 0.7)
            elif block == 4:
                h = ad.leaky_relu(h, 0.1)
            elif block == 5:
                h = ad.matmul(h, tape.constant(matrices[k]))
            elif block == 6:
                h = ad.elementwise_mul(h, tape.constant(factors[k]))
            else:
                h = ad.pow_scalar(h, 0.5)
        return weighted_sum(tape, h)

    return f


@pytest.mark.parametrize("seed", range(20))
def test_composite_gradients_match_finite_differences(seed):
    x = np.random.default_rng(100 + seed).uniform(0.5, 2.0, size=(3, 4))
    assert grad_check(_composite(seed), x) < 1e-4


def test_grad_check_reports_kinks():
    error = grad_check(lambda tape, xt: ad.sum(ad.leaky_relu(xt, 0.01)), np.zeros((1, 1)))
    assert error > 1e-2


def test_shared_subexpression_accumulates():
    tape = Tape()
    x = tape.variable(np.array([[2.0]]))
    loss = ad.add(ad.scalar_mul(x, 2.0), ad.scalar_mul(x, 3.0))
    assert tape.backward(loss)[x][0, 0] == pytest.approx(5.0)

    tape = Tape()
    x = tape.variable(np.array([[3.0]]))
    square = x * x
    assert tape.backward(square + x)[x][0, 0] == pytest.approx(7.0)


def test_unreachable_and_constant_gradients_are_zero():
    tape = Tape()
    x = tape.variable(np.ones((2, 2)))
    unused = tape.variable(np.ones((3, 1)))
    c = tape.constant(np.ones((2, 2)))
    grads = tape.backward(ad.sum(x * c))
    assert np.array_equal(grads[unused], np.zeros((3, 1)))
    assert np.array_equal(grads[c], np.zeros((2, 2)))
    assert np.array_equal(grads[x], np.ones((2, 2)))


def test_constants_are_not_recorded():
    tape = Tape()
    a = tape.constant(np.ones((2, 2)))
    out = ad.sigmoid(a @ a)
    assert not out.tracked
    assert len(tape) == 0


def test_scatter_mean_and_gather_rows_values():
    tape = Tape()
    a = tape.variable(np.array([[1.0], [3.0], [5.0]]))
    out = ad.scatter_mean(a, np.array([0, 0, 2]), 3)
    assert np.array_equal(out.value, [[2.0], [0.0], [5.0]])
    assert np.allclose(tape.backward(ad.sum(out))[a], [[0.5], [0.5], [1.0]])

    tape = Tape()
    b = tape.variable(np.array([[1.0], [2.0]]))
    gathered = ad.gather_rows(b, np.array([0, 0, 1]))
    assert np.array_equal(tape.backward(ad.sum(gathered))[b], [[2.0], [1.0]])


def test_l2_norm_gradient_at_origin_is_zero():
    tape = Tape()
    a = tape.variable(np.array([[0.0, 0.0], [3.0, 4.0]]))
    norms = ad.l2_norm_rows(a)
    assert np.array_equal(norms.value, [[0.0], [5.0]])
    assert np.allclose(tape.backward(ad.sum(norms))[a], [[0.0, 0.0], [0.6, 0.8]])


def test_softplus_and_sigmoid_are_stable():
    tape = Tape()
    x = tape.variable(np.array([[-1000.0, 0.0, 1000.0]]))
    assert np.allclose(ad.softplus(x).value, [[0.0, np.log(2.0), 1000.0]])
    assert np.allclose(ad.sigmoid(x).value, [[0.0, 0.5, 1.0]])


def test_non_scalar_loss():
    tape = Tape()
    x = tape.variable(np.ones((2, 2)))
    with pytest.raises(NonScalarLoss):
        tape.backward(x * 2.0)


def test_domain_errors():
    tape = Tape()
    with pytest.raises(DomainError):
        ad.log(tape.variable(np.array([[1.0, 0.0]])))
    with pytest.raises(DomainError):
        ad.leaky_relu(tape.variable(np.ones((1, 1))), 1.5)
    with pytest.raises(DomainError):
        ad.pow_scalar(tape.variable(np.array([[-1.0]])), 0.5)
    with pytest.raises(DomainError):
        grad_check(lambda t, xt: ad.sum(xt), np.ones((1, 1)), eps=0.0)


def test_shape_mismatches():
    tape = Tape()
    a = tape.variable(np.ones((2, 3)))
    with pytest.raises(ShapeMismatch):
        ad.matmul(a, a)
    with pytest.raises(ShapeMismatch):
        ad.add(a, tape.constant(np.ones((3, 2))))
    with pytest.raises(ShapeMismatch):
        ad.row_concat(a, tape.constant(np.ones((2, 2))))
    with pytest.raises(ShapeMismatch):
        ad.scatter_mean(a, np.array([0, 1, 1]), 2)
    with pytest.raises(ShapeMismatch):
        ad.add(a, Tape().variable(np.ones((2, 3))))


def test_backward_is_deterministic():
    x = np.random.default_rng(3).uniform(0.5, 2.0, size=(3, 4))

    def run():
        tape = Tape()
        xt = tape.variable(x)
        return tape.backward(_composite(5)(tape, xt))[xt]

    assert np.array_equal(run(), run())
