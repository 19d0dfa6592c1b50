"""Tape autodiff: hand-computable cases, the finite-difference oracle,
and structural properties of every op the model composes."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tabdisent import autodiff as ad
from tabdisent.errors import DegenerateInputError, NonFiniteError, ShapeMismatchError
from tabdisent.gradcheck import grad_check


def _scalarize(op):
    """Wrap a tensor-valued op into sum(op(...) * R) with a fixed random
    projection so grad_check sees well-spread upstream gradients."""

    def wrapped(*tensors):
        out = op(*tensors)
        proj = ad.tensor(np.random.default_rng(99).standard_normal(out.shape))
        return ad.sum_all(ad.mul(out, proj))

    return wrapped


# ---------------------------------------------------------------- tensor


def test_tensor_rejects_nan_and_inf():
    with pytest.raises(NonFiniteError):
        ad.tensor([1.0, float("nan")])
    with pytest.raises(NonFiniteError):
        ad.tensor([1.0, float("inf")])


def test_tensor_rejects_rank_4():
    with pytest.raises(ShapeMismatchError):
        ad.tensor(np.zeros((2, 2, 2, 2)))


def test_grad_matches_shape_after_backward(rng):
    x = ad.tensor(rng.standard_normal((3, 4)), requires_grad=True)
    ad.sum_all(x).backward()
    assert x.grad.shape == x.data.shape


def test_backward_requires_scalar_root(rng):
    x = ad.tensor(rng.standard_normal((3, 4)), requires_grad=True)
    with pytest.raises(ShapeMismatchError):
        ad.leaky_relu(x).backward()


def test_backward_frees_tape(rng):
    x = ad.tensor(rng.standard_normal((3, 4)), requires_grad=True)
    y = ad.leaky_relu(x)
    loss = ad.sum_all(y)
    loss.backward()
    assert x.grad is not None
    assert y.grad is None and y._parents == () and y._backward_fn is None
    assert loss._parents == ()


def test_no_grad_suppresses_recording(rng):
    x = ad.tensor(rng.standard_normal((3, 3)), requires_grad=True)
    with ad.no_grad():
        y = ad.softmax_rows(x)
    assert not y.requires_grad and y._backward_fn is None


def test_same_tensor_used_twice_accumulates(rng):
    x = ad.tensor(rng.standard_normal(5), requires_grad=True)
    ad.sum_all(ad.mul(x, x)).backward()
    assert np.allclose(x.grad, 2.0 * x.data, atol=1e-15)


# ---------------------------------------------------------------- matmul


def test_matmul_identity():
    i2 = ad.tensor(np.eye(2))
    m = ad.tensor([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(ad.matmul(i2, m).data, [[1.0, 2.0], [3.0, 4.0]])


def test_matmul_1x2_2x1():
    a = ad.tensor([[1.0, 2.0]])
    b = ad.tensor([[3.0], [4.0]])
    assert ad.matmul(a, b).data.tolist() == [[11.0]]


def test_matmul_matches_triple_loop_exactly(rng):
    # Integer-valued entries keep every partial sum exactly representable,
    # so the comparison holds to the bit regardless of summation order.
    for _ in range(5):
        m, k, n = rng.integers(1, 9, size=3)
        a = rng.integers(-8, 9, size=(m, k)).astype(np.float64)
        b = rng.integers(-8, 9, size=(k, n)).astype(np.float64)
        want = np.zeros((m, n))
        for i in range(m):
            for j in range(n):
                for t in range(k):
                    want[i, j] += a[i, t] * b[t, j]
        assert np.array_equal(ad.matmul(ad.tensor(a), ad.tensor(b)).data, want)


def test_matmul_batched_matches_per_slice(rng):
    a = rng.standard_normal((4, 3, 5))
    b = rng.standard_normal((4, 5, 2))
    got = ad.matmul(ad.tensor(a), ad.tensor(b)).data
    for i in range(4):
        assert np.allclose(got[i], a[i] @ b[i], atol=1e-12)


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        ad.matmul(ad.tensor(np.zeros((2, 3))), ad.tensor(np.zeros((4, 2))))
    with pytest.raises(ShapeMismatchError):
        ad.matmul(ad.tensor(np.zeros((2, 3))), ad.tensor(np.zeros((2, 3, 4))))


@pytest.mark.parametrize("ta", [False, True])
@pytest.mark.parametrize("tb", [False, True])
def test_matmul_gradients_all_transpose_flags(rng, ta, tb):
    a = rng.standard_normal((3, 4) if ta else (4, 3))
    b = rng.standard_normal((5, 3) if tb else (3, 5))
    err = grad_check(_scalarize(lambda x, y: ad.matmul(x, y, ta, tb)), [a, b])
    assert err <= 1e-5


def test_matmul_gradient_batched(rng):
    a = rng.standard_normal((2, 4, 3))
    b = rng.standard_normal((2, 3, 5))
    err = grad_check(_scalarize(ad.matmul), [a, b])
    assert err <= 1e-5


# ---------------------------------------------------------------- softmax


def test_softmax_uniform_on_zero_row():
    out = ad.softmax_rows(ad.tensor([[0.0, 0.0, 0.0]])).data
    assert np.allclose(out, 1.0 / 3.0, atol=1e-15)


@pytest.mark.parametrize("c", [0.0, 5.0, -100.0, 1000.0])
def test_softmax_shift_invariance(c):
    out = ad.softmax_rows(ad.tensor([[c, c + math.log(2.0)]])).data
    assert np.allclose(out, [1.0 / 3.0, 2.0 / 3.0], atol=1e-12)


@given(
    st.integers(1, 6),
    st.integers(1, 6),
    st.integers(0, 2**32 - 1),
    st.floats(-50, 50),
)
def test_softmax_rows_sum_to_one(rows, cols, seed, shift):
    x = np.random.default_rng(seed).standard_normal((rows, cols)) + shift
    out = ad.softmax_rows(ad.tensor(x)).data
    assert np.allclose(out.sum(axis=-1), 1.0, atol=1e-6)
    assert (out > 0.0).all() and (out < 1.0 + 1e-12).all()


def test_softmax_gradient(rng):
    err = grad_check(_scalarize(ad.softmax_rows), [rng.standard_normal((3, 4))])
    assert err <= 1e-5


# ---------------------------------------------------------------- leaky relu


def test_leaky_relu_values():
    out = ad.leaky_relu(ad.tensor([2.0, -1.0]), 0.01).data
    assert np.allclose(out, [2.0, -0.01], atol=1e-15)


def test_leaky_relu_slope_domain():
    with pytest.raises(ValueError):
        ad.leaky_relu(ad.tensor([1.0]), 1.5)


def test_leaky_relu_gradient_away_from_kink(rng):
    x = rng.standard_normal((4, 5))
    err = grad_check(
        _scalarize(lambda t: ad.leaky_relu(t, 0.01)),
        [x],
        exclude=[np.abs(x) < 1e-3],
    )
    assert err <= 1e-5


# ---------------------------------------------------------------- linear


def test_linear_zero_weight_returns_bias(rng):
    x = ad.tensor(rng.standard_normal((4, 3)))
    w = ad.tensor(np.zeros((3, 2)))
    b = ad.tensor([5.0, -1.0])
    out = ad.linear(x, w, b).data
    assert np.array_equal(out, np.tile([5.0, -1.0], (4, 1)))


def test_linear_identity_weight_zero_bias(rng):
    x = rng.standard_normal((4, 3))
    out = ad.linear(ad.tensor(x), ad.tensor(np.eye(3)), ad.tensor(np.zeros(3))).data
    assert np.array_equal(out, x)


def test_linear_shape_mismatch(rng):
    with pytest.raises(ShapeMismatchError):
        ad.linear(ad.tensor(np.zeros((4, 3))), ad.tensor(np.zeros((2, 2))), ad.tensor(np.zeros(2)))


@pytest.mark.parametrize("batched", [False, True])
def test_linear_gradients_all_inputs(rng, batched):
    x = rng.standard_normal((2, 4, 3) if batched else (4, 3))
    w = rng.standard_normal((3, 5))
    b = rng.standard_normal(5)
    err = grad_check(_scalarize(ad.linear), [x, w, b])
    assert err <= 1e-5


# ---------------------------------------------------------------- mse


def test_mse_equal_inputs_is_zero(rng):
    x = rng.standard_normal((3, 3))
    assert ad.mse(ad.tensor(x), ad.tensor(x)).item() == 0.0


def test_mse_hand_value():
    out = ad.mse(ad.tensor([0.0, 0.0]), ad.tensor([1.0, 3.0]))
    assert out.item() == 5.0


def test_mse_shape_mismatch():
    with pytest.raises(ShapeMismatchError):
        ad.mse(ad.tensor([1.0]), ad.tensor([1.0, 2.0]))


def test_mse_gradient(rng):
    err = grad_check(ad.mse, [rng.standard_normal((3, 4)), rng.standard_normal((3, 4))])
    assert err <= 1e-5


# ---------------------------------------------------------------- cosine


def test_cosine_self_is_one(rng):
    a = rng.standard_normal((3, 3))
    assert abs(ad.cosine_sim(ad.tensor(a), ad.tensor(a)).item() - 1.0) < 1e-12


def test_cosine_orthogonal_is_zero():
    out = ad.cosine_sim(ad.tensor([1.0, 0.0]), ad.tensor([0.0, 1.0]))
    assert out.item() == 0.0


def test_cosine_zero_norm_errors():
    with pytest.raises(DegenerateInputError):
        ad.cosine_sim(ad.tensor([0.0, 0.0]), ad.tensor([1.0, 2.0]))


def test_cosine_gradient(rng):
    err = grad_check(ad.cosine_sim, [rng.standard_normal((3, 3)), rng.standard_normal((3, 3))])
    assert err <= 1e-5


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_cosine_range_arbitrary(seed, n):
    r = np.random.default_rng(seed)
    a, b = r.standard_normal(n), r.standard_normal(n)
    if np.linalg.norm(a) < 1e-6 or np.linalg.norm(b) < 1e-6:
        return
    c = ad.cosine_sim(ad.tensor(a), ad.tensor(b)).item()
    assert -1.0 - 1e-12 <= c <= 1.0 + 1e-12


@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_cosine_range_nonnegative_pair(seed, n):
    r = np.random.default_rng(seed)
    a, b = r.uniform(0.01, 1.0, n), r.uniform(0.01, 1.0, n)
    c = ad.cosine_sim(ad.tensor(a), ad.tensor(b)).item()
    assert -1e-12 <= c <= 1.0 + 1e-12


def test_batch_cosine_mean_matches_per_sample_loop(rng):
    a = rng.standard_normal((5, 3, 3))
    b = rng.standard_normal((5, 3, 3))
    got = ad.batch_cosine_mean(ad.tensor(a), ad.tensor(b)).item()
    want = np.mean(
        [ad.cosine_sim(ad.tensor(a[i]), ad.tensor(b[i])).item() for i in range(5)]
    )
    assert abs(got - want) < 1e-12


def test_batch_cosine_mean_gradient(rng):
    err = grad_check(
        ad.batch_cosine_mean, [rng.standard_normal((4, 2, 3)), rng.standard_normal((4, 2, 3))]
    )
    assert err <= 1e-5


# ---------------------------------------------------------------- grad_check itself


def test_gradcheck_sum_all_ones(rng):
    err = grad_check(lambda t: ad.sum_all(t), [rng.standard_normal((3, 4))])
    assert err <= 1e-8


def test_gradcheck_composite_chain(rng):
    x = rng.standard_normal((3, 4))
    w = rng.standard_normal((4, 2))
    b = rng.standard_normal(2)
    y = rng.standard_normal((3, 2))
    target = ad.tensor(y)

    def f(xt, wt, bt):
        return ad.mse(ad.linear(ad.softmax_rows(xt), wt, bt), target)

    assert grad_check(f, [x, w, b]) <= 1e-4


# ---------------------------------------------------------------- misc ops


def test_one_minus(rng):
    x = rng.uniform(0, 1, (3, 3))
    out = ad.one_minus(ad.tensor(x)).data
    assert np.allclose(out, 1.0 - x, atol=1e-15)
    assert grad_check(_scalarize(ad.one_minus), [x]) <= 1e-8


def test_scale_and_add(rng):
    x = rng.standard_normal((2, 2))
    out = ad.add(ad.scale(ad.tensor(x), 2.0), ad.tensor(x))
    assert np.allclose(out.data, 3.0 * x, atol=1e-15)


def test_mean_all(rng):
    x = rng.standard_normal((4, 5))
    assert abs(ad.mean_all(ad.tensor(x)).item() - x.mean()) < 1e-15
    assert grad_check(ad.mean_all, [x]) <= 1e-8
