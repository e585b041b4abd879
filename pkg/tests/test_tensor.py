import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from advexplain.tensor import Tensor, add, argmax, l2_norm, mul, scale, sub

# dyadic floats keep the arithmetic in these properties exact
dyadic = st.integers(-64000, 64000).map(lambda n: n / 64.0)
dyadic_lists = st.lists(dyadic, min_size=1, max_size=20)


def test_l2_norm_examples():
    assert l2_norm(Tensor([3.0, 4.0])) == pytest.approx(5.0)
    assert l2_norm(Tensor(np.zeros((2, 3)))) == 0.0
    assert l2_norm(Tensor([1.0, 1.0, 1.0, 1.0])) == pytest.approx(2.0)


def test_l2_norm_random_matches_sum_of_squares_oracle():
    rng = np.random.default_rng(3)
    v = rng.normal(size=7)
    expected = sum(x * x for x in v) ** 0.5
    assert l2_norm(Tensor(v)) == pytest.approx(expected, rel=1e-12)


def test_empty_tensor_rejected():
    with pytest.raises(ValueError, match="empty"):
        Tensor([])


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        Tensor([1.0, np.nan])
    with pytest.raises(ValueError):
        Tensor([np.inf])


def test_argmax_examples():
    assert argmax(Tensor([0.1, 0.7, 0.2])) == 1
    assert argmax(Tensor([1.0, 1.0])) == 0  # tie goes to the lowest index


def test_argmax_random_matches_linear_scan():
    rng = np.random.default_rng(11)
    v = rng.normal(size=5)
    best = 0
    for i in range(1, 5):
        if v[i] > v[best]:
            best = i
    assert argmax(Tensor(v)) == best


def test_argmax_requires_rank_one():
    with pytest.raises(ValueError):
        argmax(Tensor([[1.0, 2.0]]))


def test_elementwise_examples():
    assert np.array_equal(sub(Tensor([1.0, 2.0]), Tensor([1.0, 2.0])).data, [0.0, 0.0])
    assert np.array_equal(scale(Tensor([1.0, 2.0]), 2.0).data, [2.0, 4.0])


def test_elementwise_add_matches_scalar_loop():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=3), rng.normal(size=3)
    got = add(Tensor(a), Tensor(b)).data
    for i in range(3):
        assert got[i] == a[i] + b[i]


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"\(2,\).*\(3,\)"):
        add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


def test_mul_matches_elementwise_product():
    a, b = Tensor([2.0, -3.0]), Tensor([4.0, 5.0])
    assert np.array_equal(mul(a, b).data, [8.0, -15.0])


def test_tensor_data_is_read_only():
    t = Tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        t.data[0] = 9.0


@given(dyadic_lists)
@settings(max_examples=50, deadline=None)
def test_sub_self_is_zero(values):
    t = Tensor(values)
    assert np.all(sub(t, t).data == 0.0)


@given(dyadic_lists, st.sampled_from([-8.0, -2.0, -0.5, 0.5, 2.0, 8.0]))
@settings(max_examples=50, deadline=None)
def test_norm_scales_with_constant(values, c):
    t = Tensor(values)
    lhs = l2_norm(scale(t, c))
    rhs = abs(c) * l2_norm(t)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-300)


@given(dyadic_lists, dyadic)
@settings(max_examples=50, deadline=None)
def test_argmax_invariant_under_constant_shift(values, c):
    t = Tensor(values)
    shifted = Tensor(np.asarray(values) + c)
    assert argmax(shifted) == argmax(t)
