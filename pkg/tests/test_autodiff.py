import numpy as np
import pytest

from wdsel import autodiff as ad
from wdsel.autodiff import (
    NonFiniteError,
    Tensor,
    add,
    backward,
    conv1d,
    diag_part,
    inner_product,
    l1_norm,
    log2,
    matmul,
    mul,
    reciprocal,
    relu,
    reshape,
    sgd_step,
    sigmoid,
    sqrt,
    stop_gradient_mask,
    tmean,
    transpose,
    tsum,
)
from wdsel.errors import InputError, StructureError

FD_EPS = 1e-5
FD_TOL = 1e-4
FD_FLOOR = 1e-6


def numeric_grad(f, x0: np.ndarray, eps: float = FD_EPS) -> np.ndarray:
    """Central-difference gradient of a scalar function of one array."""
    g = np.zeros_like(x0, dtype=np.float64)
    flat = x0.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x0)
        flat[i] = orig - eps
        lo = f(x0)
        flat[i] = orig
        gf[i] = (hi - lo) / (2.0 * eps)
    return g


def max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.abs(numeric), FD_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / denom))


def check_grads(build, arrays, seed_note=""):
    """Compare backward() grads against central differences for every input.

    build(tensors) must return a scalar loss Tensor; arrays is the list of
    initial values, one per differentiable input.
    """
    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    loss = build(tensors)
    backward(loss)
    for k, t in enumerate(tensors):
        def scalar(x, k=k):
            probes = [Tensor(a.copy()) for a in arrays]
            probes[k] = Tensor(x.copy())
            return float(build(probes).data)

        num = numeric_grad(scalar, arrays[k].copy())
        assert t.grad is not None, f"missing grad on input {k} {seed_note}"
        err = max_rel_err(t.grad, num)
        assert err < FD_TOL, f"input {k}: rel err {err:.2e} {seed_note}"


# ---------------------------------------------------------------------------
# forward examples


def test_relu_example():
    out = relu(Tensor([-1.0, 0.0, 2.0]))
    np.testing.assert_array_equal(out.data, [0.0, 0.0, 2.0])


def test_matmul_ones_example():
    out = matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((3, 1))))
    np.testing.assert_array_equal(out.data, [[3.0], [3.0]])


def test_conv1d_example():
    x = Tensor(np.array([[1.0, 2.0, 3.0, 4.0]]))
    w = Tensor(np.array([[[1.0, 0.0, -1.0]]]))
    out = conv1d(x, w, stride=1, padding=0)
    np.testing.assert_allclose(out.data, [[-2.0, -2.0]], atol=1e-15)


def test_conv1d_padding_and_stride():
    x = Tensor(np.array([[1.0, 2.0, 3.0, 4.0]]))
    w = Tensor(np.array([[[1.0, 1.0]]]))
    out = conv1d(x, w, stride=2, padding=1)
    # padded signal [0,1,2,3,4,0]; windows at 0,2,4
    np.testing.assert_allclose(out.data, [[1.0, 5.0, 4.0]], atol=1e-15)


def test_sigmoid_symmetry_and_range():
    x = np.linspace(-30.0, 30.0, 101)
    out = sigmoid(Tensor(x)).data
    assert np.all(out > 0.0) and np.all(out < 1.0)
    np.testing.assert_allclose(out + out[::-1], 1.0, atol=1e-12)


def test_sigmoid_extreme_inputs_stay_finite():
    out = sigmoid(Tensor([-1000.0, 1000.0])).data
    np.testing.assert_allclose(out, [0.0, 1.0], atol=1e-300)


def test_sum_mean_axis_semantics():
    a = np.arange(6.0).reshape(2, 3)
    assert tsum(Tensor(a)).data == 15.0
    np.testing.assert_array_equal(tsum(Tensor(a), axis=0).data, a.sum(axis=0))
    np.testing.assert_array_equal(tmean(Tensor(a), axis=1).data, a.mean(axis=1))


def test_l1_log2_sqrt_reciprocal_values():
    assert l1_norm(Tensor([-3.0, 4.0])).data == 7.0
    np.testing.assert_allclose(log2(Tensor([1.0, 2.0, 8.0])).data, [0.0, 1.0, 3.0])
    np.testing.assert_allclose(sqrt(Tensor([4.0, 9.0])).data, [2.0, 3.0])
    np.testing.assert_allclose(reciprocal(Tensor([2.0, -4.0])).data, [0.5, -0.25])


def test_inner_product_and_diag_part_values():
    assert inner_product(Tensor([1.0, 2.0]), Tensor([3.0, 4.0])).data == 11.0
    m = np.arange(9.0).reshape(3, 3)
    np.testing.assert_array_equal(diag_part(Tensor(m)).data, [0.0, 4.0, 8.0])


def test_transpose_reshape_values():
    m = np.arange(6.0).reshape(2, 3)
    np.testing.assert_array_equal(transpose(Tensor(m)).data, m.T)
    np.testing.assert_array_equal(reshape(Tensor(m), (3, 2)).data, m.reshape(3, 2))


def test_operator_sugar_matches_primitives():
    a, b = Tensor([1.0, 2.0]), Tensor([3.0, 5.0])
    np.testing.assert_array_equal((a + b).data, [4.0, 7.0])
    np.testing.assert_array_equal((a * b).data, [3.0, 10.0])
    np.testing.assert_array_equal((a - b).data, [-2.0, -3.0])
    np.testing.assert_array_equal((2.0 - a).data, [1.0, 0.0])
    np.testing.assert_array_equal((3.0 * a).data, [3.0, 6.0])


# ---------------------------------------------------------------------------
# shape and input validation


def test_add_shape_mismatch_names_both_shapes():
    with pytest.raises(StructureError, match=r"\(2,\).*\(3,\)"):
        add(Tensor([1.0, 2.0]), Tensor([1.0, 2.0, 3.0]))


def test_matmul_shape_mismatch():
    with pytest.raises(StructureError):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))
    with pytest.raises(StructureError):
        matmul(Tensor(np.ones((2, 2, 2))), Tensor(np.ones((2, 2))))


def test_conv1d_validation():
    x, w = Tensor(np.ones((1, 8))), Tensor(np.ones((2, 1, 3)))
    with pytest.raises(StructureError):
        conv1d(Tensor(np.ones(8)), w)
    with pytest.raises(StructureError):
        conv1d(x, Tensor(np.ones((2, 3, 3))))  # channel mismatch
    with pytest.raises(InputError):
        conv1d(x, w, stride=0)
    with pytest.raises(InputError):
        conv1d(x, w, padding=-1)
    with pytest.raises(StructureError):
        conv1d(Tensor(np.ones((1, 2))), w)  # kernel longer than input


def test_inner_product_shape_mismatch():
    with pytest.raises(StructureError):
        inner_product(Tensor([1.0]), Tensor([1.0, 2.0]))


def test_diag_part_rejects_non_square():
    with pytest.raises(StructureError):
        diag_part(Tensor(np.ones((2, 3))))


def test_reshape_rejects_bad_size():
    with pytest.raises(StructureError):
        reshape(Tensor(np.ones(6)), (4, 2))


def test_backward_rejects_non_scalar_loss():
    with pytest.raises(InputError):
        backward(Tensor([1.0, 2.0], requires_grad=True))


def test_nonfinite_forward_raises():
    big = Tensor([1e308])
    with np.errstate(divide="ignore", over="ignore"):
        with pytest.raises(NonFiniteError):
            add(big, big)
        with pytest.raises(NonFiniteError):
            log2(Tensor([0.0]))
        with pytest.raises(NonFiniteError):
            reciprocal(Tensor([0.0]))


# ---------------------------------------------------------------------------
# backward examples


def test_backward_x_squared():
    x = Tensor(3.0, requires_grad=True)
    backward(mul(x, x))
    np.testing.assert_allclose(x.grad, 6.0)


def test_backward_sum_relu():
    x = Tensor([-1.0, 2.0], requires_grad=True)
    backward(tsum(relu(x)))
    np.testing.assert_array_equal(x.grad, [0.0, 1.0])


def test_backward_accumulates_over_reuse():
    x = Tensor([1.0, 2.0], requires_grad=True)
    backward(tsum(add(x, x)))
    np.testing.assert_array_equal(x.grad, [2.0, 2.0])


def test_backward_zeroes_dead_paths():
    x = Tensor([1.0, 2.0], requires_grad=True)
    y = Tensor([5.0], requires_grad=True)
    loss = tsum(mul(x, x))
    _unused = relu(y)
    backward(loss)
    np.testing.assert_array_equal(x.grad, [2.0, 4.0])
    assert y.grad is None  # outside the loss graph entirely


def test_backward_masked_parameter_gets_explicit_zeros():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = tsum(stop_gradient_mask(x, np.zeros(2)))
    backward(loss)
    np.testing.assert_array_equal(x.grad, [0.0, 0.0])


# ---------------------------------------------------------------------------
# stop_gradient_mask


def test_mask_forward_identity():
    x = Tensor([1.0, -2.0, 3.0])
    out = stop_gradient_mask(x, np.array([1.0, 0.0, 1.0]))
    np.testing.assert_array_equal(out.data, x.data)


def test_mask_all_ones_matches_unmasked():
    rng = np.random.default_rng(0)
    a = rng.normal(size=5)
    x1 = Tensor(a.copy(), requires_grad=True)
    backward(tsum(mul(x1, x1)))
    x2 = Tensor(a.copy(), requires_grad=True)
    backward(tsum(mul(stop_gradient_mask(x2, np.ones(5)), x2)))
    # product rule still routes half the gradient through the mask
    np.testing.assert_allclose(x2.grad, x1.grad, atol=1e-15)


def test_mask_all_zeros_blocks_everything():
    x = Tensor([1.0, 2.0, 3.0], requires_grad=True)
    backward(tsum(stop_gradient_mask(x, np.zeros(3))))
    np.testing.assert_array_equal(x.grad, np.zeros(3))


def test_mask_partial_on_sum():
    x = Tensor([4.0, 7.0], requires_grad=True)
    backward(tsum(stop_gradient_mask(x, np.array([1.0, 0.0]))))
    np.testing.assert_array_equal(x.grad, [1.0, 0.0])


def test_mask_shape_mismatch():
    with pytest.raises(StructureError):
        stop_gradient_mask(Tensor([1.0, 2.0]), np.ones(3))


# ---------------------------------------------------------------------------
# sgd_step


def test_sgd_single_step_example():
    p = Tensor(1.0, requires_grad=True)
    p.grad = np.asarray(2.0)
    sgd_step([p], 0.1)
    np.testing.assert_allclose(p.data, 0.8)
    assert p.grad is None


def test_sgd_zero_lr_is_noop():
    p = Tensor([1.0, -2.0], requires_grad=True)
    p.grad = np.array([5.0, 5.0])
    sgd_step([p], 0.0)
    np.testing.assert_array_equal(p.data, [1.0, -2.0])


def test_sgd_missing_grad_rejected():
    p = Tensor(1.0, requires_grad=True)
    with pytest.raises(InputError):
        sgd_step([p], 0.1)


def test_sgd_converges_on_quadratic():
    p = Tensor(0.0, requires_grad=True)
    for _ in range(200):
        backward(mul(p - 3.0, p - 3.0))
        sgd_step([p], 0.1)
    assert abs(float(p.data) - 3.0) < 1e-3


def test_sgd_momentum_accelerates_quadratic():
    # heavy-ball modulus sqrt(beta)=0.71 beats the plain contraction 0.9
    def run(momentum):
        p = Tensor(0.0, requires_grad=True)
        for _ in range(30):
            backward(mul(p - 3.0, p - 3.0))
            sgd_step([p], 0.05, momentum=momentum)
        return abs(float(p.data) - 3.0)

    assert run(0.5) < run(0.0)


# ---------------------------------------------------------------------------
# finite-difference gradient checks, primitive by primitive


def rng_for(seed):
    return np.random.default_rng(seed)


@pytest.mark.parametrize("seed", range(10))
def test_grad_add_mul_broadcast(seed):
    r = rng_for(seed)
    a = r.normal(size=(4, 5))
    b = r.normal(size=(1, 5))
    c = r.normal(size=(4, 1))
    check_grads(
        lambda t: tsum(mul(add(t[0], t[1]), t[2])),
        [a, b, c],
        f"(seed {seed})",
    )


@pytest.mark.parametrize("seed", range(10))
def test_grad_matmul(seed):
    r = rng_for(seed)
    a = r.normal(size=(3, 4))
    b = r.normal(size=(4, 2))
    check_grads(lambda t: tsum(matmul(t[0], t[1])), [a, b], f"(seed {seed})")


def test_grad_matmul_vector_cases():
    r = rng_for(1)
    m = r.normal(size=(3, 4))
    v = r.normal(size=4)
    u = r.normal(size=3)
    check_grads(lambda t: tsum(matmul(t[0], t[1])), [m, v])
    check_grads(lambda t: tsum(matmul(t[0], t[1])), [u, m])
    check_grads(lambda t: matmul(t[0], t[1]), [v, v.copy()])


@pytest.mark.parametrize("stride,padding", [(1, 0), (1, 2), (2, 0), (2, 1), (3, 2)])
def test_grad_conv1d(stride, padding):
    r = rng_for(stride * 10 + padding)
    x = r.normal(size=(2, 16))
    w = r.normal(size=(3, 2, 4))
    check_grads(
        lambda t: tsum(conv1d(t[0], t[1], stride=stride, padding=padding)),
        [x, w],
    )


@pytest.mark.parametrize("seed", range(10))
def test_grad_elementwise_chain(seed):
    r = rng_for(seed)
    # keep relu inputs away from the kink and sqrt/log2 strictly positive
    x = r.uniform(0.5, 2.0, size=12)

    def build(t):
        y = sigmoid(relu(t[0]))
        return tsum(add(sqrt(y), log2(add(y, Tensor(np.full(12, 1.0))))))

    check_grads(build, [x], f"(seed {seed})")


@pytest.mark.parametrize("seed", range(10))
def test_grad_reductions_and_norms(seed):
    r = rng_for(seed)
    x = r.normal(size=(3, 7)) + 0.1  # keep |x| off zero for l1 subgradient

    def build(t):
        return add(
            add(tmean(t[0]), tsum(tmean(t[0], axis=0))),
            mul(l1_norm(t[0]), Tensor(0.25)),
        )

    check_grads(build, [x], f"(seed {seed})")


@pytest.mark.parametrize("seed", range(10))
def test_grad_reciprocal_inner_diag(seed):
    r = rng_for(seed)
    m = r.normal(size=(5, 5)) + np.eye(5) * 3.0
    v = r.normal(size=5)

    def build(t):
        d = diag_part(t[0])
        return add(inner_product(d, t[1]), tsum(reciprocal(add(d, Tensor(np.full(5, 10.0))))))

    check_grads(build, [m, v], f"(seed {seed})")


@pytest.mark.parametrize("seed", range(10))
def test_grad_transpose_reshape(seed):
    r = rng_for(seed)
    m = r.normal(size=(4, 6))

    def build(t):
        return tsum(mul(reshape(transpose(t[0]), (4, 6)), t[0]))

    check_grads(build, [m], f"(seed {seed})")


@pytest.mark.parametrize("seed", range(10))
def test_grad_three_layer_network(seed):
    """Conv -> relu -> conv -> linear head, checked on every parameter."""
    r = rng_for(seed)
    x = r.normal(size=(2, 20))
    w1 = r.normal(size=(3, 2, 5)) * 0.5
    w2 = r.normal(size=(4, 3, 3)) * 0.5
    w3 = r.normal(size=(4,)) * 0.5

    def build(t):
        h = relu(conv1d(Tensor(x), t[0], stride=2, padding=2))
        h = relu(conv1d(h, t[1], stride=2, padding=1))
        pooled = tmean(h, axis=1)
        return sigmoid(inner_product(pooled, t[2]))

    check_grads(build, [w1, w2, w3], f"(seed {seed})")


@pytest.mark.parametrize("seed", range(10))
def test_grad_through_mask_and_sigmoid_head(seed):
    """Mirrors the selection-weight path: masked normalization of scores.

    The mask makes the analytic gradient the derivative of a surrogate in
    which masked scores are frozen constants, so the finite-difference
    oracle probes that surrogate rather than the raw forward function.
    """
    r = rng_for(seed)
    h0 = r.normal(size=8)
    w0 = r.normal(size=(5, 8)) * 0.3
    mask = np.ones(5)
    mask[0] = 0.0
    target = np.arange(5.0)
    frozen = sigmoid(matmul(Tensor(w0), Tensor(h0))).data.copy()

    h = Tensor(h0.copy(), requires_grad=True)
    w = Tensor(w0.copy(), requires_grad=True)
    scores = sigmoid(matmul(w, h))
    kept = stop_gradient_mask(scores, mask)
    weights = mul(kept, reciprocal(tsum(kept)))
    backward(inner_product(weights, Tensor(target)))

    def surrogate(hv, wv):
        s = 1.0 / (1.0 + np.exp(-(wv @ hv)))
        eff = mask * s + (1.0 - mask) * frozen
        return float((eff / eff.sum()) @ target)

    num_h = numeric_grad(lambda x: surrogate(x, w0), h0.copy())
    num_w = numeric_grad(lambda x: surrogate(h0, x), w0.copy())
    assert max_rel_err(h.grad, num_h) < FD_TOL
    assert max_rel_err(w.grad, num_w) < FD_TOL


# ---------------------------------------------------------------------------
# linearity and determinism


def test_backward_linearity():
    rng = np.random.default_rng(42)
    x0 = rng.normal(size=6)
    a, b = 2.374, -0.816

    def gf(scale_f, scale_g):
        x = Tensor(x0.copy(), requires_grad=True)
        f = tsum(mul(x, x))
        g = tsum(sigmoid(x))
        backward(add(mul(f, Tensor(scale_f)), mul(g, Tensor(scale_g))))
        return x.grad

    combined = gf(a, b)
    expected = a * gf(1.0, 0.0) + b * gf(0.0, 1.0)
    np.testing.assert_allclose(combined, expected, atol=1e-10)


def test_forward_and_grad_determinism():
    def run():
        rng = np.random.default_rng(7)
        x = Tensor(rng.normal(size=(2, 12)), requires_grad=True)
        w = Tensor(rng.normal(size=(3, 2, 3)), requires_grad=True)
        loss = tsum(sigmoid(conv1d(x, w, stride=1, padding=1)))
        backward(loss)
        return loss.data.copy(), x.grad.copy(), w.grad.copy()

    first, second = run(), run()
    for lhs, rhs in zip(first, second):
        assert np.array_equal(lhs, rhs)  # bit-identical, not just close


def test_grad_accumulates_across_backward_calls():
    x = Tensor([2.0], requires_grad=True)
    backward(tsum(mul(x, x)))
    backward(tsum(mul(x, x)))
    np.testing.assert_array_equal(x.grad, [8.0])
