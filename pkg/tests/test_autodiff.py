import numpy as np
import pytest

from qdemu import autodiff as ad
from qdemu.autodiff import Tensor

SEEDS = range(20)
TOL = 1e-3


def _check(loss_fn, arrays, entries=None, seed=0):
    errs = ad.check_gradients(loss_fn, arrays, entries=entries, rng=np.random.default_rng(seed))
    assert max(errs.values()) < TOL, errs


def _readout(t, rng_seed=99):
    # random linear functional so every output entry matters
    w = np.random.default_rng(rng_seed).normal(size=t.shape)
    return ad.mean_square(t * Tensor(w, dtype=t.dtype) + 0.3)


# each case: builder(rng) -> (arrays, loss_fn)
def _matmul(rng):
    return {"a": rng.normal(size=(5, 4)), "b": rng.normal(size=(4, 3))}, lambda t: _readout(t["a"] @ t["b"])


def _bias_add(rng):
    return {"a": rng.normal(size=(6, 4)), "b": rng.normal(size=(4,))}, lambda t: _readout(t["a"] + t["b"])


def _sub_mul(rng):
    arrays = {"a": rng.normal(size=(3, 4)), "b": rng.normal(size=(3, 4)), "c": rng.normal(size=(1, 4))}
    return arrays, lambda t: _readout((t["a"] - t["b"]) * t["c"])


def _relu(rng):
    # keep entries away from the kink
    a = rng.normal(size=(4, 5))
    a[np.abs(a) < 0.05] += 0.2
    return {"a": a}, lambda t: _readout(ad.relu(t["a"]))


def _sigmoid(rng):
    return {"a": 3 * rng.normal(size=(4, 5))}, lambda t: _readout(ad.sigmoid(t["a"]))


def _concat_slice(rng):
    arrays = {"a": rng.normal(size=(3, 2)), "b": rng.normal(size=(3, 4))}
    return arrays, lambda t: _readout(ad.concat([t["a"], t["b"]], axis=1)[:, 1:5])


def _reshape_permute(rng):
    return {"a": rng.normal(size=(2, 3, 4))}, lambda t: _readout(ad.reshape(ad.permute(t["a"], (2, 0, 1)), (4, 6)))


def _mean_square(rng):
    return {"a": rng.normal(size=(7, 3))}, lambda t: ad.mean_square(t["a"])


def _gru(reset_after):
    def build(rng):
        k = 5
        arrays = {"x": rng.normal(size=(3, 3 * k)), "h": rng.normal(size=(3, k)),
                  "U": rng.normal(scale=0.5, size=(k, 3 * k))}
        if reset_after:
            arrays["b"] = rng.normal(scale=0.1, size=(3 * k,))
        return arrays, lambda t: _readout(ad.gru_cell(t["x"], t["h"], t["U"], t.get("b")))
    return build


LAYERS = {
    "matmul": _matmul, "bias_add": _bias_add, "sub_mul": _sub_mul, "relu": _relu, "sigmoid": _sigmoid,
    "concat_slice": _concat_slice, "reshape_permute": _reshape_permute, "mean_square": _mean_square,
    "gru_cell": _gru(False), "gru_cell_reset_after": _gru(True),
}


@pytest.mark.parametrize("layer", sorted(LAYERS))
def test_layer_gradients_match_finite_differences(layer):
    for seed in SEEDS:
        arrays, fn = LAYERS[layer](np.random.default_rng(seed))
        _check(fn, arrays, seed=seed)


def test_least_squares_gradient_closed_form():
    # d/dW mean((XW - Y)^2) = 2/(n m) X^T (XW - Y)
    rng = np.random.default_rng(0)
    x, w, y = rng.normal(size=(8, 3)), rng.normal(size=(3, 2)), rng.normal(size=(8, 2))
    tw = Tensor(w, requires_grad=True, dtype=np.float64)
    ad.backward(ad.mean_square(Tensor(x, dtype=np.float64) @ tw - Tensor(y, dtype=np.float64)))
    assert np.allclose(tw.grad, 2 / 16 * x.T @ (x @ w - y), atol=1e-12)


def test_reused_leaf_accumulates():
    a = Tensor(np.array([1.5, -2.0]), requires_grad=True, dtype=np.float64)
    loss = ad.mean_square(a * a + a)
    ad.backward(loss)
    # d/da mean((a^2 + a)^2) = (a^2 + a)(2a + 1)
    v = a.data
    assert np.allclose(a.grad, (v * v + v) * (2 * v + 1))


def test_repeated_backward_on_fresh_graphs_accumulates_then_zero_grad():
    a = Tensor(np.ones(3), requires_grad=True, dtype=np.float64)
    for _ in range(2):
        ad.backward(ad.mean_square(a))
    assert np.allclose(a.grad, 2 * 2 / 3)
    ad.zero_grad([a])
    assert a.grad is None


def test_non_scalar_loss_needs_seed():
    a = Tensor(np.ones((2, 2)), requires_grad=True)
    with pytest.raises(ValueError, match="scalar"):
        ad.backward(a * 2.0)
    ad.backward(a * 2.0, seed=np.eye(2, dtype=np.float32))
    assert np.allclose(a.grad, 2 * np.eye(2))


def test_sigmoid_is_stable():
    s = ad.sigmoid(Tensor(np.array([-1000.0, 0.0, 1000.0]), dtype=np.float64)).data
    assert np.all(np.isfinite(s))
    assert np.allclose(s, [0.0, 0.5, 1.0])


def test_dtypes():
    assert Tensor(np.arange(3)).dtype == np.float32
    assert Tensor(np.ones(3)).dtype == np.float64
    t = Tensor(np.ones((1, 3)), dtype=np.float32)
    assert (t @ Tensor(np.ones((3, 1)), dtype=np.float32)).dtype == np.float32


def test_shape_errors():
    with pytest.raises(ValueError):
        Tensor(np.ones((2, 3))) @ Tensor(np.ones((2, 3)))
    with pytest.raises(ValueError):
        ad.gru_cell(Tensor(np.ones((1, 6))), Tensor(np.ones((1, 3))), Tensor(np.ones((3, 9))))


def test_gru_cell_hand_computed():
    # K = 1 with every weight 0: z = r = 1/2, candidate relu(x_c), h' = (h + cand) / 2
    x = Tensor(np.array([[0.0, 0.0, 0.8]]), dtype=np.float64)
    h = Tensor(np.array([[0.4]]), dtype=np.float64)
    out = ad.gru_cell(x, h, Tensor(np.zeros((1, 3)), dtype=np.float64))
    assert out.data[0, 0] == pytest.approx(0.6)
    x = Tensor(np.array([[0.0, 0.0, -0.8]]), dtype=np.float64)
    assert ad.gru_cell(x, h, Tensor(np.zeros((1, 3)), dtype=np.float64)).data[0, 0] == pytest.approx(0.2)


def test_numerical_grad_helper():
    a = np.array([1.0, -2.0, 3.0])
    g = ad.numerical_grad(lambda: float(np.sum(a**3)), a)
    assert np.allclose(g, 3 * a**2, rtol=1e-6)
    assert ad.max_rel_error(np.array([1.0, 0.0]), np.array([1.0, 1e-9])) < 1e-3
