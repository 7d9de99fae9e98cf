"""Both kernel back-ends must agree to rounding."""
import numpy as np
import pytest

from qdemu import _accel, kernels

pytestmark = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


def test_space_split_parity(rng):
    psi = rng.normal(size=(3, 64)) + 1j * rng.normal(size=(3, 64))
    v = rng.normal(size=(3, 64))
    vh = np.exp(-0.5j * 0.01 * v)
    c = kernels.pair_coefficients(0.3) + kernels.pair_coefficients(0.6)
    a = kernels.space_split_steps_numba(psi.copy(), vh, vh * vh, 7, *c)
    b = kernels.space_split_steps_numpy(psi.copy(), vh, vh * vh, 7, *c)
    assert np.allclose(a, b, atol=1e-13)


def test_gather_parity(rng):
    re = rng.normal(size=(5, 50)).astype(np.float32)
    im = rng.normal(size=(5, 50)).astype(np.float32)
    v = rng.normal(size=50).astype(np.float32)
    centers = np.array([0, 3, 49, 25], dtype=np.int64)
    for c in (2, 3):
        a = kernels.gather_windows_numba(re, im, v, centers, 7, np.empty((4, 5, 7, c), np.float32))
        b = kernels.gather_windows_numpy(re, im, v, centers, 7, np.empty((4, 5, 7, c), np.float32))
        assert np.array_equal(a, b)


def test_overlap_add_parity(rng):
    n, w = 40, 9
    pred = rng.normal(size=(n, w, 2))
    centers = np.arange(n, dtype=np.int64)
    weights = rng.random(w)
    out = []
    for fn in (kernels.overlap_add_numba, kernels.overlap_add_numpy):
        acc = [np.zeros(n), np.zeros(n), np.zeros(n)]
        fn(pred, centers, weights, n, *acc)
        out.append(acc)
    for x, y in zip(*out):
        assert np.allclose(x, y, atol=1e-12)


def test_pair_coefficients_unitary():
    c1, c2 = kernels.pair_coefficients(0.37)
    m = np.array([[c1, c2], [c2, c1]])
    assert np.allclose(m.conj().T @ m, np.eye(2), atol=1e-15)


def test_env_flag_parsing(monkeypatch):
    for val, off in (("", False), ("0", False), ("no", False), ("1", True), ("yes", True)):
        monkeypatch.setenv("QDEMU_DISABLE_NUMBA", val)
        assert _accel._disabled() is off


def test_gather_samples_parity(rng):
    re = rng.normal(size=(3, 9, 40)).astype(np.float32)
    im = rng.normal(size=(3, 9, 40)).astype(np.float32)
    v = rng.normal(size=(3, 40)).astype(np.float32)
    rows = np.array([[0, 0, 0], [2, 39, 4], [1, 17, 3]], dtype=np.int64)
    for c in (2, 3):
        a = kernels.gather_samples_numba(re, im, v, rows, 7, np.empty((3, 5, 7, c), np.float32))
        b = kernels.gather_samples_numpy(re, im, v, rows, 7, np.empty((3, 5, 7, c), np.float32))
        assert np.array_equal(a, b)
        one = kernels.gather_windows_numpy(re[2, 4:9], im[2, 4:9], v[2], np.array([39]), 7,
                                           np.empty((1, 5, 7, c), np.float32))
        assert np.array_equal(a[1], one[0])
