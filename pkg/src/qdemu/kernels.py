"""Hot inner loops, each with a numba and a pure-numpy implementation.

The public names at the bottom of the module are bound to one of the two
according to :data:`qdemu._accel.USE_NUMBA`. Both variants stay importable
under ``*_numba`` / ``*_numpy`` so tests and the benchmark can compare them.
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# Real-space split of the three-point kinetic operator
# --------------------------------------------------------------------------
#
# T = sum over bonds (i, i+1) of  1/(2 dx^2) [[1, -1], [-1, 1]].
# Bonds split into an even set (2m, 2m+1) and an odd set (2m+1, 2m+2); inside
# each set the 2x2 blocks commute, and exp(-i a [[1,-1],[-1,1]]) is
# 1/2 [[1+e, 1-e], [1-e, 1+e]] with e = exp(-2ia), so every factor is exactly
# unitary. A step is  Ve/2 . Teven/2 . Todd . Teven/2 . Ve/2.


def pair_coefficients(a: float) -> tuple[complex, complex]:
    """Diagonal and off-diagonal entries of exp(-i a [[1,-1],[-1,1]])."""
    e = np.exp(-2j * a)
    return (1 + e) / 2, (1 - e) / 2


@njit
def _rotate_pairs_numba(row, start, c1, c2):
    n = row.shape[0]
    for m in range(start, n, 2):
        j = m + 1
        if j == n:
            j = 0
        a = row[m]
        b = row[j]
        row[m] = c1 * a + c2 * b
        row[j] = c2 * a + c1 * b


@njit
def space_split_steps_numba(psi, vhalf, vfull, nsteps, ce1, ce2, co1, co2):
    nb, n = psi.shape
    for r in range(nb):
        row = psi[r]
        vh = vhalf[r]
        vf = vfull[r]
        for i in range(n):
            row[i] *= vh[i]
        for s in range(nsteps):
            _rotate_pairs_numba(row, 0, ce1, ce2)
            _rotate_pairs_numba(row, 1, co1, co2)
            _rotate_pairs_numba(row, 0, ce1, ce2)
            if s < nsteps - 1:
                for i in range(n):
                    row[i] *= vf[i]
        for i in range(n):
            row[i] *= vh[i]
    return psi


def space_split_steps_numpy(psi, vhalf, vfull, nsteps, ce1, ce2, co1, co2):
    n = psi.shape[1]
    lo = np.arange(1, n, 2)
    hi = (lo + 1) % n

    def even(c1, c2):
        a = psi[:, 0::2].copy()
        b = psi[:, 1::2].copy()
        psi[:, 0::2] = c1 * a + c2 * b
        psi[:, 1::2] = c2 * a + c1 * b

    def odd(c1, c2):
        a = psi[:, lo]
        b = psi[:, hi]
        psi[:, lo] = c1 * a + c2 * b
        psi[:, hi] = c2 * a + c1 * b

    psi *= vhalf
    for s in range(nsteps):
        even(ce1, ce2)
        odd(co1, co2)
        even(ce1, ce2)
        if s < nsteps - 1:
            psi *= vfull
    psi *= vhalf
    return psi


# --------------------------------------------------------------------------
# Window gather: frames [H, N] + potential [N] -> [n, H, W, C] float32
# --------------------------------------------------------------------------


@njit
def gather_windows_numba(re, im, v, centers, width, out):
    h, n = re.shape
    half = width // 2
    nch = out.shape[3]
    for q in range(centers.shape[0]):
        c = centers[q]
        for o in range(width):
            idx = (c + o - half) % n
            for t in range(h):
                out[q, t, o, 0] = re[t, idx]
                out[q, t, o, 1] = im[t, idx]
                if nch == 3:
                    out[q, t, o, 2] = v[idx]
    return out


def gather_windows_numpy(re, im, v, centers, width, out):
    n = re.shape[1]
    idx = (centers[:, None] + np.arange(width)[None, :] - width // 2) % n
    out[..., 0] = re[:, idx].transpose(1, 0, 2)
    out[..., 1] = im[:, idx].transpose(1, 0, 2)
    if out.shape[3] == 3:
        out[..., 2] = v[idx][:, None, :]
    return out


@njit
def gather_samples_numba(re, im, v, origins, width, out):
    # re, im: [T, Nt, N]; v: [T, N]; origins rows (t, i, j); out [n, H+1, W, C]
    n = re.shape[2]
    half = width // 2
    h1 = out.shape[1]
    nch = out.shape[3]
    for q in range(origins.shape[0]):
        tr = origins[q, 0]
        c = origins[q, 1]
        j = origins[q, 2]
        for o in range(width):
            idx = (c + o - half) % n
            for t in range(h1):
                out[q, t, o, 0] = re[tr, j + t, idx]
                out[q, t, o, 1] = im[tr, j + t, idx]
                if nch == 3:
                    out[q, t, o, 2] = v[tr, idx]
    return out


def gather_samples_numpy(re, im, v, origins, width, out):
    n = re.shape[2]
    tr, c, j = origins[:, 0, None, None], origins[:, 1], origins[:, 2]
    idx = ((c[:, None] + np.arange(width)[None, :] - width // 2) % n)[:, None, :]
    steps = (j[:, None] + np.arange(out.shape[1])[None, :])[:, :, None]
    out[..., 0] = re[tr, steps, idx]
    out[..., 1] = im[tr, steps, idx]
    if out.shape[3] == 3:
        out[..., 2] = v[origins[:, 0, None], idx[:, 0]][:, None, :]
    return out


# --------------------------------------------------------------------------
# Weighted overlap-add of window predictions back onto the grid
# --------------------------------------------------------------------------


@njit
def overlap_add_numba(pred, centers, weights, n, acc_re, acc_im, wsum):
    width = pred.shape[1]
    half = width // 2
    for q in range(centers.shape[0]):
        c = centers[q]
        for o in range(width):
            idx = (c + o - half) % n
            w = weights[o]
            acc_re[idx] += w * pred[q, o, 0]
            acc_im[idx] += w * pred[q, o, 1]
            wsum[idx] += w


def overlap_add_numpy(pred, centers, weights, n, acc_re, acc_im, wsum):
    width = pred.shape[1]
    idx = (centers[:, None] + np.arange(width)[None, :] - width // 2) % n
    idx = idx.ravel()
    w = np.broadcast_to(weights, (centers.shape[0], width)).ravel()
    acc_re += np.bincount(idx, weights=w * pred[:, :, 0].ravel(), minlength=n)
    acc_im += np.bincount(idx, weights=w * pred[:, :, 1].ravel(), minlength=n)
    wsum += np.bincount(idx, weights=w, minlength=n)


if USE_NUMBA:
    space_split_steps = space_split_steps_numba
    gather_windows = gather_windows_numba
    gather_samples = gather_samples_numba
    overlap_add = overlap_add_numba
else:
    space_split_steps = space_split_steps_numpy
    gather_windows = gather_windows_numpy
    gather_samples = gather_samples_numpy
    overlap_add = overlap_add_numpy
