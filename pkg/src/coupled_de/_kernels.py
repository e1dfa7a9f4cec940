"""Compiled inner loops for the quantized check-node operation."""
import numba
import numpy as np


def boxplus_magnitude(a, b):
    """|x| box-plus |y| for non-negative magnitudes, numerically stable."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.minimum(a, b) + np.log1p(np.exp(-(a + b))) - np.log1p(np.exp(-np.abs(a - b)))


def projection_table(n_mags: int, delta: float):
    """Lower grid index and upper-neighbour weight for every magnitude pair."""
    m = np.arange(n_mags) * delta
    out = boxplus_magnitude(m[:, None], m[None, :])
    pos = out / delta
    lo = np.clip(np.floor(pos), 0, n_mags - 2).astype(np.int32)
    w = np.clip(pos - lo, 0.0, 1.0)
    return lo, w


@numba.njit(cache=True, nogil=True)
def pair_project(da, db, lo, w):
    # box-plus output of magnitudes (i, j) is symmetric in (i, j): walk the upper triangle
    m = da.shape[0]
    out = np.zeros(m)
    for i in range(m):
        ai = da[i]
        bi = db[i]
        if ai == 0.0 and bi == 0.0:
            continue
        v = ai * bi
        if v != 0.0:
            k = lo[i, i]
            f = w[i, i]
            out[k] += v * (1.0 - f)
            out[k + 1] += v * f
        for j in range(i + 1, m):
            v = ai * db[j] + da[j] * bi
            if v == 0.0:
                continue
            k = lo[i, j]
            f = w[i, j]
            out[k] += v * (1.0 - f)
            out[k + 1] += v * f
    return out
