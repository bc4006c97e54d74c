"""Hot numeric kernels, each in a numba and a pure-numpy version.

The public names (``warp_bilinear``, ``warp_nearest``, ``joint_hist``,
``csp_sweep``) are aliases bound at import time according to
:mod:`swimbladder._accel`.  Both versions of a kernel compute bit-identical
results: the numpy fallbacks mirror the arithmetic of the loops exactly, and
the test suite asserts agreement.

All image arrays are float64, shape (height, width), indexed [y, x].  Affine
coefficients follow pull semantics: an output pixel (x, y) samples the input
at (a11*x + a12*y + tx, a21*x + a22*y + ty).
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# ---------------------------------------------------------------------------
# affine warping


@njit(cache=True)
def _warp_bilinear_nb(src, a11, a12, a21, a22, tx, ty, out_h, out_w, fill):
    h, w = src.shape
    out = np.empty((out_h, out_w), dtype=np.float64)
    for y in range(out_h):
        for x in range(out_w):
            sx = a11 * x + a12 * y + tx
            sy = a21 * x + a22 * y + ty
            if sx < 0.0 or sx > w - 1 or sy < 0.0 or sy > h - 1:
                out[y, x] = fill
                continue
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            fx = sx - x0
            fy = sy - y0
            x1 = x0 + 1
            if x1 > w - 1:
                x1 = w - 1
            y1 = y0 + 1
            if y1 > h - 1:
                y1 = h - 1
            top = src[y0, x0] * (1.0 - fx) + src[y0, x1] * fx
            bot = src[y1, x0] * (1.0 - fx) + src[y1, x1] * fx
            out[y, x] = top * (1.0 - fy) + bot * fy
    return out


def _warp_bilinear_np(src, a11, a12, a21, a22, tx, ty, out_h, out_w, fill):
    h, w = src.shape
    x = np.arange(out_w, dtype=np.float64)[None, :]
    y = np.arange(out_h, dtype=np.float64)[:, None]
    sx = a11 * x + a12 * y + tx
    sy = a21 * x + a22 * y + ty
    valid = (sx >= 0.0) & (sx <= w - 1) & (sy >= 0.0) & (sy <= h - 1)
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    x1i = np.minimum(x0i + 1, w - 1)
    y1i = np.minimum(y0i + 1, h - 1)
    top = src[y0i, x0i] * (1.0 - fx) + src[y0i, x1i] * fx
    bot = src[y1i, x0i] * (1.0 - fx) + src[y1i, x1i] * fx
    val = top * (1.0 - fy) + bot * fy
    return np.where(valid, val, fill)


@njit(cache=True)
def _warp_nearest_nb(src, a11, a12, a21, a22, tx, ty, out_h, out_w, fill):
    h, w = src.shape
    out = np.empty((out_h, out_w), dtype=np.float64)
    for y in range(out_h):
        for x in range(out_w):
            sx = a11 * x + a12 * y + tx
            sy = a21 * x + a22 * y + ty
            xi = int(np.floor(sx + 0.5))
            yi = int(np.floor(sy + 0.5))
            if xi < 0 or xi > w - 1 or yi < 0 or yi > h - 1:
                out[y, x] = fill
            else:
                out[y, x] = src[yi, xi]
    return out


def _warp_nearest_np(src, a11, a12, a21, a22, tx, ty, out_h, out_w, fill):
    h, w = src.shape
    x = np.arange(out_w, dtype=np.float64)[None, :]
    y = np.arange(out_h, dtype=np.float64)[:, None]
    sx = a11 * x + a12 * y + tx
    sy = a21 * x + a22 * y + ty
    xi = np.floor(sx + 0.5).astype(np.int64)
    yi = np.floor(sy + 0.5).astype(np.int64)
    valid = (xi >= 0) & (xi <= w - 1) & (yi >= 0) & (yi <= h - 1)
    xi = np.clip(xi, 0, w - 1)
    yi = np.clip(yi, 0, h - 1)
    return np.where(valid, src[yi, xi], fill)


# ---------------------------------------------------------------------------
# joint intensity histogram (dense sampling of the fixed frame)


@njit(cache=True)
def _joint_hist_nb(fixed, moving, a11, a12, a21, a22, tx, ty, bins):
    fh, fw = fixed.shape
    mh, mw = moving.shape
    hist = np.zeros((bins, bins), dtype=np.int64)
    count = 0
    scale = bins / 256.0
    for y in range(fh):
        for x in range(fw):
            sx = a11 * x + a12 * y + tx
            sy = a21 * x + a22 * y + ty
            if sx < 0.0 or sx > mw - 1 or sy < 0.0 or sy > mh - 1:
                continue
            x0 = int(np.floor(sx))
            y0 = int(np.floor(sy))
            fx = sx - x0
            fy = sy - y0
            x1 = x0 + 1
            if x1 > mw - 1:
                x1 = mw - 1
            y1 = y0 + 1
            if y1 > mh - 1:
                y1 = mh - 1
            top = moving[y0, x0] * (1.0 - fx) + moving[y0, x1] * fx
            bot = moving[y1, x0] * (1.0 - fx) + moving[y1, x1] * fx
            mval = top * (1.0 - fy) + bot * fy
            fb = int(fixed[y, x] * scale)
            if fb > bins - 1:
                fb = bins - 1
            mb = int(mval * scale)
            if mb > bins - 1:
                mb = bins - 1
            hist[fb, mb] += 1
            count += 1
    return hist, count


def _joint_hist_np(fixed, moving, a11, a12, a21, a22, tx, ty, bins):
    fh, fw = fixed.shape
    mh, mw = moving.shape
    x = np.arange(fw, dtype=np.float64)[None, :]
    y = np.arange(fh, dtype=np.float64)[:, None]
    sx = a11 * x + a12 * y + tx
    sy = a21 * x + a22 * y + ty
    valid = (sx >= 0.0) & (sx <= mw - 1) & (sy >= 0.0) & (sy <= mh - 1)
    sx = sx[valid]
    sy = sy[valid]
    x0 = np.floor(sx)
    y0 = np.floor(sy)
    fx = sx - x0
    fy = sy - y0
    x0i = x0.astype(np.int64)
    y0i = y0.astype(np.int64)
    x1i = np.minimum(x0i + 1, mw - 1)
    y1i = np.minimum(y0i + 1, mh - 1)
    top = moving[y0i, x0i] * (1.0 - fx) + moving[y0i, x1i] * fx
    bot = moving[y1i, x0i] * (1.0 - fx) + moving[y1i, x1i] * fx
    mval = top * (1.0 - fy) + bot * fy
    scale = bins / 256.0
    fb = np.minimum((fixed[valid] * scale).astype(np.int64), bins - 1)
    mb = np.minimum((mval * scale).astype(np.int64), bins - 1)
    flat = np.bincount(fb * bins + mb, minlength=bins * bins)
    return flat.reshape(bins, bins).astype(np.int64), int(valid.sum())


# ---------------------------------------------------------------------------
# circular shortest path: one left-to-right sweep over the layered DAG


@njit(cache=True)
def _csp_sweep_nb(polar, start_row, r_min):
    nrows, ncols = polar.shape
    inf = np.inf
    dist = np.full(nrows, inf)
    dist[start_row] = polar[start_row, 0]
    parent = np.full((ncols, nrows), -1, dtype=np.int64)
    for t in range(1, ncols):
        ndist = np.full(nrows, inf)
        for r in range(r_min, nrows):
            best = inf
            bp = -1
            # predecessor preference: same row, then r-1, then r+1
            if dist[r] < best:
                best = dist[r]
                bp = r
            if r - 1 >= r_min and dist[r - 1] < best:
                best = dist[r - 1]
                bp = r - 1
            if r + 1 < nrows and dist[r + 1] < best:
                best = dist[r + 1]
                bp = r + 1
            if bp >= 0:
                ndist[r] = best + polar[r, t]
                parent[t, r] = bp
        dist = ndist
    cost = dist[start_row]
    radii = np.empty(ncols, dtype=np.int64)
    radii[ncols - 1] = start_row
    for t in range(ncols - 1, 0, -1):
        radii[t - 1] = parent[t, radii[t]]
    return radii, cost


def _csp_sweep_np(polar, start_row, r_min):
    nrows, ncols = polar.shape
    inf = np.inf
    dist = np.full(nrows, inf)
    dist[start_row] = polar[start_row, 0]
    parent = np.full((ncols, nrows), -1, dtype=np.int64)
    offsets = np.array([0, -1, 1], dtype=np.int64)
    rows = np.arange(nrows, dtype=np.int64)
    for t in range(1, ncols):
        masked = dist.copy()
        masked[:r_min] = inf
        from_same = masked
        from_below = np.concatenate(([inf], masked[:-1]))
        from_above = np.concatenate((masked[1:], [inf]))
        cand = np.stack((from_same, from_below, from_above))
        choice = np.argmin(cand, axis=0)
        best = cand[choice, rows]
        ndist = best + polar[:, t]
        ndist[best == inf] = inf
        ndist[:r_min] = inf
        par = rows + offsets[choice]
        par[(best == inf) | (rows < r_min)] = -1
        parent[t] = par
        dist = ndist
    cost = dist[start_row]
    radii = np.empty(ncols, dtype=np.int64)
    radii[ncols - 1] = start_row
    for t in range(ncols - 1, 0, -1):
        radii[t - 1] = parent[t, radii[t]]
    return radii, cost


# ---------------------------------------------------------------------------
# point sampling helper (not hot; numpy only)


def bilinear_at(img, xs, ys, fill):
    """Bilinear samples of ``img`` at float coordinate arrays xs, ys."""
    h, w = img.shape
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    valid = (xs >= 0.0) & (xs <= w - 1) & (ys >= 0.0) & (ys <= h - 1)
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    fx = xs - x0
    fy = ys - y0
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    x1i = np.minimum(x0i + 1, w - 1)
    y1i = np.minimum(y0i + 1, h - 1)
    top = img[y0i, x0i] * (1.0 - fx) + img[y0i, x1i] * fx
    bot = img[y1i, x0i] * (1.0 - fx) + img[y1i, x1i] * fx
    val = top * (1.0 - fy) + bot * fy
    return np.where(valid, val, fill)


if USE_NUMBA:
    warp_bilinear = _warp_bilinear_nb
    warp_nearest = _warp_nearest_nb
    joint_hist = _joint_hist_nb
    csp_sweep = _csp_sweep_nb
else:
    warp_bilinear = _warp_bilinear_np
    warp_nearest = _warp_nearest_np
    joint_hist = _joint_hist_np
    csp_sweep = _csp_sweep_np
