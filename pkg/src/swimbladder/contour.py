"""Optimal closed-contour extraction inside a circular ROI.

The ROI is resampled into a polar image (rows = integer radii from the
center, columns = angles at 1 degree steps, 0..360 inclusive with the wrap
column duplicating column 0).  A minimum-cost closed path through that
image — steps limited to one row per column — is found with a single
dynamic-programming sweep over the layered column graph, then projected back
to pixel space and filled.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import InfeasibleStart, OpenContour

N_ANGLES = 361  # 0..360 inclusive; column 360 duplicates column 0


@dataclass(frozen=True)
class CircularPath:
    """Radius per angle column; first and last radii coincide."""

    radii: np.ndarray
    cost: float


@dataclass(frozen=True)
class SegmentedShape:
    """Closed contour band, its interior, and their union, as full-frame masks."""

    contour: np.ndarray
    interior: np.ndarray
    full: np.ndarray


def polar_transform(image, roi):
    """Resample the ROI into (radius, angle) coordinates.

    Row r, column theta holds the bilinear sample of ``image`` at
    center + r * (cos(start_angle + theta), sin(start_angle + theta)).
    Samples outside the frame take 255 so optimal paths avoid leaving it.
    """
    image = np.asarray(image, dtype=np.float64)
    nrows = int(round(roi.radius))
    angles = np.radians(roi.start_angle + np.arange(N_ANGLES, dtype=np.float64))
    radii = np.arange(nrows, dtype=np.float64)
    xs = roi.center.x + radii[:, None] * np.cos(angles)[None, :]
    ys = roi.center.y + radii[:, None] * np.sin(angles)[None, :]
    polar = kernels.bilinear_at(image, xs, ys, 255.0)
    polar[:, N_ANGLES - 1] = polar[:, 0]  # wrap column is the same primal pixels
    return polar


def select_start_row(polar, r_min):
    """Most peripheral local minimum of the first radial section.

    Rows r_min..R-1 of column 0 are scanned; a row qualifies when its value
    is <= both column neighbours (a missing neighbour is ignored).  If no
    row qualifies, the largest row attaining the scanned range's minimum is
    returned.
    """
    col = np.asarray(polar)[:, 0]
    nrows = len(col)
    if not 0 <= r_min < nrows:
        raise InfeasibleStart(f"r_min {r_min} outside rows 0..{nrows - 1}")
    for r in range(nrows - 1, r_min - 1, -1):
        below_ok = r == 0 or col[r] <= col[r - 1]
        above_ok = r == nrows - 1 or col[r] <= col[r + 1]
        if below_ok and above_ok:
            return r
    window = col[r_min:]
    return r_min + int(np.flatnonzero(window == window.min())[-1])


def circular_shortest_path(polar, start_row, r_min):
    """Minimum-cost closed path anchored at ``start_row`` in column 0.

    Admissible steps move at most one row between adjacent columns and
    never drop below ``r_min``; the cost is the sum of all traversed
    intensities.  Ties prefer flat steps, then smaller rows.
    """
    polar = np.asarray(polar, dtype=np.float64)
    nrows, ncols = polar.shape
    if start_row < r_min:
        raise InfeasibleStart(f"start row {start_row} below r_min {r_min}")
    if not r_min <= start_row < nrows:
        raise InfeasibleStart(f"start row {start_row} outside rows {r_min}..{nrows - 1}")
    radii, cost = kernels.csp_sweep(polar, int(start_row), int(r_min))
    path = CircularPath(radii=radii, cost=float(cost))
    _assert_feasible(path, nrows, r_min)
    return path


def _assert_feasible(path, nrows, r_min):
    r = path.radii
    assert r[0] == r[-1], "path is not closed"
    assert np.all(np.abs(np.diff(r)) <= 1), "path breaks the one-row step rule"
    assert np.all((r >= r_min) & (r < nrows)), "path leaves the admissible rows"
    assert math.isfinite(path.cost), "path cost is not finite"


def _draw_segment(mask, x0, y0, x1, y1):
    n = max(abs(x1 - x0), abs(y1 - y0))
    if n == 0:
        mask[y0, x0] = True
        return
    for i in range(n + 1):
        f = i / n
        x = int(math.floor(x0 + f * (x1 - x0) + 0.5))
        y = int(math.floor(y0 + f * (y1 - y0) + 0.5))
        mask[y, x] = True


_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def path_to_shape(path, roi, frame_dims):
    """Project a circular path back to pixel space and fill it.

    ``frame_dims`` is (height, width).  The rasterized curve is flood-filled
    from the ROI center (checking closure); because the path region is
    star-shaped around the center, the enclosed pixels are then trimmed to
    those whose center-distance does not exceed the path radius interpolated
    at their angle, which stops the curve's own rounding spread from
    inflating the shape.  The contour band is the curve thickened by one
    pixel plus the shape's outer shell, kept inside the shape; the interior
    is the 4-connected remainder holding the center.
    """
    h, w = frame_dims
    r = path.radii.astype(np.float64)
    ncols = len(r)
    step = 360.0 / (ncols - 1)
    theta = np.radians(roi.start_angle + step * np.arange(ncols))
    xs = roi.center.x + r * np.cos(theta)
    ys = roi.center.y + r * np.sin(theta)
    # clamping keeps consecutive pixels adjacent, so the curve stays closed
    px = np.clip(np.floor(xs + 0.5).astype(np.int64), 0, w - 1)
    py = np.clip(np.floor(ys + 0.5).astype(np.int64), 0, h - 1)

    curve = np.zeros((h, w), dtype=bool)
    for i in range(len(px)):
        j = (i + 1) % len(px)
        _draw_segment(curve, px[i], py[i], px[j], py[j])

    cx = int(math.floor(roi.center.x + 0.5))
    cy = int(math.floor(roi.center.y + 0.5))
    if not (0 <= cx < w and 0 <= cy < h):
        raise OpenContour("ROI center lies outside the frame")
    if curve[cy, cx]:
        raise OpenContour("contour passes through the ROI center")

    labels, _ = ndimage.label(~curve, structure=_CROSS)
    inside = labels == labels[cy, cx]
    border_touch = inside[0, :].any() or inside[-1, :].any() or inside[:, 0].any() or inside[:, -1].any()
    if border_touch:
        raise OpenContour("interior fill escaped to the frame border")

    yy, xx = np.indices((h, w))
    dx = xx - roi.center.x
    dy = yy - roi.center.y
    dist = np.hypot(dx, dy)
    ang = (np.degrees(np.arctan2(dy, dx)) - roi.start_angle) % 360.0
    col = ang / step
    c0 = np.minimum(col.astype(np.int64), ncols - 2)
    frac = col - c0
    radius_at = path.radii[c0] * (1.0 - frac) + path.radii[c0 + 1] * frac
    full = (inside | curve) & (dist <= radius_at + 1e-9)

    band = ndimage.binary_dilation(curve, structure=np.ones((3, 3), dtype=bool)) & full
    shell = full & ~ndimage.binary_erosion(full, structure=np.ones((3, 3), dtype=bool))
    contour_band = band | shell
    interior = full & ~contour_band
    if not interior[cy, cx]:
        raise OpenContour("contour band swallowed the ROI center")
    # keep only the component holding the center; stray crumbs join the band
    lab2, _ = ndimage.label(interior, structure=_CROSS)
    core = lab2 == lab2[cy, cx]
    contour_band = contour_band | (interior & ~core)
    interior = core
    return SegmentedShape(contour=contour_band, interior=interior, full=full)


def extract_shape(image, roi, r_min=10):
    """Full contour stage: polar resample, start pick, optimal path, fill."""
    polar = polar_transform(image, roi)
    start = select_start_row(polar, r_min)
    path = circular_shortest_path(polar, start, r_min)
    shape = path_to_shape(path, roi, np.asarray(image).shape)
    return shape, path, polar
