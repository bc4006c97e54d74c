"""Intensity and morphological descriptors of a segmented shape.

Twenty-four features: seven order statistics for each of the interior and
the contour band, five interior-minus-contour differences, the range ratio
and the histogram covering, plus three shape measures (convex-hull deficit,
opening deficit, and a perimeter-normalized area).
"""

import csv
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import DegeneratePerimeter, EmptyRegion

OPENING_RADIUS = 5  # disk radius of the structuring element for concavity

FEATURE_NAMES = (
    "variance_inner",
    "min_inner",
    "max_inner",
    "average_inner",
    "mode_inner",
    "median_inner",
    "range_inner",
    "variance_contour",
    "min_contour",
    "max_contour",
    "average_contour",
    "mode_contour",
    "median_contour",
    "range_contour",
    "min_diff",
    "max_diff",
    "av_diff",
    "mode_diff",
    "median_diff",
    "rrange",
    "covering",
    "convexity",
    "concavity",
    "elongation",
)


@dataclass(frozen=True)
class RegionStats:
    min: float
    max: float
    mean: float
    median: float
    mode: float
    variance: float
    range: float


@dataclass(frozen=True)
class FeatureVector:
    variance_inner: float
    min_inner: float
    max_inner: float
    average_inner: float
    mode_inner: float
    median_inner: float
    range_inner: float
    variance_contour: float
    min_contour: float
    max_contour: float
    average_contour: float
    mode_contour: float
    median_contour: float
    range_contour: float
    min_diff: float
    max_diff: float
    av_diff: float
    mode_diff: float
    median_diff: float
    rrange: float
    covering: float
    convexity: float
    concavity: float
    elongation: float
    degenerate: bool = False  # set when a ratio denominator was zero

    def to_array(self):
        return np.array([getattr(self, name) for name in FEATURE_NAMES])

    @classmethod
    def from_array(cls, values, degenerate=False):
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(FEATURE_NAMES),):
            raise ValueError(f"expected {len(FEATURE_NAMES)} values, got {values.shape}")
        return cls(**dict(zip(FEATURE_NAMES, map(float, values))), degenerate=degenerate)


assert tuple(f.name for f in fields(FeatureVector))[: len(FEATURE_NAMES)] == FEATURE_NAMES


def region_stats(image, region):
    """Order statistics of image intensities under a mask.

    Population variance; mode ties resolve to the smallest intensity; an
    even count medians to the mean of the two middle values.
    """
    values = np.asarray(image)[np.asarray(region, dtype=bool)]
    if values.size == 0:
        raise EmptyRegion("region has no pixels")
    values = values.astype(np.int64)
    vmin = int(values.min())
    vmax = int(values.max())
    mode = int(np.bincount(values, minlength=256).argmax())
    return RegionStats(
        min=float(vmin),
        max=float(vmax),
        mean=float(values.mean()),
        median=float(np.median(values)),
        mode=float(mode),
        variance=float(values.var()),
        range=float(vmax - vmin),
    )


def intensity_features(si: RegionStats, sc: RegionStats):
    """The 21 intensity fields: per-region stats, differences and ratios.

    Returns (dict keyed by feature name, degenerate flag).  A zero ratio
    denominator yields 0.0 and sets the flag.
    """
    degenerate = False
    if sc.range == 0.0:
        rrange = 0.0
        degenerate = True
    else:
        rrange = si.range / sc.range
    cov_den = si.max - sc.min
    if cov_den == 0.0:
        covering = 0.0
        degenerate = True
    else:
        covering = (sc.max - si.min) / cov_den
    out = {
        "variance_inner": si.variance,
        "min_inner": si.min,
        "max_inner": si.max,
        "average_inner": si.mean,
        "mode_inner": si.mode,
        "median_inner": si.median,
        "range_inner": si.range,
        "variance_contour": sc.variance,
        "min_contour": sc.min,
        "max_contour": sc.max,
        "average_contour": sc.mean,
        "mode_contour": sc.mode,
        "median_contour": sc.median,
        "range_contour": sc.range,
        "min_diff": si.min - sc.min,
        "max_diff": si.max - sc.max,
        "av_diff": si.mean - sc.mean,
        "mode_diff": si.mode - sc.mode,
        "median_diff": si.median - sc.median,
        "rrange": rrange,
        "covering": covering,
    }
    return out, degenerate


def _cross(ox, oy, ax, ay, bx, by):
    return (ax - ox) * (by - oy) - (ay - oy) * (bx - ox)


def _convex_hull_vertices(points):
    """Monotone-chain hull of integer points, counterclockwise, no collinears."""
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return pts

    def build(seq):
        out = []
        for px, py in seq:
            while len(out) >= 2 and _cross(out[-2][0], out[-2][1], out[-1][0], out[-1][1], px, py) <= 0:
                out.pop()
            out.append((px, py))
        return out

    lower = build(pts)
    upper = build(reversed(pts))
    return lower[:-1] + upper[:-1]


def convex_hull_mask(mask):
    """Pixels whose centers lie inside or on the hull of the mask's pixels."""
    mask = np.asarray(mask, dtype=bool)
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyRegion("hull of an empty mask")
    hull = _convex_hull_vertices(np.column_stack((xs, ys)))
    if len(hull) <= 2:
        return mask.copy()
    x0, x1 = xs.min(), xs.max()
    y0, y1 = ys.min(), ys.max()
    gx, gy = np.meshgrid(np.arange(x0, x1 + 1), np.arange(y0, y1 + 1))
    inside = np.ones(gx.shape, dtype=bool)
    for i in range(len(hull)):
        px, py = hull[i]
        qx, qy = hull[(i + 1) % len(hull)]
        inside &= _cross(px, py, qx, qy, gx, gy) >= 0
    out = np.zeros_like(mask)
    out[y0 : y1 + 1, x0 : x1 + 1] = inside
    return out


def convexity(shape):
    """Pixel count of the convex hull of the full shape minus the shape."""
    full = np.asarray(shape.full, dtype=bool)
    hull = convex_hull_mask(full)
    return float(np.count_nonzero(hull & ~full))


def _disk(radius):
    r = int(radius)
    y, x = np.ogrid[-r : r + 1, -r : r + 1]
    return x * x + y * y <= r * r


def concavity(shape, radius=OPENING_RADIUS):
    """Area removed by an opening with a disk structuring element."""
    full = np.asarray(shape.full, dtype=bool)
    if not full.any():
        raise EmptyRegion("concavity of an empty shape")
    opened = ndimage.binary_opening(full, structure=_disk(radius))
    return float(np.count_nonzero(full & ~opened))


_CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


def perimeter_pixels(mask):
    """Border-pixel count with the classic staircase correction.

    Border pixels (any 8-neighbour outside) count once, except pixels whose
    only outside neighbours are diagonal: a contour cuts those corners, so
    they contribute sqrt(2) - 1.  A single pixel has perimeter 1; a raw
    count overestimates circle perimeters by ~23% (staircase bias).
    """
    mask = np.asarray(mask, dtype=bool)
    border8 = mask & ~ndimage.binary_erosion(mask, structure=np.ones((3, 3), dtype=bool))
    border4 = mask & ~ndimage.binary_erosion(mask, structure=_CROSS)
    n8 = int(np.count_nonzero(border8))
    n4 = int(np.count_nonzero(border4))
    return n8 - (2.0 - math.sqrt(2.0)) * (n8 - n4)


def elongation(shape):
    """4 * area / perimeter^2 with perimeter the corrected border count."""
    full = np.asarray(shape.full, dtype=bool)
    area = int(np.count_nonzero(full))
    if area == 0:
        raise EmptyRegion("elongation of an empty shape")
    perimeter = perimeter_pixels(full)
    if perimeter == 0:
        raise DegeneratePerimeter("shape has no border pixels")
    return 4.0 * area / perimeter**2


def feature_vector(image, shape):
    """All 24 descriptors of a segmented shape on one image."""
    si = region_stats(image, shape.interior)
    sc = region_stats(image, shape.contour)
    intensity, degenerate = intensity_features(si, sc)
    return FeatureVector(
        **intensity,
        convexity=convexity(shape),
        concavity=concavity(shape),
        elongation=elongation(shape),
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# CSV interchange: image_id, label, then the 24 canonical columns


def write_features_csv(path, rows):
    """Write (image_id, label, FeatureVector) rows; 6 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("image_id", "label") + FEATURE_NAMES)
        for image_id, label, fv in rows:
            values = [f"{v:.6g}" for v in fv.to_array()]
            writer.writerow([image_id, label] + values)


def read_features_csv(path):
    """Read rows back as (image_id, label, FeatureVector)."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ("image_id", "label") + FEATURE_NAMES:
            raise ValueError(f"unexpected feature CSV header in {path}")
        for row in reader:
            image_id, label = row[0], row[1]
            fv = FeatureVector.from_array([float(v) for v in row[2:]])
            rows.append((image_id, label, fv))
    return rows
