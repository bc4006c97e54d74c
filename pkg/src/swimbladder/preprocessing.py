"""Embryo body segmentation, skeleton axis and orientation handling.

The body mask is an Otsu threshold cleaned to the largest 8-connected
component with holes filled.  The body's principal axis (from second-order
moments) anchors the "perpendicular to the skeleton" direction used when the
ROI's first radial section is laid down; the morphological skeleton itself
is kept, ordered along that axis.

Orientation (dorsal vs lateral) normally arrives as dataset metadata; a
small heuristic based on eye-blob count and body elongation can fill it in
when missing.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from skimage.filters import threshold_otsu
from skimage.morphology import skeletonize

from .errors import DegenerateShape, NoEmbryo

MIN_BODY_FRACTION = 0.01  # largest component below this fraction = no embryo
EIGENVALUE_SPREAD = 0.05  # below this relative spread there is no main axis


@dataclass
class EmbryoContext:
    body: np.ndarray
    axis_angle: float
    skeleton: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    orientation: str = "dorsal"


def segment_embryo(image):
    """Otsu threshold, keep the largest 8-connected component, fill holes."""
    image = np.asarray(image)
    if image.min() == image.max():
        raise NoEmbryo("image is uniform; nothing to segment")
    thr = threshold_otsu(image)
    fg = image > thr
    labels, count = ndimage.label(fg, structure=np.ones((3, 3), dtype=bool))
    if count == 0:
        raise NoEmbryo("no foreground pixels above threshold")
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, np.arange(1, count + 1))
    biggest = int(np.argmax(sizes)) + 1
    if sizes[biggest - 1] < MIN_BODY_FRACTION * image.size:
        raise NoEmbryo(
            f"largest component covers {sizes[biggest - 1] / image.size:.2%} "
            "of the frame"
        )
    return ndimage.binary_fill_holes(labels == biggest)


def _second_moments(mask):
    ys, xs = np.nonzero(mask)
    x = xs - xs.mean()
    y = ys - ys.mean()
    n = len(xs)
    return (x * x).sum() / n, (y * y).sum() / n, (x * y).sum() / n


def skeleton_axis(body):
    """Morphological skeleton ordered along the body's principal axis.

    Returns (skeleton points as an (N, 2) array of (x, y), axis angle in
    degrees within [0, 180)).  Raises DegenerateShape when the two
    principal eigenvalues are within 5% of each other.
    """
    body = np.asarray(body, dtype=bool)
    if not body.any():
        raise DegenerateShape("empty body mask")
    mxx, myy, mxy = _second_moments(body)
    half_trace = (mxx + myy) / 2.0
    spread = math.hypot((mxx - myy) / 2.0, mxy)
    lam1 = half_trace + spread
    lam2 = half_trace - spread
    if lam1 <= 0 or (lam1 - lam2) < EIGENVALUE_SPREAD * lam1:
        raise DegenerateShape("no dominant principal axis")
    angle = math.degrees(0.5 * math.atan2(2.0 * mxy, mxx - myy)) % 180.0

    skel = skeletonize(body)
    ys, xs = np.nonzero(skel)
    pts = np.column_stack((xs, ys)).astype(np.float64)
    u = np.array([math.cos(math.radians(angle)), math.sin(math.radians(angle))])
    order = np.argsort(pts @ u, kind="stable")
    return pts[order], angle


def infer_orientation(image, body, dark_level=60, eye_area=(6, 80)):
    """Heuristic orientation guess from eye-blob count and body elongation.

    Two compact dark blobs inside the body read as a dorsal eye pair; one
    reads as lateral.  Without a clear eye count, an elongation threshold
    on the principal eigenvalue ratio decides.
    """
    image = np.asarray(image)
    body = np.asarray(body, dtype=bool)
    dark = (image < dark_level) & ndimage.binary_erosion(body, iterations=2)
    labels, count = ndimage.label(dark, structure=np.ones((3, 3), dtype=bool))
    eyes = 0
    for i in range(1, count + 1):
        area = int((labels == i).sum())
        if eye_area[0] <= area <= eye_area[1]:
            eyes += 1
    if eyes >= 2:
        return "dorsal"
    if eyes == 1:
        return "lateral"
    mxx, myy, mxy = _second_moments(body)
    half_trace = (mxx + myy) / 2.0
    spread = math.hypot((mxx - myy) / 2.0, mxy)
    lam2 = half_trace - spread
    ratio = (half_trace + spread) / max(lam2, 1e-12)
    return "dorsal" if ratio >= 5.5 else "lateral"


def make_context(image, orientation=None):
    """Segment, extract the axis, and bundle an EmbryoContext."""
    body = segment_embryo(image)
    skeleton, angle = skeleton_axis(body)
    if orientation is None:
        orientation = infer_orientation(image, body)
    return EmbryoContext(body=body, axis_angle=angle, skeleton=skeleton,
                         orientation=orientation)
