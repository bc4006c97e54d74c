"""Raster containers, affine warping, stack statistics and image I/O.

Images are numpy arrays indexed ``[y, x]``:

* gray image  — uint8, values 0..255
* probability — float64, values 0.0..1.0
* mask        — bool

``Affine2D`` uses pull semantics: it maps output-frame coordinates to
input-frame coordinates, so warping fills every output pixel and never
leaves holes.
"""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from PIL import Image

from . import kernels
from .errors import DimensionMismatch, EmptyMask, EmptyStack, SingularTransform


class PointF(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Affine2D:
    """2x3 affine transform mapping (x_out, y_out) -> (x_in, y_in)."""

    a11: float = 1.0
    a12: float = 0.0
    a21: float = 0.0
    a22: float = 1.0
    tx: float = 0.0
    ty: float = 0.0

    @staticmethod
    def identity():
        return Affine2D()

    @staticmethod
    def translation(tx, ty):
        return Affine2D(tx=float(tx), ty=float(ty))

    @staticmethod
    def rotation_about(angle_deg, cx, cy, scale=1.0):
        """Rotation by ``angle_deg`` (and optional scaling) about (cx, cy)."""
        a = math.radians(angle_deg)
        c = math.cos(a) * scale
        s = math.sin(a) * scale
        return Affine2D(
            a11=c,
            a12=-s,
            a21=s,
            a22=c,
            tx=cx - c * cx + s * cy,
            ty=cy - s * cx - c * cy,
        )

    @property
    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def apply(self, x, y):
        """Map one point (x_out, y_out) to input coordinates."""
        return PointF(
            self.a11 * x + self.a12 * y + self.tx,
            self.a21 * x + self.a22 * y + self.ty,
        )

    def compose(self, other):
        """Transform equal to applying ``other`` first, then ``self``.

        warp(warp(img, self), other) == warp(img, self.compose(other)).
        """
        return Affine2D(
            a11=self.a11 * other.a11 + self.a12 * other.a21,
            a12=self.a11 * other.a12 + self.a12 * other.a22,
            a21=self.a21 * other.a11 + self.a22 * other.a21,
            a22=self.a21 * other.a12 + self.a22 * other.a22,
            tx=self.a11 * other.tx + self.a12 * other.ty + self.tx,
            ty=self.a21 * other.tx + self.a22 * other.ty + self.ty,
        )

    def inverse(self):
        d = self.det
        if d == 0.0:
            raise SingularTransform("affine transform is not invertible")
        i11 = self.a22 / d
        i12 = -self.a12 / d
        i21 = -self.a21 / d
        i22 = self.a11 / d
        return Affine2D(
            a11=i11,
            a12=i12,
            a21=i21,
            a22=i22,
            tx=-(i11 * self.tx + i12 * self.ty),
            ty=-(i21 * self.tx + i22 * self.ty),
        )

    def rotation_deg(self):
        """Rotation angle of the linear part, degrees in (-180, 180]."""
        return math.degrees(math.atan2(self.a21, self.a11))


def _check_gray(image):
    image = np.asarray(image)
    if image.ndim != 2 or image.size == 0:
        raise DimensionMismatch(f"expected non-empty 2D image, got shape {image.shape}")
    return image


def warp_affine(image, t: Affine2D, interp="bilinear"):
    """Warp an 8-bit image; out-of-frame samples fill with 0."""
    image = _check_gray(image)
    if t.det == 0.0:
        raise SingularTransform("cannot warp with a singular transform")
    src = image.astype(np.float64)
    h, w = src.shape
    if interp == "bilinear":
        out = kernels.warp_bilinear(src, t.a11, t.a12, t.a21, t.a22, t.tx, t.ty, h, w, 0.0)
    elif interp == "nearest":
        out = kernels.warp_nearest(src, t.a11, t.a12, t.a21, t.a22, t.tx, t.ty, h, w, 0.0)
    else:
        raise ValueError(f"unknown interpolation {interp!r}")
    return np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)


def warp_prob(prob, t: Affine2D):
    """Bilinear warp of a probability image; out-of-frame fills with 0."""
    prob = np.asarray(prob, dtype=np.float64)
    if t.det == 0.0:
        raise SingularTransform("cannot warp with a singular transform")
    h, w = prob.shape
    return kernels.warp_bilinear(prob, t.a11, t.a12, t.a21, t.a22, t.tx, t.ty, h, w, 0.0)


def median_stack(images):
    """Per-pixel median; even counts take the rounded mean of the middle two."""
    if len(images) == 0:
        raise EmptyStack("median_stack needs at least one image")
    first = _check_gray(images[0])
    for im in images[1:]:
        if np.asarray(im).shape != first.shape:
            raise DimensionMismatch("median_stack images must share dimensions")
    stack = np.stack([np.asarray(im, dtype=np.float64) for im in images])
    med = np.median(stack, axis=0)
    return np.floor(med + 0.5).astype(np.uint8)


def mean_stack(masks):
    """Per-pixel fraction of masks that are true."""
    if len(masks) == 0:
        raise EmptyStack("mean_stack needs at least one mask")
    first = np.asarray(masks[0])
    for m in masks[1:]:
        if np.asarray(m).shape != first.shape:
            raise DimensionMismatch("mean_stack masks must share dimensions")
    stack = np.stack([np.asarray(m, dtype=np.float64) for m in masks])
    return stack.sum(axis=0) / len(masks)


def barycenter(mask):
    """Arithmetic mean of true-pixel coordinates."""
    ys, xs = np.nonzero(np.asarray(mask))
    if len(xs) == 0:
        raise EmptyMask("barycenter of an empty mask")
    return PointF(float(xs.mean()), float(ys.mean()))


# ---------------------------------------------------------------------------
# file I/O: 8-bit PNG/PGM for gray images and masks, 16-bit PNG for
# probability maps (value = round(p * 65535))


def read_gray(path):
    with Image.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        return np.asarray(im, dtype=np.uint8)


def write_gray(path, image):
    image = _check_gray(image).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path)


def read_mask(path):
    return read_gray(path) > 127


def write_mask(path, mask):
    write_gray(path, np.where(np.asarray(mask), 255, 0).astype(np.uint8))


def read_prob(path):
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.dtype == np.uint8:
        return arr.astype(np.float64) / 255.0
    return arr.astype(np.float64) / 65535.0


def write_prob(path, prob):
    prob = np.asarray(prob, dtype=np.float64)
    if prob.min() < -1e-9 or prob.max() > 1.0 + 1e-9:
        raise ValueError("probability image values must lie in [0, 1]")
    scaled = np.floor(np.clip(prob, 0.0, 1.0) * 65535.0 + 0.5).astype(np.uint16)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(scaled).save(path)
