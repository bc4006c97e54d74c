"""Healthy-embryo atlas: build from registered examples, project onto new images.

An atlas pairs the median of registered healthy images with the mean of
their registered organ segmentations (a per-pixel probability of finding
the organ).  Projecting the atlas onto a new image registers the median
template to it, transports the probability map, and centers a fixed-radius
circular ROI on the region where the transported probability is 1.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import AtlasDegenerate, DimensionMismatch, EmptyMask
from .imaging import (
    PointF,
    barycenter,
    mean_stack,
    median_stack,
    read_gray,
    read_prob,
    warp_affine,
    warp_prob,
    write_gray,
    write_prob,
)
from .registration import RegistrationConfig, register_affine, transform_mask

log = logging.getLogger(__name__)

ATLAS_FORMAT_VERSION = 1


@dataclass
class Atlas:
    median_image: np.ndarray
    prob_map: np.ndarray
    orientation: str
    n: int
    reg_config: RegistrationConfig
    fixed_index: int = 0


@dataclass
class Roi:
    """Circular search region: center, radius, and direction of the first
    radial section.  ``fallback`` flags a degraded localization (probability
    map never reached the full-confidence threshold)."""

    center: PointF
    radius: float = 20.0
    start_angle: float = 0.0
    fallback: bool = False


def build_atlas(images, masks, fixed_index=0, cfg=None, orientation="dorsal",
                on_registered=None):
    """Register every moving image onto the fixed one and pool the stack.

    ``masks`` are the organ segmentations matching ``images``; each moving
    image's optimal transform is applied to its mask as well.  The fixed
    image and mask enter the stacks unwarped.  ``on_registered(index, mi)``
    is called after each registration when given.
    """
    if cfg is None:
        cfg = RegistrationConfig()
    n = len(images)
    if n < 2 or len(masks) != n:
        raise DimensionMismatch("need >= 2 images with one mask each")
    if not 0 <= fixed_index < n:
        raise IndexError(f"fixed_index {fixed_index} out of range for {n} images")
    fixed = images[fixed_index]
    for im, mk in zip(images, masks):
        if np.asarray(im).shape != np.asarray(fixed).shape:
            raise DimensionMismatch("atlas images must share dimensions")
        if np.asarray(mk).shape != np.asarray(fixed).shape:
            raise DimensionMismatch("atlas masks must match image dimensions")

    reg_images = []
    reg_masks = []
    for i in range(n):
        if i == fixed_index:
            reg_images.append(np.asarray(images[i], dtype=np.uint8))
            reg_masks.append(np.asarray(masks[i], dtype=bool))
            continue
        t, mi = register_affine(fixed, images[i], cfg)
        reg_images.append(warp_affine(images[i], t, interp="bilinear"))
        reg_masks.append(transform_mask(masks[i], t))
        if on_registered is not None:
            on_registered(i, mi)

    median_image = median_stack(reg_images)
    prob_map = mean_stack(reg_masks)
    if prob_map.max() < 1.0:
        raise AtlasDegenerate(
            f"probability map peaks at {prob_map.max():.3f}; no pixel is "
            "covered by every registered mask"
        )
    return Atlas(
        median_image=median_image,
        prob_map=prob_map,
        orientation=orientation,
        n=n,
        reg_config=cfg,
        fixed_index=fixed_index,
    )


def locate_roi(atlas, image, ctx, cfg=None, radius=20.0):
    """Project the atlas onto ``image`` and center the circular ROI.

    The median template is registered to the image, the probability map is
    transported by the same transform, and the ROI center is the barycenter
    of the pixels with (numerically) full probability.  The first radial
    section points perpendicular to the embryo axis.
    """
    if cfg is None:
        cfg = atlas.reg_config
    if atlas.orientation != ctx.orientation:
        raise DimensionMismatch(
            f"atlas is {atlas.orientation}, image context is {ctx.orientation}"
        )
    t, _ = register_affine(image, atlas.median_image, cfg)
    transported = warp_prob(atlas.prob_map, t)
    threshold = 1.0 - 1.0 / (2.0 * atlas.n)  # absorbs interpolation blur
    mask = transported >= threshold
    fallback = False
    if not mask.any():
        peak = transported.max()
        if peak <= 0.0:
            raise EmptyMask("transported probability map is identically zero")
        log.warning("probability threshold %.3f unmet; falling back to map peak %.3f",
                    threshold, peak)
        mask = transported >= peak
        fallback = True
    center = barycenter(mask)
    return Roi(
        center=center,
        radius=float(radius),
        start_angle=float(ctx.axis_angle + 90.0) % 360.0,
        fallback=fallback,
    )


# ---------------------------------------------------------------------------
# directory format: median.png (8-bit), probmap.png (16-bit), meta.json


def save_atlas(atlas, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_gray(out / "median.png", atlas.median_image)
    write_prob(out / "probmap.png", atlas.prob_map)
    meta = {
        "orientation": atlas.orientation,
        "n": atlas.n,
        "fixed_index": atlas.fixed_index,
        "reg_config": atlas.reg_config.to_text(),
        "format_version": ATLAS_FORMAT_VERSION,
    }
    with open(out / "meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_atlas(atlas_dir):
    root = Path(atlas_dir)
    with open(root / "meta.json") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != ATLAS_FORMAT_VERSION:
        raise ValueError(f"unsupported atlas format version {meta.get('format_version')}")
    return Atlas(
        median_image=read_gray(root / "median.png"),
        prob_map=read_prob(root / "probmap.png"),
        orientation=meta["orientation"],
        n=int(meta["n"]),
        reg_config=RegistrationConfig.from_text(meta["reg_config"]),
        fixed_index=int(meta.get("fixed_index", 0)),
    )
