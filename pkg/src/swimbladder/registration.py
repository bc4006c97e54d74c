"""Mutual-information affine registration.

The similarity between a fixed image and a warped moving image is the
mutual information of their joint intensity histogram (hard-binned, dense
sampling of the overlap, bilinear intensity interpolation), maximized over
the six affine parameters with a coarse-to-fine adaptive-step descent on a
Gaussian pyramid.
"""

import logging
import math
from dataclasses import dataclass, fields

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import NoOverlap, SingularTransform
from .imaging import Affine2D

log = logging.getLogger(__name__)

_LINEAR_STEP_RATIO = 0.01  # linear-part step = translation step * ratio


@dataclass
class RegistrationConfig:
    levels: int = 4
    iterations_per_level: int = 200
    bins: int = 32
    initial_step: float = 2.0
    min_step: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.bins < 2:
            raise ValueError("bins must be >= 2")
        if not self.initial_step > self.min_step > 0:
            raise ValueError("need initial_step > min_step > 0")

    def to_text(self):
        """Key=value block, one field per line."""
        return "\n".join(f"{f.name}={getattr(self, f.name)}" for f in fields(self))

    @classmethod
    def from_text(cls, text):
        kinds = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in kinds:
                raise ValueError(f"unknown registration option {key!r}")
            caster = float if kinds[key] in ("float", float) else int
            kwargs[key] = caster(value.strip())
        return cls(**kwargs)


@dataclass
class JointHistogram:
    """Joint occurrence counts of fixed vs warped-moving intensity bins."""

    bins: int
    counts: np.ndarray  # (bins, bins) int64, rows = fixed bins

    @property
    def total(self):
        return int(self.counts.sum())

    @property
    def marginal_fixed(self):
        return self.counts.sum(axis=1) / self.total

    @property
    def marginal_moving(self):
        return self.counts.sum(axis=0) / self.total

    def mutual_information(self):
        """MI in bits; always >= 0."""
        n = self.total
        if n == 0:
            raise NoOverlap("joint histogram has no samples")
        p = self.counts / n
        pf = p.sum(axis=1)
        pm = p.sum(axis=0)
        nz = p > 0
        denom = np.outer(pf, pm)
        mi = float(np.sum(p[nz] * np.log2(p[nz] / denom[nz])))
        assert mi > -1e-9, f"mutual information came out negative: {mi}"
        return max(mi, 0.0)

    def entropy_fixed(self):
        pf = self.marginal_fixed
        nz = pf > 0
        return float(-np.sum(pf[nz] * np.log2(pf[nz])))


def joint_histogram(fixed, moving, t: Affine2D, bins=32):
    """Histogram fixed pixels against bilinear moving samples over the overlap."""
    fixed = np.asarray(fixed, dtype=np.float64)
    moving = np.asarray(moving, dtype=np.float64)
    counts, n = kernels.joint_hist(
        fixed, moving, t.a11, t.a12, t.a21, t.a22, t.tx, t.ty, bins
    )
    if n == 0:
        raise NoOverlap("warped moving image does not intersect the fixed frame")
    return JointHistogram(bins=bins, counts=counts)


def mutual_information(fixed, moving, t: Affine2D, bins=32):
    """Mutual information (bits) between fixed and moving under ``t``."""
    return joint_histogram(fixed, moving, t, bins).mutual_information()


def transform_mask(mask, t: Affine2D):
    """Nearest-neighbour warp of a binary mask (labels stay binary)."""
    if t.det == 0.0:
        raise SingularTransform("cannot warp mask with a singular transform")
    src = np.asarray(mask, dtype=np.float64)
    h, w = src.shape
    out = kernels.warp_nearest(src, t.a11, t.a12, t.a21, t.a22, t.tx, t.ty, h, w, 0.0)
    return out > 0.5


def _pyramid(image, levels):
    """Gaussian pyramid, full resolution first, factor 2 per level."""
    levels_out = [np.asarray(image, dtype=np.float64)]
    for _ in range(levels - 1):
        prev = levels_out[-1]
        if min(prev.shape) < 32:
            break
        smoothed = ndimage.gaussian_filter(prev, sigma=1.0, mode="nearest")
        levels_out.append(smoothed[::2, ::2])
    return levels_out


def _params_to_transform(p, cx, cy):
    """Six pose parameters to an Affine2D about the frame center (cx, cy).

    Parameters are (rotation rad, log scale x, log scale y, shear,
    center shift x, center shift y); the linear part is the rotation times
    an upper-triangular factor, so every parameter moves one geometric
    degree of freedom — which keeps coordinate descent from having to move
    four matrix entries in lockstep to realize a rotation.
    """
    theta, ls1, ls2, shear, ux, uy = p
    c = math.cos(theta)
    s = math.sin(theta)
    s1 = math.exp(ls1)
    s2 = math.exp(ls2)
    a11 = c * s1
    a12 = c * shear - s * s2
    a21 = s * s1
    a22 = s * shear + c * s2
    return Affine2D(
        a11=a11,
        a12=a12,
        a21=a21,
        a22=a22,
        tx=cx + ux - (a11 * cx + a12 * cy),
        ty=cy + uy - (a21 * cx + a22 * cy),
    )


def register_affine(fixed, moving, cfg: RegistrationConfig = None):
    """Maximize mutual information over affine transforms.

    Returns (transform, mi) where the transform maps fixed-frame coordinates
    to moving-frame coordinates (pull convention) and mi is the final
    mutual information at full resolution.  Never returns a transform whose
    MI is below the identity transform's.  Fully deterministic.
    """
    if cfg is None:
        cfg = RegistrationConfig()
    fixed = np.asarray(fixed, dtype=np.float64)
    moving = np.asarray(moving, dtype=np.float64)

    fixed_pyr = _pyramid(fixed, cfg.levels)
    moving_pyr = _pyramid(moving, cfg.levels)
    n_levels = min(len(fixed_pyr), len(moving_pyr))

    # pose parameters: rotation, log scales, shear, center shift (level px)
    p = np.zeros(6)

    for level in range(n_levels - 1, -1, -1):
        fx = fixed_pyr[level]
        mv = moving_pyr[level]
        cx = (fx.shape[1] - 1) / 2.0
        cy = (fx.shape[0] - 1) / 2.0

        def score(params):
            t = _params_to_transform(params, cx, cy)
            try:
                return mutual_information(fx, mv, t, cfg.bins)
            except NoOverlap:
                return -np.inf

        current = score(p)
        if current == -np.inf and level == n_levels - 1:
            raise NoOverlap("images do not overlap at the coarsest level")

        sweeps = 0
        for expansion in range(2):  # second round re-expands to hop plateaus
            step_t = cfg.initial_step / (4.0**expansion)
            step_l = step_t * _LINEAR_STEP_RATIO
            while sweeps < cfg.iterations_per_level:
                sweeps += 1
                improved = False
                for i in range(6):
                    delta = step_l if i < 4 else step_t
                    for sign in (1.0, -1.0):
                        trial = p.copy()
                        trial[i] += sign * delta
                        trial_score = score(trial)
                        if trial_score > current:
                            p = trial
                            current = trial_score
                            improved = True
                            break
                if not improved:
                    step_t *= 0.5
                    step_l *= 0.5
                    if step_t < cfg.min_step:
                        break
        if level > 0:
            p[4] *= 2.0
            p[5] *= 2.0

    cx = (fixed.shape[1] - 1) / 2.0
    cy = (fixed.shape[0] - 1) / 2.0
    best = _params_to_transform(p, cx, cy)
    best_mi = mutual_information(fixed, moving, best, cfg.bins)
    identity_mi = mutual_information(fixed, moving, Affine2D.identity(), cfg.bins)
    if best_mi < identity_mi:
        log.warning(
            "registration did not improve on identity (%.4f < %.4f bits)",
            best_mi,
            identity_mi,
        )
        return Affine2D.identity(), identity_mi
    return best, best_mi
