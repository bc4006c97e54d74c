"""Synthetic embryo images with exact ground truth.

Each phantom is an elliptical body with a few asymmetric landmarks (head
patch, eye spots, and for lateral views a yolk patch) rendered at a jittered
pose, optionally carrying the organ of interest as a dark ring around a
bright interior — the contrast pattern the contour stage is built to find.
Everything is drawn analytically in a canonical frame and sampled through
the pose transform, so the returned masks and pose are exact.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import SpecOutOfFrame
from .imaging import Affine2D, PointF
from .labels import LABEL_WITH, LABEL_WITHOUT, ORIENTATIONS

DEFAULT_BODY_AXES = {"dorsal": (70.0, 26.0), "lateral": (64.0, 34.0)}

HEAD_LEVEL = 85
EYE_LEVEL = 30
YOLK_LEVEL = 100
RING_WIDTH = 2.5  # radial thickness of the dark ring, pixels


@dataclass(frozen=True)
class PhantomSpec:
    seed: int = 0
    with_bladder: bool = True
    orientation: str = "dorsal"
    dims: tuple = (192, 192)  # (width, height)
    body_axes: tuple = None  # (semi-major, semi-minor); None = per-orientation default
    bladder_radius: float = 12.0
    interior_level: int = 190
    ring_level: int = 40
    body_level: int = 120
    background_level: int = 10
    noise_sigma: float = 6.0
    pose_jitter: tuple = (8.0, 10.0, 0.05)  # (translation px, rotation deg, scale frac)

    def __post_init__(self):
        if self.orientation not in ORIENTATIONS:
            raise ValueError(f"unknown orientation {self.orientation!r}")
        if not self.interior_level > self.body_level > self.ring_level:
            raise ValueError("need interior_level > body_level > ring_level")

    def resolved_axes(self):
        return self.body_axes or DEFAULT_BODY_AXES[self.orientation]


@dataclass(frozen=True)
class PhantomTruth:
    image: np.ndarray
    body: np.ndarray
    bladder: np.ndarray
    label: str
    pose: Affine2D  # image frame -> canonical frame (pull convention)
    orientation: str = "dorsal"
    seed: int = 0


def canonical_bladder_center(spec: PhantomSpec):
    """Organ center in the canonical (unjittered) frame."""
    w, h = spec.dims
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    a, b = spec.resolved_axes()
    if spec.orientation == "dorsal":
        return PointF(cx + 0.38 * a, cy)
    return PointF(cx + 0.30 * a, cy - 0.28 * b)


def bladder_center(spec: PhantomSpec, pose: Affine2D):
    """Organ center in the rendered image frame."""
    q = canonical_bladder_center(spec)
    return pose.inverse().apply(q.x, q.y)


def generate_phantom(spec: PhantomSpec):
    """Render one phantom; fully determined by the spec (including seed)."""
    w, h = spec.dims
    cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
    a, b = spec.resolved_axes()

    rng = np.random.Generator(np.random.PCG64(spec.seed))
    t_max, r_max, s_max = spec.pose_jitter
    dx, dy = rng.uniform(-t_max, t_max, size=2)
    phi = rng.uniform(-r_max, r_max)
    scale = rng.uniform(1.0 - s_max, 1.0 + s_max)

    pose = Affine2D.rotation_about(-phi, cx, cy, scale=1.0 / scale).compose(
        Affine2D.translation(-dx, -dy)
    )

    xg, yg = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    u = pose.a11 * xg + pose.a12 * yg + pose.tx - cx
    v = pose.a21 * xg + pose.a22 * yg + pose.ty - cy

    body = (u / a) ** 2 + (v / b) ** 2 <= 1.0
    if body[0, :].any() or body[-1, :].any() or body[:, 0].any() or body[:, -1].any():
        raise SpecOutOfFrame("jittered body touches the frame border")

    levels = np.full((h, w), float(spec.background_level))
    levels[body] = spec.body_level

    head = (u + 0.72 * a) ** 2 + v**2 <= (0.42 * b) ** 2
    levels[head & body] = HEAD_LEVEL
    if spec.orientation == "dorsal":
        for sign in (-1.0, 1.0):
            eye = (u + 0.78 * a) ** 2 + (v + sign * 0.40 * b) ** 2 <= 2.6**2
            levels[eye & body] = EYE_LEVEL
    else:
        yolk = ((u + 0.10 * a) / (0.30 * a)) ** 2 + ((v - 0.30 * b) / (0.45 * b)) ** 2 <= 1.0
        levels[yolk & body] = YOLK_LEVEL
        eye = (u + 0.78 * a) ** 2 + (v + 0.20 * b) ** 2 <= 2.8**2
        levels[eye & body] = EYE_LEVEL

    q = canonical_bladder_center(spec)
    d2 = (u - (q.x - cx)) ** 2 + (v - (q.y - cy)) ** 2
    if spec.with_bladder:
        ring = d2 <= spec.bladder_radius**2
        interior = d2 <= (spec.bladder_radius - RING_WIDTH) ** 2
        levels[ring] = spec.ring_level
        levels[interior] = spec.interior_level
        bladder = ring
        if (bladder & ~body).any():
            raise SpecOutOfFrame("organ extends outside the body")
        label = LABEL_WITH
    else:
        bladder = np.zeros((h, w), dtype=bool)
        label = LABEL_WITHOUT

    noisy = levels + rng.normal(0.0, spec.noise_sigma, size=(h, w))
    image = np.clip(np.floor(noisy + 0.5), 0, 255).astype(np.uint8)
    return PhantomTruth(
        image=image,
        body=body,
        bladder=bladder,
        label=label,
        pose=pose,
        orientation=spec.orientation,
        seed=spec.seed,
    )


def generate_cohort(n, fraction_with, base_spec: PhantomSpec = None, seed=0,
                    fraction_dorsal=None):
    """Generate ``n`` phantoms with independent jitter.

    Exactly round(n * fraction_with) phantoms carry the organ.  When
    ``fraction_dorsal`` is given, each label group splits between the two
    orientations in that proportion; otherwise every phantom uses the base
    spec's orientation.  Presentation order is a seeded shuffle.
    """
    if n < 2:
        raise ValueError("cohort needs n >= 2")
    if base_spec is None:
        base_spec = PhantomSpec()
    n_with = int(round(n * fraction_with))
    n_with = min(max(n_with, 0), n)

    assignments = []
    for with_bladder, count in ((True, n_with), (False, n - n_with)):
        if fraction_dorsal is None:
            orients = [base_spec.orientation] * count
        else:
            n_dorsal = int(round(count * fraction_dorsal))
            orients = ["dorsal"] * n_dorsal + ["lateral"] * (count - n_dorsal)
        assignments.extend((with_bladder, o) for o in orients)

    master = np.random.Generator(np.random.PCG64(seed))
    master.shuffle(assignments)
    out = []
    for with_bladder, orientation in assignments:
        item_seed = int(master.integers(2**63))
        axes = base_spec.body_axes
        if orientation != base_spec.orientation and axes is not None:
            axes = None  # fall back to per-orientation defaults when mixing
        spec = replace(
            base_spec,
            seed=item_seed,
            with_bladder=with_bladder,
            orientation=orientation,
            body_axes=axes,
        )
        out.append(generate_phantom(spec))
    return out
