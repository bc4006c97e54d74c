import numpy as np
import pytest

from swimbladder.errors import SpecOutOfFrame
from swimbladder.imaging import barycenter
from swimbladder.labels import LABEL_WITH, LABEL_WITHOUT
from swimbladder.phantom import (
    PhantomSpec,
    canonical_bladder_center,
    generate_cohort,
    generate_phantom,
)


class TestGeneratePhantom:
    def test_deterministic(self):
        a = generate_phantom(PhantomSpec(seed=51))
        b = generate_phantom(PhantomSpec(seed=51))
        assert np.array_equal(a.image, b.image)
        assert np.array_equal(a.body, b.body)
        assert np.array_equal(a.bladder, b.bladder)
        assert a.pose == b.pose

    def test_ring_interior_contrast(self):
        spec = PhantomSpec(seed=52)
        truth = generate_phantom(spec)
        center = barycenter(truth.bladder)
        yy, xx = np.indices(truth.image.shape)
        d = np.hypot(xx - center.x, yy - center.y)
        interior = d <= spec.bladder_radius - 4.0
        ring = (d >= spec.bladder_radius - 2.0) & (d <= spec.bladder_radius - 0.5)
        gap = truth.image[interior].mean() - truth.image[ring].mean()
        assert gap >= spec.interior_level - spec.ring_level - 4 * spec.noise_sigma

    def test_without_bladder_homogeneous_site(self):
        spec = PhantomSpec(seed=53, with_bladder=False)
        truth = generate_phantom(spec)
        assert not truth.bladder.any()
        assert truth.label == LABEL_WITHOUT
        site = canonical_bladder_center(spec)
        mapped = truth.pose.inverse().apply(site.x, site.y)
        yy, xx = np.indices(truth.image.shape)
        window = np.hypot(xx - mapped.x, yy - mapped.y) <= spec.bladder_radius
        assert truth.image[window].var() <= 2.0 * spec.noise_sigma**2

    def test_bladder_center_maps_to_canonical(self):
        spec = PhantomSpec(seed=54)
        truth = generate_phantom(spec)
        measured = barycenter(truth.bladder)
        mapped = truth.pose.apply(measured.x, measured.y)
        target = canonical_bladder_center(spec)
        assert np.hypot(mapped.x - target.x, mapped.y - target.y) <= 0.5

    def test_bladder_inside_body(self):
        for seed in range(55, 60):
            truth = generate_phantom(PhantomSpec(seed=seed))
            assert not (truth.bladder & ~truth.body).any()

    def test_out_of_frame_raises(self):
        with pytest.raises(SpecOutOfFrame):
            generate_phantom(PhantomSpec(seed=56, dims=(96, 96)))

    def test_level_ordering_enforced(self):
        with pytest.raises(ValueError):
            PhantomSpec(interior_level=100, body_level=120, ring_level=40)


class TestGenerateCohort:
    def test_reported_cohort_shape(self):
        cohort = generate_cohort(261, 202 / 261, seed=1, fraction_dorsal=0.915)
        labels = [t.label for t in cohort]
        assert labels.count(LABEL_WITH) == 202
        assert labels.count(LABEL_WITHOUT) == 59
        dorsal = sum(t.orientation == "dorsal" for t in cohort)
        assert abs(dorsal / 261 - 0.915) < 0.02

    def test_two_sample_split(self):
        cohort = generate_cohort(2, 0.5, seed=2)
        labels = sorted(t.label for t in cohort)
        assert labels == [LABEL_WITHOUT, LABEL_WITH]

    def test_no_duplicate_images(self):
        cohort = generate_cohort(30, 0.5, seed=3)
        digests = {t.image.tobytes() for t in cohort}
        assert len(digests) == 30

    def test_deterministic(self):
        a = generate_cohort(8, 0.5, seed=4)
        b = generate_cohort(8, 0.5, seed=4)
        for ta, tb in zip(a, b):
            assert np.array_equal(ta.image, tb.image)
            assert ta.label == tb.label

    def test_labels_consistent_with_masks(self):
        for truth in generate_cohort(10, 0.5, seed=5):
            assert truth.bladder.any() == (truth.label == LABEL_WITH)
