import numpy as np
import pytest

import swimbladder.atlas as atlas_mod
from swimbladder.atlas import build_atlas, load_atlas, locate_roi, save_atlas
from swimbladder.errors import AtlasDegenerate, DimensionMismatch
from swimbladder.imaging import barycenter
from swimbladder.phantom import PhantomSpec, generate_phantom
from swimbladder.preprocessing import EmbryoContext, make_context
from swimbladder.registration import RegistrationConfig


class TestBuildAtlas:
    def test_identical_inputs_reproduce_image_and_mask(self):
        truth = generate_phantom(PhantomSpec(seed=21))
        images = [truth.image] * 4
        masks = [truth.bladder] * 4
        atl = build_atlas(images, masks, fixed_index=0)
        assert np.array_equal(atl.median_image, truth.image)
        assert set(np.unique(atl.prob_map)) <= {0.0, 1.0}
        assert np.array_equal(atl.prob_map == 1.0, truth.bladder)

    def test_jittered_cohort(self, dorsal_truths20, dorsal_atlas):
        atl = dorsal_atlas
        assert atl.n == 20
        assert atl.prob_map.max() == 1.0
        p1 = barycenter(atl.prob_map >= 1.0)
        ref = barycenter(dorsal_truths20[0].bladder)  # fixed frame ground truth
        assert np.hypot(p1.x - ref.x, p1.y - ref.y) <= 5.0

    def test_prob_values_are_fractions(self, dorsal_atlas):
        n = dorsal_atlas.n
        scaled = dorsal_atlas.prob_map * n
        assert np.max(np.abs(scaled - np.round(scaled))) < 1e-9

    def test_iso_levels_nested(self, dorsal_atlas):
        p = dorsal_atlas.prob_map
        assert ((p >= 1.0) & ~(p >= 0.5)).sum() == 0
        assert ((p >= 0.5) & ~(p >= 0.05)).sum() == 0

    def test_too_few_images(self):
        truth = generate_phantom(PhantomSpec(seed=22))
        with pytest.raises(DimensionMismatch):
            build_atlas([truth.image], [truth.bladder])

    def test_disjoint_masks_degenerate(self):
        truth = generate_phantom(PhantomSpec(seed=23))
        m1 = np.zeros_like(truth.bladder)
        m1[10:14, 10:14] = True
        m2 = np.zeros_like(truth.bladder)
        m2[100:104, 100:104] = True
        with pytest.raises(AtlasDegenerate):
            # identical images register to identity; the masks never overlap
            build_atlas([truth.image, truth.image], [m1, m2])

    def test_reports_mi_per_moving_image(self, dorsal_truths20):
        seen = []
        build_atlas(
            [t.image for t in dorsal_truths20[:3]],
            [t.bladder for t in dorsal_truths20[:3]],
            on_registered=lambda i, mi: seen.append((i, mi)),
        )
        assert [i for i, _ in seen] == [1, 2]
        assert all(mi > 0 for _, mi in seen)


class TestLocateRoi:
    def test_on_median_image_itself(self, dorsal_atlas):
        atl = dorsal_atlas
        ctx = make_context(atl.median_image, orientation="dorsal")
        roi = locate_roi(atl, atl.median_image, ctx)
        ref = barycenter(atl.prob_map >= 1.0 - 1.0 / (2 * atl.n))
        assert np.hypot(roi.center.x - ref.x, roi.center.y - ref.y) <= 2.0

    def test_held_out_phantoms_within_10px(self, dorsal_atlas):
        errs = []
        for seed in range(300, 310):
            truth = generate_phantom(PhantomSpec(seed=seed))
            ctx = make_context(truth.image, orientation="dorsal")
            roi = locate_roi(dorsal_atlas, truth.image, ctx)
            ref = barycenter(truth.bladder)
            errs.append(np.hypot(roi.center.x - ref.x, roi.center.y - ref.y))
            assert roi.radius == 20.0
            assert truth.body[int(round(roi.center.y)), int(round(roi.center.x))]
        assert np.mean(np.asarray(errs) <= 10.0) >= 0.9

    def test_start_angle_perpendicular_to_axis(self, dorsal_atlas):
        truth = generate_phantom(PhantomSpec(seed=311))
        ctx = make_context(truth.image, orientation="dorsal")
        roi = locate_roi(dorsal_atlas, truth.image, ctx)
        assert abs((roi.start_angle - ctx.axis_angle) % 360.0 - 90.0) < 1e-9

    def test_orientation_mismatch_raises(self, dorsal_atlas):
        truth = generate_phantom(PhantomSpec(seed=24, orientation="lateral"))
        ctx = EmbryoContext(body=truth.body, axis_angle=0.0, orientation="lateral")
        with pytest.raises(DimensionMismatch):
            locate_roi(dorsal_atlas, truth.image, ctx)

    def test_threshold_fallback_flag(self):
        # an atlas whose probability map peaks below the full-confidence
        # threshold must fall back to its maximum and flag the ROI
        truth = generate_phantom(PhantomSpec(seed=25))
        atl = atlas_mod.Atlas(
            median_image=truth.image,
            prob_map=0.9 * truth.bladder,
            orientation="dorsal",
            n=20,
            reg_config=RegistrationConfig(),
        )
        ctx = make_context(truth.image, orientation="dorsal")
        roi = locate_roi(atl, truth.image, ctx)
        assert roi.fallback
        ref = barycenter(truth.bladder)
        assert np.hypot(roi.center.x - ref.x, roi.center.y - ref.y) <= 3.0

    def test_deterministic(self, dorsal_atlas):
        truth = generate_phantom(PhantomSpec(seed=26))
        ctx = make_context(truth.image, orientation="dorsal")
        r1 = locate_roi(dorsal_atlas, truth.image, ctx)
        r2 = locate_roi(dorsal_atlas, truth.image, ctx)
        assert r1 == r2


class TestAtlasIO:
    def test_roundtrip(self, dorsal_atlas, tmp_path):
        save_atlas(dorsal_atlas, tmp_path / "atl")
        back = load_atlas(tmp_path / "atl")
        assert np.array_equal(back.median_image, dorsal_atlas.median_image)
        # probability map is quantized to 16 bits on disk
        assert np.max(np.abs(back.prob_map - dorsal_atlas.prob_map)) <= 0.5 / 65535.0
        assert (back.prob_map == 1.0).sum() == (dorsal_atlas.prob_map == 1.0).sum()
        assert back.orientation == dorsal_atlas.orientation
        assert back.n == dorsal_atlas.n
        assert back.fixed_index == dorsal_atlas.fixed_index
        assert back.reg_config == dorsal_atlas.reg_config

    def test_meta_contents(self, dorsal_atlas, tmp_path):
        import json

        save_atlas(dorsal_atlas, tmp_path / "atl")
        meta = json.loads((tmp_path / "atl" / "meta.json").read_text())
        assert meta["format_version"] == 1
        assert meta["orientation"] == "dorsal"
        assert meta["n"] == 20
        assert "levels=" in meta["reg_config"]
