import numpy as np
import pytest

from conftest import make_record
from fallkit import occlusion
from fallkit.corpus import KeypointTrack
from fallkit.occlusion import (
    PRESETS,
    OccluderPreset,
    OcclusionSkipped,
    apply_constant_occlusion,
    apply_dynamic_occlusion,
    augment_video,
    occluder_rect,
)


def track_with(points_per_frame):
    joints = np.zeros((len(points_per_frame), 25, 3), dtype=np.float32)
    for t, pts in enumerate(points_per_frame):
        for j, (x, y, c) in pts.items():
            joints[t, j] = (x, y, c)
    return KeypointTrack(joints)


RIGHT_ARM = OccluderPreset("right-arm", frozenset({2, 3, 4}), padding=2, min_side=1)


class TestOccluderRect:
    def test_padded_bounding_box(self):
        # oracle: min/max over joints +/- padding
        track = track_with([{2: (10, 10, 0.9), 3: (12, 20, 0.9), 4: (14, 30, 0.9)}])
        rect = occluder_rect(track, RIGHT_ARM, 0, None, width=100, height=100)
        assert rect == (8, 8, 16, 32)

    def test_hold_last_on_dropout(self):
        track = track_with([{2: (10, 10, 0.0)}])  # all below threshold
        rect = occluder_rect(track, RIGHT_ARM, 0, (8, 8, 16, 32), width=100, height=100)
        assert rect == (8, 8, 16, 32)

    def test_none_when_never_visible(self):
        track = track_with([{}])
        assert occluder_rect(track, RIGHT_ARM, 0, None, width=100, height=100) is None

    def test_min_side_growth_centered(self):
        preset = OccluderPreset("right-arm", frozenset({2, 3, 4}), padding=0, min_side=4)
        track = track_with([{2: (50, 50, 0.9)}])
        rect = occluder_rect(track, preset, 0, None, width=100, height=100)
        assert rect == (48, 48, 52, 52)

    def test_clamped_to_image(self):
        track = track_with([{2: (1, 1, 0.9)}])
        rect = occluder_rect(track, RIGHT_ARM, 0, None, width=20, height=20)
        x0, y0, x1, y1 = rect
        assert x0 >= 0 and y0 >= 0 and x1 <= 19 and y1 <= 19

    def test_low_confidence_joint_ignored(self):
        track = track_with([{2: (10, 10, 0.9), 3: (90, 90, 0.05)}])
        rect = occluder_rect(track, RIGHT_ARM, 0, None, width=100, height=100)
        assert rect == (8, 8, 12, 12)


class TestDynamicOcclusion:
    def test_static_subject_gives_static_rect(self):
        video = make_record(n_frames=6, positions={2: (20, 15), 3: (22, 18), 4: (24, 20)})
        out = apply_dynamic_occlusion(video, RIGHT_ARM, seed=3)
        rects = {tuple(np.argwhere(out.frames.frames[t] != video.frames.frames[t]).min(0)) for t in range(6)}
        assert len(rects) == 1  # identical rectangle every frame

    def test_determinism_bit_identical(self):
        video = make_record()
        a = apply_dynamic_occlusion(video, PRESETS[0], seed=11)
        b = apply_dynamic_occlusion(video, PRESETS[0], seed=11)
        assert np.array_equal(a.frames.frames, b.frames.frames)
        c = apply_dynamic_occlusion(video, PRESETS[0], seed=12)
        assert not np.array_equal(a.frames.frames, c.frames.frames)

    def test_pixels_outside_rect_untouched_and_fill_constant(self):
        video = make_record(n_frames=5, positions={2: (10, 10), 3: (12, 14), 4: (9, 18)})
        out = apply_dynamic_occlusion(video, RIGHT_ARM, seed=5)
        fills = set()
        for t in range(5):
            diff = out.frames.frames[t] != video.frames.frames[t]
            ys, xs = np.nonzero(diff)
            assert len(ys)  # occluder touched the frame
            y0, y1, x0, x1 = ys.min(), ys.max(), xs.min(), xs.max()
            # the changed region is exactly one filled rectangle
            assert diff[y0 : y1 + 1, x0 : x1 + 1].mean() > 0.95
            fills.update(np.unique(out.frames.frames[t][y0 : y1 + 1, x0 : x1 + 1]).tolist())
        assert len(fills) == 1  # one gray level across the whole video

    def test_annotation_and_parent_copied(self):
        video = make_record(fall=(2, 5))
        out = apply_dynamic_occlusion(video, PRESETS[0], seed=1)
        assert out.annotation == video.annotation
        assert out.parent_id == video.id
        assert out.origin == "dynamic_occluded"

    def test_requires_keypoints(self):
        video = make_record()
        video.keypoints = None
        with pytest.raises(ValueError, match="keypoints"):
            apply_dynamic_occlusion(video, PRESETS[0], seed=0)

    def test_rect_intersects_visible_joint_box(self):
        video = make_record(n_frames=6)
        # move all joints around the frame
        video.keypoints.joints[:, :, 0] = np.linspace(8, 30, 6)[:, None]
        video.keypoints.joints[:, :, 1] = 12.0
        video.keypoints.joints[:, :, 2] = 1.0
        preset = PRESETS[1]  # head-neck
        out = apply_dynamic_occlusion(video, preset, seed=2)
        for t in range(6):
            pts = video.keypoints.visible(t, sorted(preset.joints))
            diff = np.nonzero(out.frames.frames[t] != video.frames.frames[t])
            if len(diff[0]) == 0:  # fill may match underlying pixels by chance
                continue
            x0, x1 = diff[1].min(), diff[1].max()
            y0, y1 = diff[0].min(), diff[0].max()
            assert pts[:, 0].min() <= x1 and pts[:, 0].max() >= x0
            assert pts[:, 1].min() <= y1 and pts[:, 1].max() >= y0


class TestAugmentVideo:
    def test_full_skeleton_yields_ten(self):
        video = make_record()
        variants, skipped = augment_video(video, seed=4)
        assert len(variants) == 10 and skipped == []
        assert [v.id for v in variants] == [f"{video.id}__dyn-{p.name}" for p in PRESETS]

    def test_missing_legs_skips_leg_presets(self):
        positions = {j: (20, 10) for j in (0, 1, 2, 3, 4, 5, 6, 7, 8, 15, 16, 17, 18)}
        video = make_record(positions=positions)
        variants, skipped = augment_video(video, seed=4)
        assert set(skipped) == {"both-legs", "right-leg", "left-leg"}
        assert len(variants) == 7

    def test_empty_track_is_error(self):
        video = make_record(positions={})
        with pytest.raises(OcclusionSkipped):
            augment_video(video, seed=0)

    def test_deterministic_output_count(self):
        video = make_record()
        a, _ = augment_video(video, seed=9)
        b, _ = augment_video(video, seed=9)
        assert len(a) == len(b) == 10
        for va, vb in zip(a, b):
            assert np.array_equal(va.frames.frames, vb.frames.frames)


class TestConstantOcclusion:
    def test_same_seed_same_rectangle(self):
        video = make_record()
        a = apply_constant_occlusion(video, seed=21)
        b = apply_constant_occlusion(video, seed=21)
        assert np.array_equal(a.frames.frames, b.frames.frames)

    def test_rect_static_and_sized_in_range(self):
        video = make_record(width=60, height=40, n_frames=5)
        out = apply_constant_occlusion(video, seed=3)
        diffs = [np.nonzero(out.frames.frames[t] != video.frames.frames[t]) for t in range(5)]
        boxes = {(d[0].min(), d[0].max(), d[1].min(), d[1].max()) for d in diffs if len(d[0])}
        assert len(boxes) == 1  # identical in all frames
        y0, y1, x0, x1 = boxes.pop()
        # drawn extents bound the true rectangle from inside
        assert (x1 - x0 + 1) <= round(0.35 * 60) + 1
        assert (y1 - y0 + 1) <= round(0.35 * 40) + 1

    def test_variants_differ_and_count_matches_presets(self):
        video = make_record()
        variants = occlusion.constant_variants(video, seed=2)
        assert len(variants) == len(PRESETS) == 10
        assert len({v.id for v in variants}) == 10
        assert all(v.origin == "constant_occluded" for v in variants)

    def test_valid_even_if_subject_missed(self):
        video = make_record(positions={})  # no subject at all
        out = apply_constant_occlusion(video, seed=1)
        assert out.origin == "constant_occluded"
        assert out.annotation == video.annotation
