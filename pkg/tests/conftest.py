import numpy as np
import pytest

from fallkit.corpus import FallAnnotation, FrameSequence, KeypointTrack, VideoRecord


def make_keypoints(n_frames, positions):
    """Track with the given {joint: (x, y)} visible at confidence 0.9 in
    every frame; everything else undetected."""
    joints = np.zeros((n_frames, 25, 3), dtype=np.float32)
    for j, (x, y) in positions.items():
        joints[:, j] = (x, y, 0.9)
    return KeypointTrack(joints)


def make_record(n_frames=8, width=40, height=30, positions=None, fall=None, video_id="vid0"):
    rng = np.random.default_rng(7)
    frames = rng.integers(0, 255, size=(n_frames, height, width), dtype=np.uint8)
    if positions is None:
        positions = {j: (width // 2, height // 2) for j in range(25)}
    annotation = FallAnnotation(*fall) if fall else FallAnnotation()
    return VideoRecord(
        frames=FrameSequence(frames, fps=30.0, id=video_id),
        keypoints=make_keypoints(n_frames, positions),
        annotation=annotation,
    )


@pytest.fixture
def record():
    return make_record()
