"""Root trajectory composition tests.

The yaw rate must be copied from the source exactly, the position step is
scaled by the hip-speed ratio with clamping, and driving the state with the
source's own windows must reconstruct the source trajectory.
"""

import math

import pytest
import torch

from mocha.clip import MotionClip, compute_root_frame
from mocha.rootmotion import RootState, compose_root, speed_ratio, window_yaw
from mocha.toydata import ToyDatasetSpec, base_skeleton, generate_dataset
from mocha.windows import build_window, windows_from_clip

T = 16


@pytest.fixture(scope="module")
def walk_clip():
    spec = ToyDatasetSpec.default_pair(seed=3)
    spec.seconds_per_action = 2.0
    clips = generate_dataset(spec)
    return next(c for c in clips if c.action_label == "walk")


def still_clip(n=40):
    sk = base_skeleton()
    root = torch.zeros(n, 3, dtype=torch.float64)
    root[:, 1] = 0.9
    rot = torch.eye(3, dtype=torch.float64).expand(n, sk.n_joint, 3, 3).clone()
    return MotionClip(skeleton=sk, fps=60.0, root_pos=root, rotations=rot)


def test_speed_ratio_scales_linearly(walk_clip):
    w = build_window(walk_clip, T - 1, T)
    out = w.y.clone()
    out[:, 0, 9:12] *= 0.5
    assert speed_ratio(w.x, out) == pytest.approx(0.5, abs=1e-12)
    assert speed_ratio(w.x, w.y) == pytest.approx(1.0, abs=1e-12)


def test_speed_ratio_clamped(walk_clip):
    w = build_window(walk_clip, T - 1, T)
    out = w.y.clone()
    out[:, 0, 9:12] *= 50.0
    assert speed_ratio(w.x, out) == 3.0


def test_still_source_gets_unit_ratio():
    clip = still_clip()
    w = build_window(clip, T - 1, T)
    out = w.y.clone()
    out[:, 0, 9:12] += 2.0
    assert speed_ratio(w.x, out) == 1.0
    state = compose_root(w.x, out, clip.skeleton, RootState(), clip.h)
    assert torch.linalg.vector_norm(state.position) < 1e-9


def test_position_step_scales_with_ratio(walk_clip):
    w = build_window(walk_clip, 2 * T, T)
    half = w.y.clone()
    half[:, 0, 9:12] *= 0.5
    prev = RootState(yaw=0.4, position=torch.tensor([1.0, 0.0, -2.0], dtype=torch.float64))
    full_state = compose_root(w.x, w.y, walk_clip.skeleton, prev, walk_clip.h)
    half_state = compose_root(w.x, half, walk_clip.skeleton, prev, walk_clip.h)
    assert half_state.yaw == full_state.yaw
    full_step = full_state.position - prev.position
    half_step = half_state.position - prev.position
    assert torch.allclose(half_step, 0.5 * full_step, atol=1e-12)


def test_yaw_increment_copied_exactly(walk_clip):
    w = build_window(walk_clip, 3 * T, T)
    yaws = window_yaw(w.x, walk_clip.skeleton)
    prev = RootState(yaw=-1.2)
    state = compose_root(w.x, w.y, walk_clip.skeleton, prev, walk_clip.h)
    assert state.yaw - prev.yaw == pytest.approx(
        float(yaws[-1] - yaws[-2]), abs=1e-15
    )


def test_source_trajectory_reconstructed(walk_clip):
    """Unit ratio composition replays the source's own root trajectory."""
    ends = list(range(T - 1, walk_clip.n_frames))
    wins = windows_from_clip(walk_clip, ends, T)
    state = RootState.from_frame(compute_root_frame(walk_clip, ends[0]))
    for w in wins[1:]:
        state = compose_root(w.x, w.y, walk_clip.skeleton, state, walk_clip.h)
    ref = compute_root_frame(walk_clip, ends[-1])
    assert torch.allclose(state.position, ref.origin, atol=1e-8)
    f = ref.facing
    want_yaw = math.atan2(float(f[0]), float(f[2]))
    got = (state.yaw - want_yaw + math.pi) % (2 * math.pi) - math.pi
    assert abs(got) < 1e-8


def test_state_frame_round_trip():
    st = RootState(yaw=0.7, position=torch.tensor([0.3, 0.0, 1.5], dtype=torch.float64))
    back = RootState.from_frame(st.frame())
    assert back.yaw == pytest.approx(st.yaw, abs=1e-12)
    assert torch.equal(back.position, st.position)
