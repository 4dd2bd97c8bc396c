import json

import pytest
import torch

from mocha.errors import DataError
from mocha.toydata import (
    ToyCharacter,
    ToyDatasetSpec,
    base_skeleton,
    generate_clip,
    generate_dataset,
    write_dataset,
)


def test_base_skeleton_shape():
    sk = base_skeleton()
    assert sk.n_joint == 17
    sk.require_full_part_cover()
    assert sk.hip_joints() == (11, 14)


def test_same_seed_reproduces_clips():
    c = ToyCharacter("a", {}, 0.5, 1.2)
    one = generate_clip(c, "walk", 2.0, 60.0, seed=4)
    two = generate_clip(c, "walk", 2.0, 60.0, seed=4)
    assert torch.equal(one.root_pos, two.root_pos)
    assert torch.equal(one.rotations, two.rotations)


def test_different_seeds_share_skeleton_but_not_poses():
    c = ToyCharacter("a", {}, 0.5, 1.2)
    one = generate_clip(c, "walk", 2.0, 60.0, seed=7)
    two = generate_clip(c, "walk", 2.0, 60.0, seed=8)
    assert torch.equal(one.skeleton.rest_offset, two.skeleton.rest_offset)
    assert not torch.equal(one.rotations, two.rotations)


def test_limb_scale_changes_offsets_only_in_scaled_parts():
    plain = ToyCharacter("p", {}, 0.5, 1.2).skeleton()
    scaled = ToyCharacter("s", {"left_leg": 1.5, "right_leg": 1.5}, 0.5, 1.2).skeleton()
    legs = [j for j, p in enumerate(plain.bodypart_of_joint) if p.endswith("_leg")]
    rest = [j for j in range(plain.n_joint) if j not in legs]
    assert torch.allclose(scaled.rest_offset[legs], plain.rest_offset[legs] * 1.5)
    assert torch.equal(scaled.rest_offset[rest], plain.rest_offset[rest])


def test_walk_travels_and_oscillates():
    c = ToyCharacter("a", {}, 0.6, 1.4)
    clip = generate_clip(c, "walk", 4.0, 60.0, seed=1)
    assert float(clip.root_pos[-1, 2]) > 0.5
    swing = torch.atan2(clip.rotations[:, 11, 2, 1], clip.rotations[:, 11, 1, 1])
    assert float(swing.max() - swing.min()) > 0.5


def test_amplitude_scales_swing():
    lo = generate_clip(ToyCharacter("a", {}, 0.3, 1.2), "walk", 4.0, 60.0, 1)
    hi = generate_clip(ToyCharacter("b", {}, 0.9, 1.2), "walk", 4.0, 60.0, 1)

    def peak(clip):
        ang = torch.atan2(clip.rotations[:, 11, 2, 1], clip.rotations[:, 11, 1, 1])
        return float(ang.max() - ang.min())

    assert peak(hi) > 2.0 * peak(lo)


def test_validation_rejects_bad_specs():
    with pytest.raises(DataError):
        ToyDatasetSpec(characters=[ToyCharacter("solo")])
    with pytest.raises(DataError):
        ToyDatasetSpec(
            characters=[ToyCharacter("a"), ToyCharacter("b")], actions=["moonwalk"]
        )
    with pytest.raises(DataError):
        generate_clip(ToyCharacter("a"), "moonwalk", 2.0, 60.0, 0)


def test_dataset_covers_characters_and_actions():
    spec = ToyDatasetSpec.default_pair(seed=3)
    clips = generate_dataset(spec)
    assert len(clips) == len(spec.characters) * len(spec.actions)
    ids = {(c.character_id, c.action_label) for c in clips}
    assert len(ids) == len(clips)


def test_write_dataset_is_deterministic(tmp_path):
    spec = ToyDatasetSpec.default_pair(seed=5)
    spec.seconds_per_action = 1.0
    m1 = write_dataset(spec, tmp_path / "one")
    m2 = write_dataset(spec, tmp_path / "two")
    assert m1.read_bytes() == m2.read_bytes()
    for entry in json.loads(m1.read_text()):
        a = (tmp_path / "one" / entry["path"]).read_bytes()
        b = (tmp_path / "two" / entry["path"]).read_bytes()
        assert a == b
