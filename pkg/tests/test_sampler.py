"""Snippet sampling, shuffling, frame-sets, and the synthetic generator."""

import numpy as np
import pytest

from tcgl import sampler


def _video(frames=64, class_id=0):
    return sampler.gen_synthetic_video(11, sampler.label_for_class(class_id),
                                       frames=frames)


def test_sample_snippets_default_starts():
    snippets = sampler.sample_snippets(_video(), l=16, p=8, n=3)
    assert len(snippets) == 3
    video = _video()
    for k, s in enumerate(snippets):
        start = k * 24
        assert np.array_equal(s, video.data[start:start + 16])


def test_sample_snippets_too_short():
    with pytest.raises(ValueError, match="64"):
        sampler.sample_snippets(_video(frames=63), l=16, p=8, n=3)


def test_sample_snippets_contiguous_split():
    snippets = sampler.sample_snippets(_video(frames=32), l=16, p=0, n=2)
    video = _video(frames=32)
    assert np.array_equal(np.concatenate(snippets), video.data)


def test_permutation_id_roundtrip():
    for n in (2, 3, 4):
        for pid in range(sampler.num_permutations(n)):
            perm = sampler.permutation_from_id(pid, n)
            assert sampler.id_from_permutation(perm) == pid


def test_permutation_id_zero_is_identity():
    assert sampler.permutation_from_id(0, 3) == (0, 1, 2)


def test_shuffle_tuple_identity_and_inverse():
    snippets = sampler.sample_snippets(_video(), 16, 8, 3)
    tup = sampler.shuffle_tuple(snippets, permutation_id=0)
    for orig, shuf in zip(snippets, tup.snippets):
        assert np.array_equal(orig, shuf)
    tup4 = sampler.shuffle_tuple(snippets, permutation_id=4)
    for orig, rest in zip(snippets, tup4.unshuffled()):
        assert np.array_equal(orig, rest)


def test_shuffle_tuple_rejects_bad_id():
    snippets = sampler.sample_snippets(_video(), 16, 8, 3)
    with pytest.raises(ValueError):
        sampler.shuffle_tuple(snippets, permutation_id=6)


def test_shuffle_uniformity():
    snippets = sampler.sample_snippets(_video(), 16, 8, 3)
    rng = np.random.default_rng(123)
    counts = np.zeros(6)
    draws = 10_000
    for _ in range(draws):
        counts[sampler.shuffle_tuple(snippets, rng=rng).permutation_id] += 1
    assert np.all(np.abs(counts / draws - 1 / 6) < 0.02)


def test_split_framesets_partition():
    snippet = sampler.sample_snippets(_video(), 16, 8, 3)[0]
    sets = sampler.split_framesets(snippet, 4)
    assert len(sets) == 4
    assert np.array_equal(np.concatenate(sets), snippet)
    singles = sampler.split_framesets(snippet, 16)
    assert len(singles) == 16


def test_split_framesets_requires_divisibility():
    snippet = sampler.sample_snippets(_video(), 16, 8, 3)[0]
    with pytest.raises(ValueError):
        sampler.split_framesets(snippet, 3)


def test_generator_deterministic():
    a = _video()
    b = _video()
    assert np.array_equal(a.data, b.data)


def test_generator_motion_present():
    v = _video()
    assert np.abs(v.data[1:] - v.data[:-1]).mean() > 0.0


def test_generator_rejects_bad_dims():
    with pytest.raises(ValueError):
        sampler.gen_synthetic_video(0, sampler.label_for_class(0), frames=0)


def test_phase_statistic_tracks_frame_index():
    worst = min(
        np.corrcoef(np.arange(64), sampler.phase_statistic(
            sampler.gen_synthetic_video(1000 + i,
                                        sampler.label_for_class(i % 10))))[0, 1]
        for i in range(100)
    )
    assert worst > 0.9


def test_distinct_classes_have_distinct_periods():
    periods = {sampler.label_for_class(c).period for c in range(10)}
    assert len(periods) == 10


def test_video_file_roundtrip(tmp_path):
    v = _video(class_id=3)
    path = tmp_path / "v.bin"
    sampler.write_video(path, v)
    back = sampler.read_video(path)
    assert back.class_id == 3
    assert np.array_equal(back.data, v.data)


def test_generate_and_load_dataset(tmp_path):
    data_dir = tmp_path / "data"
    manifest = sampler.generate_dataset(data_dir, 12, 4, seed=9)
    loaded_manifest, videos = sampler.load_dataset(data_dir)
    assert loaded_manifest["seed"] == 9
    assert len(videos) == 12
    assert {v.class_id for v in videos} == set(range(4))
    assert [e["class_id"] for e in loaded_manifest["videos"]] == \
        [v.class_id for v in videos]
