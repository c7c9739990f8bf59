"""Evaluation kit: galleries, retrieval, order accuracy, verification."""

import numpy as np
import pytest

from tcgl import evalkit, sampler, trainer

from conftest import small_config


def _toy_gallery():
    emb = np.array([
        [1.0, 0.0],
        [0.9, 0.1],
        [0.0, 1.0],
        [-1.0, 0.0],
        [0.5, 0.5],
    ])
    labels = np.array([0, 0, 1, 2, 1])
    return evalkit.EmbeddingGallery(embeddings=emb, labels=labels)


def test_gallery_rejects_mismatched_labels():
    with pytest.raises(ValueError):
        evalkit.EmbeddingGallery(embeddings=np.ones((3, 2)),
                                 labels=np.array([0, 1]))


def test_gallery_rejects_non_finite():
    with pytest.raises(ValueError):
        evalkit.EmbeddingGallery(embeddings=np.array([[np.inf, 0.0]]),
                                 labels=np.array([0]))


def test_gallery_save_load_round_trip(tmp_path):
    g = _toy_gallery()
    evalkit.save_gallery(g, tmp_path / "gal")
    loaded = evalkit.load_gallery(tmp_path / "gal")
    assert np.array_equal(loaded.embeddings, g.embeddings)
    assert np.array_equal(loaded.labels, g.labels)
    assert loaded.split == g.split


def test_load_gallery_rejects_other_blobs(tmp_path):
    from tcgl import blobio
    blobio.save_arrays(tmp_path / "ck", {"x": np.ones(1)},
                       meta={"kind": "checkpoint"})
    with pytest.raises(ValueError):
        evalkit.load_gallery(tmp_path / "ck")


def test_retrieve_matches_brute_force_cosine_sort():
    g = _toy_gallery()
    rng = np.random.default_rng(4)
    for _ in range(20):
        q = rng.standard_normal(2)
        dists = [1.0 - (row @ q) / (np.linalg.norm(row) * np.linalg.norm(q))
                 for row in g.embeddings]
        expected = np.argsort(dists, kind="stable")[:3]
        assert np.array_equal(evalkit.retrieve(q, g, 3), expected)


def test_retrieve_breaks_ties_by_gallery_index():
    emb = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    g = evalkit.EmbeddingGallery(embeddings=emb, labels=np.zeros(3, dtype=int))
    # rows 0 and 1 are parallel: identical cosine distance, index order wins
    assert list(evalkit.retrieve(np.array([1.0, 0.0]), g, 2)) == [0, 1]


def test_retrieve_input_validation():
    g = _toy_gallery()
    with pytest.raises(ValueError):
        evalkit.retrieve(np.array([1.0, 0.0]), g, 6)
    with pytest.raises(ValueError):
        evalkit.retrieve(np.zeros(2), g, 1)
    with pytest.raises(ValueError):
        evalkit.retrieve(np.ones(3), g, 1)


def test_topk_accuracy_full_gallery_is_one():
    g = _toy_gallery()
    assert evalkit.topk_accuracy(g, g, 5) == pytest.approx(1.0)


def test_topk_self_query_top1_is_exact_match():
    g = _toy_gallery()
    assert evalkit.topk_accuracy(g, g, 1) == pytest.approx(1.0)


def test_monotone_topk_reports_accuracies():
    g = _toy_gallery()
    accs, mono = evalkit.monotone_topk(g, g, ks=(1, 2, 5))
    assert len(accs) == 3
    assert mono
    assert accs[-1] == pytest.approx(1.0)


def test_chance_level():
    assert evalkit.chance_level(3) == pytest.approx(1.0 / 6.0)
    assert evalkit.chance_level(2) == pytest.approx(0.5)


def test_eval_order_rejects_mismatched_dataset(small_dataset, tmp_path):
    cfg = small_config(str(small_dataset), epochs=1)
    ckpt, _ = trainer.train(cfg)
    wrong = sampler.gen_synthetic_video(
        0, sampler.label_for_class(0), frames=80, height=8, width=8,
        channels=2)
    with pytest.raises(ValueError):
        evalkit.eval_order(ckpt, [wrong])


def test_eval_order_is_deterministic(small_dataset):
    cfg = small_config(str(small_dataset), epochs=1)
    ckpt, _ = trainer.train(cfg)
    _, videos = sampler.load_dataset(small_dataset)
    a = evalkit.eval_order(ckpt, videos, indices=range(10))
    b = evalkit.eval_order(ckpt, videos, indices=range(10))
    assert a == b
    assert 0.0 <= a <= 1.0


def test_view_statistics_near_nominal_rates():
    removal, mask = evalkit.view_statistics(0.2, 0.1, draws=2000)
    assert abs(removal - 0.2) < 0.03
    assert abs(mask - 0.1) < 0.03


def test_oracle_graph_loss_symmetrizes_pairwise(rng):
    from tcgl import contrast
    u = rng.standard_normal((5, 4))
    v = rng.standard_normal((5, 4))
    proj = contrast.init_projection(rng, 4)
    a = evalkit.oracle_pairwise(u, v, 2, 0.5, proj)
    assert np.isfinite(a)
    graph = evalkit.oracle_graph_loss(u, v, 0.5, proj)
    expected = np.mean([
        (evalkit.oracle_pairwise(u, v, i, 0.5, proj)
         + evalkit.oracle_pairwise(v, u, i, 0.5, proj)) / 2.0
        for i in range(5)])
    assert graph == pytest.approx(expected)


def test_verification_report_lines_and_gating():
    report = evalkit.VerificationReport()
    report.add("small-error", 1e-6, 1e-4)
    report.add("high-accuracy", 0.95, 0.9, larger_is_better=True)
    assert report.all_passed
    report.add("too-big", 2.0, 1.0, detail="expected failure")
    assert not report.all_passed
    lines = report.lines()
    assert len(lines) == 3
    assert lines[0].startswith("[PASS]")
    assert "[FAIL]" in lines[2] and "expected failure" in lines[2]


def test_verify_all_passes():
    report = evalkit.verify_all(seed=0)
    assert report.all_passed, "\n".join(report.lines())
