"""Nearest-neighbor retrieval protocol, order-prediction evaluation, and
the consolidated verification suites (gradient checks, loss oracles,
Monte-Carlo view statistics, determinism).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import blobio, contrast, diffcore as dc, encoder, orderhead, sampler, tgraph, trainer


@dataclass
class EmbeddingGallery:
    embeddings: np.ndarray  # (num_videos, dim)
    labels: np.ndarray      # (num_videos,) class ids
    split: str = "train"

    def __post_init__(self):
        if self.embeddings.shape[0] != len(self.labels):
            raise ValueError("one label per embedding row is required")
        if not np.all(np.isfinite(self.embeddings)):
            raise ValueError("gallery embeddings must be finite")


def save_gallery(gallery: EmbeddingGallery, path):
    blobio.save_arrays(path, {
        "embeddings": gallery.embeddings,
        "labels": gallery.labels.astype(np.float64),
    }, meta={"kind": "gallery", "split": gallery.split})


def load_gallery(path):
    arrays, meta = blobio.load_arrays(path)
    if meta.get("kind") != "gallery":
        raise ValueError(f"{path}: not a gallery directory")
    return EmbeddingGallery(
        embeddings=arrays["embeddings"],
        labels=arrays["labels"].astype(np.int64),
        split=meta.get("split", "train"),
    )


def embed_video(video, model: trainer.Model, config: trainer.TrainConfig,
                backbone_only=False):
    """Retrieval embedding: encoder feature of the chronologically middle
    snippet, optionally passed through the single-node inter-graph GCN."""
    snippets = sampler.sample_snippets(video, config.l, config.p, config.n)
    feat = encoder.encode(snippets[config.n // 2], model.enc_snip)
    if backbone_only:
        return feat.data.copy()
    # single node with a self-loop: normalization is 1, so relu(x W)
    return np.maximum(feat.data @ model.gcn_inter.weight.data, 0.0)


def build_gallery(videos, model, config, split="train", backbone_only=False):
    rows = [embed_video(v, model, config, backbone_only) for v in videos]
    labels = np.array([v.class_id for v in videos], dtype=np.int64)
    return EmbeddingGallery(embeddings=np.stack(rows), labels=labels, split=split)


def retrieve(query, gallery: EmbeddingGallery, k):
    """Indices of the k nearest gallery rows by cosine distance.

    Distance is 1 - <q, g> over unit vectors; ties break by ascending
    gallery index (stable sort).
    """
    if k > gallery.embeddings.shape[0]:
        raise ValueError(f"k={k} exceeds gallery size {gallery.embeddings.shape[0]}")
    qn = np.linalg.norm(query)
    if qn < 1e-12:
        raise ValueError("zero-norm query cannot be ranked by cosine distance")
    if query.shape[0] != gallery.embeddings.shape[1]:
        raise ValueError(
            f"query dim {query.shape[0]} != gallery dim {gallery.embeddings.shape[1]}"
        )
    g_norms = np.linalg.norm(gallery.embeddings, axis=1)
    g_norms = np.where(g_norms < 1e-12, 1e-12, g_norms)
    dists = 1.0 - (gallery.embeddings @ (query / qn)) / g_norms
    return np.argsort(dists, kind="stable")[:k]


def topk_accuracy(queries: EmbeddingGallery, gallery: EmbeddingGallery, k):
    """Fraction of queries whose class appears among the k nearest classes."""
    if queries.embeddings.shape[0] == 0:
        raise ValueError("empty query set")
    hits = 0
    for row, label in zip(queries.embeddings, queries.labels):
        idx = retrieve(row, gallery, k)
        hits += label in gallery.labels[idx]
    return hits / queries.embeddings.shape[0]


def retrieval_table(queries, gallery, ks=(1, 5, 10, 20, 50)):
    return {k: topk_accuracy(queries, gallery, k) for k in ks}


def eval_order(ckpt: trainer.Checkpoint, videos, indices=None):
    """Order-prediction accuracy with per-(seed, video) deterministic draws."""
    config = ckpt.config
    if videos and videos[0].channels * 2 * config.l != \
            ckpt.params["enc_snip.weight"].shape[0]:
        raise ValueError("checkpoint configuration does not match this dataset")
    model = trainer.restore_model(ckpt, videos[0].channels if videos else 1)
    indices = range(len(videos)) if indices is None else indices
    correct = total = 0
    for idx in indices:
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 6, idx)))
        perm_id = trainer.val_permutation_id(config.seed, idx, config.n)
        res = trainer.forward_sample(model, config, videos[idx], perm_id, rng)
        correct += res.correct
        total += 1
    if total == 0:
        raise ValueError("no videos to evaluate")
    return correct / total


# -- consolidated verification -----------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)

    def add(self, name, measured, threshold, *, larger_is_better=False, detail=""):
        passed = measured >= threshold if larger_is_better else measured <= threshold
        self.checks.append(CheckResult(name, bool(passed), float(measured),
                                       float(threshold), detail))

    @property
    def all_passed(self):
        return all(c.passed for c in self.checks)

    def lines(self):
        out = []
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            line = f"[{status}] {c.name}: measured {c.measured:.3e} vs {c.threshold:.3e}"
            if c.detail:
                line += f" ({c.detail})"
            out.append(line)
        return out


def _gradient_suite(report, rng):
    m_right = dc.Tensor(rng.standard_normal((6, 4)))
    probe = dc.Tensor(rng.standard_normal(6))
    cases = {
        "relu": lambda x: dc.tsum(dc.relu(x)),
        "exp": lambda x: dc.tsum(dc.exp(x)),
        "log": lambda x: dc.tsum(dc.log(dc.exp(x))),
        "matmul": lambda x: dc.tsum(dc.matmul(x, m_right)),
        "hadamard": lambda x: dc.tsum(dc.mul(x, x)),
        "l2_normalize": lambda x: dc.tsum(dc.l2_normalize(x)),
        "softmax": lambda x: dc.tsum(dc.mul(dc.softmax(x), probe)),
        "log_softmax": lambda x: dc.tsum(dc.mul(dc.log_softmax(x), probe)),
        "mean": lambda x: dc.mean(dc.mul(x, x)),
    }
    for name, f in cases.items():
        if name == "matmul":
            x = dc.Tensor(rng.standard_normal((3, 6)), requires_grad=True)
        else:
            data = rng.standard_normal(6)
            data[np.abs(data) < 1e-2] = 0.1  # stay away from the relu kink
            x = dc.Tensor(data, requires_grad=True)
        report.add(f"grad/{name}", dc.finite_diff_check(f, [x]), 1e-4)


def _composite_gradient_check(report):
    err = full_loss_gradient_check(seed=3)
    report.add("grad/full_objective", err, 1e-4)


def full_loss_gradient_check(seed=3, epsilon=1e-5):
    """Finite-difference check of the complete training objective on a toy
    instance, taken w.r.t. every parameter block."""
    config = trainer.TrainConfig(
        data_dir="", epochs=1, seed=seed, feature_dim=8, gcn_dim=8,
    ).validate()
    label = sampler.label_for_class(1)
    video = sampler.gen_synthetic_video(seed, label)
    model = trainer.build_model(config)
    params = list(model.named_params().values())

    def objective(*_):
        rng = np.random.default_rng(seed)
        return trainer.forward_sample(model, config, video, 2, rng).loss

    return dc.finite_diff_check(objective, params, epsilon=epsilon)


def oracle_pairwise(u_rows, v_rows, i, tau, proj):
    """Brute-force double-loop reference for the contrastive pair loss."""
    def g(x):
        h = np.maximum(x @ proj.w1.data + proj.b1.data, 0.0)
        return h @ proj.w2.data + proj.b2.data

    def phi(a, b):
        pa, pb = g(a), g(b)
        pa = pa / np.sqrt((pa ** 2).sum() + 1e-12)
        pb = pb / np.sqrt((pb ** 2).sum() + 1e-12)
        return float(pa @ pb)

    n = u_rows.shape[0]
    num = np.exp(phi(u_rows[i], v_rows[i]) / tau)
    den = 0.0
    for k in range(n):
        den += np.exp(phi(u_rows[i], v_rows[k]) / tau)
        if k != i:
            den += np.exp(phi(u_rows[i], u_rows[k]) / tau)
    return -np.log(num / den)


def oracle_graph_loss(u_rows, v_rows, tau, proj):
    n = u_rows.shape[0]
    total = 0.0
    for i in range(n):
        total += oracle_pairwise(u_rows, v_rows, i, tau, proj)
        total += oracle_pairwise(v_rows, u_rows, i, tau, proj)
    return total / (2 * n)


def _contrastive_suite(report, rng, cases=100):
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(2, 9))
        dim = int(rng.integers(3, 9))
        proj = contrast.init_projection(rng, dim)
        u = rng.standard_normal((n, dim))
        v = rng.standard_normal((n, dim))
        got = float(contrast.graph_loss(dc.Tensor(u), dc.Tensor(v), 0.5, proj).data)
        want = oracle_graph_loss(u, v, 0.5, proj)
        worst = max(worst, abs(got - want))
        i = int(rng.integers(n))
        got_pair = float(contrast.pairwise_loss(dc.Tensor(u), dc.Tensor(v), i, 0.5, proj).data)
        worst = max(worst, abs(got_pair - oracle_pairwise(u, v, i, 0.5, proj)))
    report.add("contrast/oracle_equivalence", worst, 1e-10)


def view_statistics(p_r, p_m, draws=10_000, n=6, f=32, seed=123):
    """Empirical edge-removal and feature-mask rates over many view draws."""
    rng = np.random.default_rng(seed)
    g = tgraph.build_chain_graph(dc.Tensor(rng.standard_normal((n, f))))
    total_edges = (n - 1) * draws
    removed = masked = 0
    for _ in range(draws):
        view = tgraph.generate_view(g, p_r, p_m, rng)
        removed += (n - 1) - np.triu(view.adjacency).sum()
        masked += int((np.all(view.features.data == 0.0, axis=0)).sum())
    return removed / total_edges, masked / (f * draws)


def _view_suite(report):
    edge_rate, mask_rate = view_statistics(0.2, 0.1)
    report.add("views/edge_removal_rate", abs(edge_rate - 0.2), 0.02,
               detail=f"rate {edge_rate:.4f} vs nominal 0.2")
    report.add("views/feature_mask_rate", abs(mask_rate - 0.1), 0.02,
               detail=f"rate {mask_rate:.4f} vs nominal 0.1")
    rng = np.random.default_rng(9)
    g = tgraph.build_chain_graph(dc.Tensor(rng.standard_normal((5, 8))))
    clean = tgraph.generate_view(g, 0.0, 0.0, rng, 2)
    identical = (np.array_equal(clean.adjacency, g.adjacency)
                 and np.array_equal(clean.features.data, g.features.data))
    report.add("views/clean_view_identity", 0.0 if identical else 1.0, 0.0)


def _determinism_suite(report, rng):
    config = trainer.TrainConfig(seed=11, feature_dim=8, gcn_dim=8).validate()
    video = sampler.gen_synthetic_video(5, sampler.label_for_class(0))
    model = trainer.build_model(config)
    values = [float(trainer.forward_sample(model, config, video, 1,
                                           np.random.default_rng(3)).loss.data)
              for _ in range(2)]
    report.add("determinism/forward_repeat", abs(values[0] - values[1]), 0.0)


def verify_all(seed=0):
    """Run every verification suite; returns a VerificationReport."""
    report = VerificationReport()
    rng = np.random.default_rng(seed)
    _gradient_suite(report, rng)
    _composite_gradient_check(report)
    _contrastive_suite(report, rng)
    _view_suite(report)
    _determinism_suite(report, rng)
    return report


def monotone_topk(queries, gallery, ks=(1, 5, 10, 20, 50)):
    accs = [topk_accuracy(queries, gallery, k) for k in ks]
    return accs, all(b >= a for a, b in zip(accs, accs[1:]))


def chance_level(n):
    return 1.0 / len(list(itertools.permutations(range(n))))
