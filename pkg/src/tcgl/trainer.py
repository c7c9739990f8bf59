"""Joint training loop: SGD with momentum and weight decay over the
combined graph-contrastive and order-prediction objective.

All randomness flows from per-epoch generators derived from (seed, epoch),
so a run is bit-reproducible and a resumed run continues the exact trace
of an uninterrupted one.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import blobio, contrast, diffcore as dc, encoder, orderhead, sampler, tgraph


@dataclass
class TrainConfig:
    data_dir: str = ""
    out_dir: str = ""
    epochs: int = 200
    batch_size: int = 16
    lr: float = 0.001
    lr_decay_epoch: int = 0  # 0 disables the decay; -1 means epochs // 2
    momentum: float = 0.9
    weight_decay: float = 0.0005
    seed: int = 7
    n: int = 3
    m: int = 4
    l: int = 16
    p: int = 8
    tau: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0
    lambda_g: float = 1.0
    lambda_o: float = 1.0
    p_r: float = 0.2
    p_m: float = 0.1
    feature_dim: int = 32
    gcn_dim: int = 32
    val_fraction: float = 0.1

    def validate(self):
        for name in ("epochs", "batch_size", "n", "m", "l", "feature_dim", "gcn_dim"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.p < 0:
            raise ValueError(f"interval p must be non-negative, got {self.p}")
        if self.lr <= 0 or self.momentum < 0 or self.weight_decay < 0:
            raise ValueError("lr must be positive, momentum/weight_decay non-negative")
        if self.tau <= 0:
            raise ValueError(f"temperature must be positive, got {self.tau}")
        if not (0 <= self.p_r <= 1 and 0 <= self.p_m <= 1):
            raise ValueError("p_r and p_m must lie in [0, 1]")
        if self.l % self.m != 0:
            raise ValueError(f"m={self.m} must divide snippet length l={self.l}")
        if self.gcn_dim % 2 != 0:
            raise ValueError(f"gcn_dim must be even for the fusion bottleneck, got {self.gcn_dim}")
        if not 0 < self.val_fraction < 1:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        return self

    def decay_epoch(self):
        """Epoch at which the learning rate drops by 10x; 0 disables it."""
        if self.lr_decay_epoch == 0:
            return self.epochs + 1
        return self.epochs // 2 if self.lr_decay_epoch < 0 else self.lr_decay_epoch


CONFIG_FIELDS = {f.name for f in fields(TrainConfig)}


@dataclass
class Model:
    enc_snip: encoder.EncoderParams
    enc_frame: encoder.EncoderParams
    gcn_inter: tgraph.GcnParams
    gcn_intra: tgraph.GcnParams
    proj_inter: contrast.ProjectionParams
    proj_intra: contrast.ProjectionParams
    order: orderhead.OrderHeadParams

    def named_params(self):
        out = {}
        for block_name in ("enc_snip", "enc_frame"):
            block = getattr(self, block_name)
            out[f"{block_name}.weight"] = block.weight
            out[f"{block_name}.bias"] = block.bias
        for block_name in ("gcn_inter", "gcn_intra"):
            block = getattr(self, block_name)
            out[f"{block_name}.weight"] = block.weight
            if block.bias is not None:
                out[f"{block_name}.bias"] = block.bias
        for block_name in ("proj_inter", "proj_intra"):
            block = getattr(self, block_name)
            for leaf in ("w1", "b1", "w2", "b2"):
                out[f"{block_name}.{leaf}"] = getattr(block, leaf)
        for leaf in ("w_fuse", "b_fuse", "w_excite", "b_excite",
                     "w_hidden", "b_hidden", "w_out", "b_out"):
            out[f"order.{leaf}"] = getattr(self.order, leaf)
        return out


@dataclass
class Checkpoint:
    params: dict
    momentum: dict
    epoch: int
    config: TrainConfig
    best_val_loss: float = float("inf")


@dataclass
class SampleResult:
    loss: dc.Tensor
    graph_loss: float
    order_loss: float
    correct: bool


def build_model(config: TrainConfig, channels=1):
    rng = np.random.default_rng(np.random.SeedSequence((config.seed, 11)))
    f, f_out = config.feature_dim, config.gcn_dim
    return Model(
        enc_snip=encoder.init_encoder(rng, config.l, channels, f),
        enc_frame=encoder.init_encoder(rng, config.l // config.m, channels, f),
        gcn_inter=tgraph.init_gcn(rng, f, f_out),
        gcn_intra=tgraph.init_gcn(rng, f, f_out),
        proj_inter=contrast.init_projection(rng, f_out),
        proj_intra=contrast.init_projection(rng, f_out),
        order=orderhead.init_order_head(rng, config.n, f_out),
    )


def forward_sample(model: Model, config: TrainConfig, video, permutation_id, rng):
    """Loss and prediction for one video under one permutation draw."""
    snippets = sampler.sample_snippets(video, config.l, config.p, config.n)
    tup = sampler.shuffle_tuple(snippets, permutation_id)
    chrono_feats = [encoder.encode(s, model.enc_snip) for s in snippets]
    inter_graph = tgraph.build_chain_graph(dc.stack(chrono_feats), kind="inter")
    view1 = tgraph.generate_view(inter_graph, config.p_r, config.p_m, rng, 1)
    view2 = tgraph.generate_view(inter_graph, 0.0, 0.0, rng, 2)
    v_embed = tgraph.gcn_forward(view2, model.gcn_inter)

    use_graph = config.lambda_g != 0 and (config.alpha != 0 or config.beta != 0)
    if use_graph:
        if config.beta != 0:
            u_embed = tgraph.gcn_forward(view1, model.gcn_inter)
            j_inter = contrast.graph_loss(u_embed, v_embed, config.tau, model.proj_inter)
        else:
            j_inter = dc.Tensor(0.0)
        intra_losses = []
        if config.alpha != 0:
            for snippet in snippets:
                frame_feats = [encoder.encode(f, model.enc_frame)
                               for f in sampler.split_framesets(snippet, config.m)]
                g = tgraph.build_chain_graph(dc.stack(frame_feats), kind="intra")
                iv1 = tgraph.generate_view(g, config.p_r, config.p_m, rng, 1)
                iv2 = tgraph.generate_view(g, 0.0, 0.0, rng, 2)
                intra_losses.append(contrast.graph_loss(
                    tgraph.gcn_forward(iv1, model.gcn_intra),
                    tgraph.gcn_forward(iv2, model.gcn_intra),
                    config.tau, model.proj_intra))
        j_graph = contrast.total_graph_loss(intra_losses, j_inter,
                                            config.alpha, config.beta)
    else:
        j_graph = dc.Tensor(0.0)

    perm = tup.permutation()
    shuffled_feats = [v_embed[int(perm[j])] for j in range(config.n)]
    pred, j_order = orderhead.order_head_forward(shuffled_feats, permutation_id,
                                                 model.order)
    loss = orderhead.total_loss(j_graph, j_order, config.lambda_g, config.lambda_o)
    return SampleResult(
        loss=loss,
        graph_loss=float(j_graph.data),
        order_loss=float(j_order.data),
        correct=pred.predicted_id == permutation_id,
    )


def sgd_step(params, grads, state, lr, momentum, weight_decay):
    """Classical momentum: v = mu*v + g + wd*p; p -= lr*v. Biases skip decay."""
    for name, tensor in params.items():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient for {name!r}; step aborted")
        if weight_decay and not name.rsplit(".", 1)[-1].startswith("b"):
            g = g + weight_decay * tensor.data
        state[name] = momentum * state[name] + g
        tensor.data = tensor.data - lr * state[name]


def split_train_val(manifest, config: TrainConfig):
    """Deterministic split by seeded hash of the file name."""
    train_idx, val_idx = [], []
    bucket_count = max(2, round(1.0 / config.val_fraction))
    for i, entry in enumerate(manifest["videos"]):
        digest = hashlib.sha256(f"{config.seed}:{entry['file']}".encode()).digest()
        bucket = int.from_bytes(digest[:4], "little") % bucket_count
        (val_idx if bucket == 0 else train_idx).append(i)
    if not train_idx or not val_idx:
        raise ValueError("split produced an empty train or validation set")
    return train_idx, val_idx


def _epoch_rng(seed, tag, epoch):
    return np.random.default_rng(np.random.SeedSequence((seed, tag, epoch)))


def val_permutation_id(seed, video_index, n):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 5, video_index)))
    return int(rng.integers(sampler.num_permutations(n)))


def _evaluate(model, config, videos, indices):
    """Mean loss and order accuracy over a split with per-video fixed draws."""
    total, correct = 0.0, 0
    for idx in indices:
        rng = np.random.default_rng(np.random.SeedSequence((config.seed, 6, idx)))
        res = forward_sample(model, config, videos[idx],
                             val_permutation_id(config.seed, idx, config.n), rng)
        total += float(res.loss.data)
        correct += res.correct
    return total / len(indices), correct / len(indices)


def save_checkpoint(ckpt: Checkpoint, path):
    arrays = {}
    for name, arr in ckpt.params.items():
        arrays[f"param/{name}"] = arr
    for name, arr in ckpt.momentum.items():
        arrays[f"momentum/{name}"] = arr
    blobio.save_arrays(path, arrays, meta={
        "kind": "checkpoint",
        "epoch": ckpt.epoch,
        "best_val_loss": ckpt.best_val_loss,
        "config": asdict(ckpt.config),
    })


def load_checkpoint(path):
    arrays, meta = blobio.load_arrays(path)
    if meta.get("kind") != "checkpoint":
        raise ValueError(f"{path}: not a checkpoint directory")
    unknown = set(meta["config"]) - CONFIG_FIELDS
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    config = TrainConfig(**meta["config"]).validate()
    params = {name[len("param/"):]: arr for name, arr in arrays.items()
              if name.startswith("param/")}
    momentum = {name[len("momentum/"):]: arr for name, arr in arrays.items()
                if name.startswith("momentum/")}
    if set(params) != set(momentum):
        raise ValueError(f"{path}: parameter and momentum names disagree")
    return Checkpoint(params=params, momentum=momentum, epoch=int(meta["epoch"]),
                      config=config, best_val_loss=float(meta["best_val_loss"]))


def restore_model(ckpt: Checkpoint, channels=1):
    model = build_model(ckpt.config, channels)
    named = model.named_params()
    if set(named) != set(ckpt.params):
        raise ValueError("checkpoint parameter names do not match this configuration")
    for name, tensor in named.items():
        if tensor.data.shape != ckpt.params[name].shape:
            raise ValueError(f"shape mismatch for {name!r} while restoring checkpoint")
        tensor.data = ckpt.params[name].copy()
    return model


def train(config: TrainConfig, resume_from=None, log=None):
    """Run the full loop; returns (best Checkpoint, metric rows).

    Writes metrics.csv plus best/ and last/ checkpoints under out_dir
    when it is set. ``resume_from`` continues a saved last/ checkpoint.
    """
    config.validate()
    manifest, videos = sampler.load_dataset(config.data_dir)
    channels = videos[0].channels
    min_frames = config.n * config.l + (config.n - 1) * config.p
    for v in videos:
        if v.frames < min_frames:
            raise ValueError(
                f"dataset video has {v.frames} frames, config needs {min_frames}"
            )
    train_idx, val_idx = split_train_val(manifest, config)

    if resume_from is not None:
        ckpt = load_checkpoint(resume_from)
        if asdict(ckpt.config) != asdict(config):
            raise ValueError("resume checkpoint was trained with a different config")
        model = restore_model(ckpt, channels)
        state = {k: v.copy() for k, v in ckpt.momentum.items()}
        start_epoch = ckpt.epoch + 1
        best_val = ckpt.best_val_loss
    else:
        model = build_model(config, channels)
        state = {k: np.zeros_like(t.data) for k, t in model.named_params().items()}
        start_epoch = 0
        best_val = float("inf")

    params = model.named_params()
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    best_ckpt = None

    for epoch in range(start_epoch, config.epochs):
        lr = config.lr * (0.1 if epoch >= config.decay_epoch() else 1.0)
        rng = _epoch_rng(config.seed, 1, epoch)
        order = rng.permutation(len(train_idx))
        sums = np.zeros(3)
        correct = 0
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start:batch_start + config.batch_size]
            grads = {k: np.zeros_like(t.data) for k, t in params.items()}
            for j in batch:
                idx = train_idx[int(j)]
                perm_id = int(rng.integers(sampler.num_permutations(config.n)))
                res = forward_sample(model, config, videos[idx], perm_id, rng)
                for tensor in params.values():
                    tensor.grad = None
                dc.backward(res.loss)
                for name, tensor in params.items():
                    if tensor.grad is not None:
                        grads[name] += tensor.grad
                sums += (float(res.loss.data), res.graph_loss, res.order_loss)
                correct += res.correct
            for name in grads:
                grads[name] /= len(batch)
            sgd_step(params, grads, state, lr, config.momentum, config.weight_decay)

        n_train = len(train_idx)
        val_loss, val_acc = _evaluate(model, config, videos, val_idx)
        row = {
            "epoch": epoch,
            "total_loss": sums[0] / n_train,
            "graph_loss": sums[1] / n_train,
            "order_loss": sums[2] / n_train,
            "train_acc": correct / n_train,
            "val_acc": val_acc,
            "val_loss": val_loss,
        }
        rows.append(row)
        if log:
            log(row)

        ckpt = Checkpoint(
            params={k: t.data.copy() for k, t in params.items()},
            momentum={k: v.copy() for k, v in state.items()},
            epoch=epoch,
            config=config,
            best_val_loss=best_val,
        )
        if val_loss < best_val:
            best_val = val_loss
            ckpt.best_val_loss = best_val
            best_ckpt = ckpt
            if out_dir:
                save_checkpoint(ckpt, out_dir / "best")
        ckpt.best_val_loss = best_val
        if out_dir:
            save_checkpoint(ckpt, out_dir / "last")

    if best_ckpt is None:
        best_ckpt = ckpt
    if out_dir:
        write_metrics(out_dir / "metrics.csv", rows)
    return best_ckpt, rows


def write_metrics(path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "total_loss", "graph_loss", "order_loss",
                         "train_acc", "val_acc"])
        for row in rows:
            writer.writerow([row["epoch"], row["total_loss"], row["graph_loss"],
                             row["order_loss"], row["train_acc"], row["val_acc"]])
