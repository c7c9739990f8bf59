"""Training loop: optimizer, splits, checkpoints, determinism, resume."""

from dataclasses import replace

import numpy as np
import pytest

import tcgl.diffcore as dc
from tcgl import sampler, trainer

from conftest import small_config


def test_validate_rejects_bad_configs(tmp_path):
    with pytest.raises(ValueError):
        small_config(str(tmp_path), m=5).validate()  # 5 does not divide 16
    with pytest.raises(ValueError):
        small_config(str(tmp_path), gcn_dim=15).validate()
    with pytest.raises(ValueError):
        small_config(str(tmp_path), val_fraction=1.5).validate()
    with pytest.raises(ValueError):
        small_config(str(tmp_path), tau=0.0).validate()
    with pytest.raises(ValueError):
        small_config(str(tmp_path), epochs=0).validate()


def test_decay_epoch_semantics():
    cfg = trainer.TrainConfig(epochs=100)
    assert replace(cfg, lr_decay_epoch=0).decay_epoch() == 101
    assert replace(cfg, lr_decay_epoch=-1).decay_epoch() == 50
    assert replace(cfg, lr_decay_epoch=30).decay_epoch() == 30


def test_sgd_step_matches_hand_rolled_momentum():
    p = dc.Tensor(np.array([1.0, -2.0]), requires_grad=True)
    params = {"w": p}
    state = {"w": np.zeros(2)}
    g1 = np.array([0.5, 0.5])
    g2 = np.array([-1.0, 0.25])
    lr, mu, wd = 0.1, 0.9, 0.01

    ref_p, ref_v = np.array([1.0, -2.0]), np.zeros(2)
    for g in (g1, g2):
        ref_v = mu * ref_v + (g + wd * ref_p)
        ref_p = ref_p - lr * ref_v

    trainer.sgd_step(params, {"w": g1}, state, lr, mu, wd)
    trainer.sgd_step(params, {"w": g2}, state, lr, mu, wd)
    assert np.allclose(p.data, ref_p, atol=1e-12)
    assert np.allclose(state["w"], ref_v, atol=1e-12)


def test_sgd_step_skips_weight_decay_for_biases():
    b = dc.Tensor(np.array([10.0]), requires_grad=True)
    state = {"head.b_out": np.zeros(1)}
    trainer.sgd_step({"head.b_out": b}, {"head.b_out": np.zeros(1)},
                     state, 0.1, 0.0, 1.0)
    # With decay active the bias would have shrunk; it must stay put.
    assert b.data[0] == pytest.approx(10.0)


def test_sgd_step_rejects_non_finite_gradients():
    w = dc.Tensor(np.ones(2), requires_grad=True)
    with pytest.raises(FloatingPointError):
        trainer.sgd_step({"w": w}, {"w": np.array([np.nan, 0.0])},
                         {"w": np.zeros(2)}, 0.1, 0.9, 0.0)


def test_split_is_deterministic_partition(small_dataset):
    manifest, _ = sampler.load_dataset(small_dataset)
    cfg = small_config(str(small_dataset))
    a = trainer.split_train_val(manifest, cfg)
    b = trainer.split_train_val(manifest, cfg)
    assert a == b
    train_idx, val_idx = a
    assert sorted(train_idx + val_idx) == list(range(len(manifest["videos"])))
    assert train_idx and val_idx


def test_checkpoint_round_trip(tmp_path, small_dataset):
    cfg = small_config(str(small_dataset), epochs=1)
    model = trainer.build_model(cfg)
    named = model.named_params()
    ckpt = trainer.Checkpoint(
        params={k: t.data.copy() for k, t in named.items()},
        momentum={k: np.full_like(t.data, 0.25) for k, t in named.items()},
        epoch=3, config=cfg, best_val_loss=1.5)
    trainer.save_checkpoint(ckpt, tmp_path / "ck")
    loaded = trainer.load_checkpoint(tmp_path / "ck")
    assert loaded.epoch == 3
    assert loaded.best_val_loss == pytest.approx(1.5)
    assert loaded.config == cfg
    for k in named:
        assert np.array_equal(loaded.params[k], ckpt.params[k])
        assert np.array_equal(loaded.momentum[k], ckpt.momentum[k])
    restored = trainer.restore_model(loaded)
    for k, t in restored.named_params().items():
        assert np.array_equal(t.data, ckpt.params[k])


def test_load_checkpoint_rejects_non_checkpoint(tmp_path):
    from tcgl import blobio
    blobio.save_arrays(tmp_path / "g", {"x": np.ones(2)}, meta={"kind": "gallery"})
    with pytest.raises(ValueError):
        trainer.load_checkpoint(tmp_path / "g")


def test_training_is_bit_deterministic(small_dataset):
    cfg = small_config(str(small_dataset))
    ckpt_a, rows_a = trainer.train(cfg)
    ckpt_b, rows_b = trainer.train(cfg)
    assert rows_a == rows_b
    for k in ckpt_a.params:
        assert np.array_equal(ckpt_a.params[k], ckpt_b.params[k])
        assert np.array_equal(ckpt_a.momentum[k], ckpt_b.momentum[k])


def test_resume_after_interruption_reproduces_run(tmp_path, small_dataset):
    data_dir = str(small_dataset)
    cfg = small_config(data_dir, epochs=4, out_dir=str(tmp_path / "full"))
    _, rows_full = trainer.train(cfg)

    class Crash(RuntimeError):
        pass

    def crashing_log(row):
        if row["epoch"] == 2:
            raise Crash

    cfg_part = replace(cfg, out_dir=str(tmp_path / "part"))
    with pytest.raises(Crash):
        trainer.train(cfg_part, log=crashing_log)

    resumed_rows = []
    _, rows_out = trainer.train(cfg_part,
                                resume_from=str(tmp_path / "part" / "last"),
                                log=resumed_rows.append)
    assert [r["epoch"] for r in resumed_rows] == [2, 3]
    assert resumed_rows == rows_full[2:]
    assert rows_out[-1] == rows_full[-1]


def test_resume_rejects_different_config(tmp_path, small_dataset):
    data_dir = str(small_dataset)
    cfg = small_config(data_dir, epochs=2, out_dir=str(tmp_path / "run"))
    trainer.train(cfg)
    other = replace(cfg, lr=0.5)
    with pytest.raises(ValueError):
        trainer.train(other, resume_from=str(tmp_path / "run" / "last"))


def test_val_permutation_id_fixed_per_video():
    ids = [trainer.val_permutation_id(7, i, 3) for i in range(50)]
    assert ids == [trainer.val_permutation_id(7, i, 3) for i in range(50)]
    assert all(0 <= pid < sampler.num_permutations(3) for pid in ids)
    assert len(set(ids)) > 1


def test_write_metrics_produces_csv(tmp_path):
    rows = [{"epoch": 1, "total_loss": 2.0, "graph_loss": 1.5,
             "order_loss": 0.5, "train_acc": 0.5, "val_acc": 0.25,
             "val_loss": 2.1}]
    path = tmp_path / "metrics.csv"
    trainer.write_metrics(path, rows)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",")[0] == "epoch"
    assert lines[1].startswith("1,2.0,1.5,0.5,0.5,0.25")
