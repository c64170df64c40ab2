"""
Worker Tests — Trainer, Inference, Ablation, Benchmarks
=========================================================
Run:
  pytest tests/test_workers.py -v
"""

from __future__ import annotations

import numpy as np
import pytest

import workers.trainer
from errors import InputError
from longmem import advance
from numerics.tensor import DiffGraph, backward
from segnet import (
    AblationFlags,
    ModelConfig,
    ModelParams,
    downsample_mask,
    encode,
    prepare_first_frame,
    start_state,
)
from segnet.model import encoder_params, gru_params
from stgraph import GraphConfig
from vosdata import load_dataset
from vosdata.dataset import Sequence
from workers.ablation import ABLATION_CSV_HEADER, run_ablation, score_predictions
from workers.bench import bench_sgru
from workers.gradcheck import run_gradcheck, toy_config, toy_sequence
from workers.inference import predict_sequence, run_inference
from workers.trainer import EpochLog, TrainConfig, Trainer, clip_loss, clip_start_state


def _tiny_train(**overrides) -> TrainConfig:
    return TrainConfig(**{"lr": 1e-2, "clip_length": 3, "epochs": 1, **overrides})


def _moving_square(frames: int) -> Sequence:
    """8×8 frames, a 4×4 bright square moving one pixel right per frame (wrapping)."""
    rng = np.random.default_rng(11)
    masks = np.zeros((frames, 8, 8), dtype=np.uint8)
    for t in range(frames):
        masks[t, 0:4] = np.roll(np.r_[np.ones(4), np.zeros(4)], t)
    images = np.where(masks > 0, rng.integers(170, 240, masks.shape), rng.integers(20, 100, masks.shape))
    return Sequence(name="square", frames=images.astype(np.uint8), masks=list(masks))


# ═══════════════════════════════════════════════════════════════════════
# Trainer
# ═══════════════════════════════════════════════════════════════════════


class TestTrainer:

    def test_epoch_log_csv(self):
        """epoch 2, lr 0.0025, loss 1.23456789 → '2,0.0025,1.234568'."""
        assert EpochLog(epoch=2, lr=0.0025, mean_loss=1.23456789).csv() == "2,0.0025,1.234568"

    def test_clip_must_fit(self, tiny_model_cfg, tiny_dataset):
        """clip [3, 6) on a 5-frame sequence → InputError."""
        seq = load_dataset(tiny_dataset)[0]
        params = ModelParams.initialize(tiny_model_cfg, 0).constants()
        with pytest.raises(InputError):
            clip_loss(params, seq, 3, 3, tiny_model_cfg, AblationFlags(), 1.0)

    def test_clip_loss_positive(self, tiny_model_cfg, tiny_dataset):
        """2 queries of a 3-frame clip → finite positive summed loss."""
        seq = load_dataset(tiny_dataset)[0]
        params = ModelParams.initialize(tiny_model_cfg, 0).constants()
        loss = clip_loss(params, seq, 1, 3, tiny_model_cfg, AblationFlags(), 1.0).item()
        assert np.isfinite(loss) and loss > 0

    def test_warm_up_advances_through_every_frame_before_the_clip(self, tiny_model_cfg, monkeypatch):
        """clip [5, 7) of 8 frames → the state is advanced 5 times before the first query."""
        calls = []
        original = workers.trainer.advance

        def counting(*args, **kwargs):
            calls.append(args[0].frame)
            return original(*args, **kwargs)

        monkeypatch.setattr(workers.trainer, "advance", counting)
        params = ModelParams.initialize(tiny_model_cfg, 0).constants()
        clip_loss(params, _moving_square(8), 5, 2, tiny_model_cfg, AblationFlags(), 1.0)
        assert calls == [1, 2, 3, 4, 5]

    def test_clip_start_state_matches_inference_chain(self, tiny_model_cfg):
        """start 3 → frame 4, h equal to advancing frames 1…3 by hand."""
        seq = _moving_square(6)
        params = ModelParams.initialize(tiny_model_cfg, 0).constants()
        first, _ = prepare_first_frame(seq.image(0), seq.mask(0), params)
        state = clip_start_state(params, seq, first, 3, tiny_model_cfg, AblationFlags())
        assert state.frame == 4

        expected = start_state(first, tiny_model_cfg)
        for t in range(1, 4):
            features = encode(seq.image(t), encoder_params(params)).features
            expected = advance(expected, features, downsample_mask(seq.mask(t), 4), gru_params(params))
        assert np.array_equal(state.h.data, expected.h.data)

    def test_clip_start_state_without_long_memory(self, tiny_model_cfg):
        """L ablation, start 3 → frame-1 state."""
        seq = _moving_square(6)
        params = ModelParams.initialize(tiny_model_cfg, 0).constants()
        first, _ = prepare_first_frame(seq.image(0), seq.mask(0), params)
        state = clip_start_state(params, seq, first, 3, tiny_model_cfg, AblationFlags(disable_long=True))
        assert state.frame == 1

    @pytest.mark.parametrize("disable_long, zero", [(False, False), (True, True)])
    def test_gate_gradient_only_with_long_memory(self, tiny_model_cfg, disable_long, zero):
        """clip [2, 4): full → ∂loss/∂gru.W ≠ 0; L ablation → exactly 0."""
        graph = DiffGraph()
        params = ModelParams.initialize(tiny_model_cfg, 0).bind(graph)
        loss = clip_loss(params, _moving_square(6), 2, 2, tiny_model_cfg,
                         AblationFlags(disable_long=disable_long), 1.0)
        grad = backward(graph, loss)["gru.W"]
        assert (not grad.any()) == zero

    def test_history_and_callback(self, tiny_model_cfg, tiny_dataset):
        """3 epochs → 3 logs, callback called in order, lr decays."""
        seen = []
        trainer = Trainer(tiny_model_cfg, _tiny_train(epochs=3, lr_decay=0.5), on_epoch=seen.append)
        trainer.fit(load_dataset(tiny_dataset))
        assert [log.epoch for log in seen] == [0, 1, 2]
        assert seen == trainer.history
        assert [log.lr for log in seen] == [1e-2, 5e-3, 2.5e-3]

    def test_loss_decreases_on_tiny_set(self, tiny_model_cfg, tiny_dataset):
        """10 epochs at lr 1e-2 → last mean loss below the first."""
        trainer = Trainer(tiny_model_cfg, _tiny_train(epochs=10))
        trainer.fit(load_dataset(tiny_dataset))
        assert trainer.history[-1].mean_loss < trainer.history[0].mean_loss

    def test_frozen_parameters_untouched(self, tiny_model_cfg, tiny_dataset):
        """S ablation → W1, W2 and the head equal their initial values."""
        init = ModelParams.initialize(tiny_model_cfg, 0)
        trained = Trainer(tiny_model_cfg, _tiny_train(), AblationFlags(disable_short=True)).fit(
            load_dataset(tiny_dataset), init=init
        )
        for name in ("adjacency.W1", "adjacency.W2", "gcn.head"):
            assert np.array_equal(trained.values[name], init.values[name])
        assert not np.array_equal(trained.values["decoder.out"], init.values["decoder.out"])

    def test_batched_steps(self, tiny_model_cfg, tiny_dataset):
        """batch_videos 2 over 2 sequences → one step; result differs from batch 1."""
        dataset = load_dataset(tiny_dataset)
        one = Trainer(tiny_model_cfg, _tiny_train(batch_videos=1)).fit(dataset)
        two = Trainer(tiny_model_cfg, _tiny_train(batch_videos=2)).fit(dataset)
        assert not np.array_equal(one.values["decoder.out"], two.values["decoder.out"])

    def test_single_frame_sequences_skipped(self, tiny_model_cfg):
        """a 1-frame sequence → no clips, loss logged as 0."""
        seq = Sequence(name="one", frames=np.zeros((1, 8, 8), dtype=np.uint8), masks=[np.zeros((8, 8), np.uint8)])
        trainer = Trainer(tiny_model_cfg, _tiny_train())
        trainer.fit([seq])
        assert trainer.history[0].mean_loss == 0.0


# ═══════════════════════════════════════════════════════════════════════
# Inference
# ═══════════════════════════════════════════════════════════════════════


class TestInference:

    def test_first_mask_copied(self, tiny_model_cfg, tiny_dataset):
        """frame 1 of the prediction equals the given mask; all frames predicted."""
        seq = load_dataset(tiny_dataset, masks="first")[0]
        prediction = predict_sequence(seq, ModelParams.initialize(tiny_model_cfg, 0), tiny_model_cfg)
        assert prediction.masks.shape == (5, 8, 8)
        assert np.array_equal(prediction.masks[0], seq.mask(0))
        assert set(np.unique(prediction.masks)) <= {0, 1}
        assert prediction.state.frame == 5

    def test_no_memory_frames(self, tiny_dataset):
        """k = 0 → runs with the query frame alone."""
        cfg = ModelConfig(d=4, graph=GraphConfig(k=0))
        seq = load_dataset(tiny_dataset, masks="first")[0]
        prediction = predict_sequence(seq, ModelParams.initialize(cfg, 0), cfg)
        assert prediction.masks.shape == (5, 8, 8)

    def test_deep_memory(self, tiny_dataset):
        """k = 3 on 5 frames → memory grows 1, 2, 3, 3."""
        cfg = ModelConfig(d=4, graph=GraphConfig(k=3))
        seq = load_dataset(tiny_dataset, masks="first")[0]
        prediction = predict_sequence(seq, ModelParams.initialize(cfg, 0), cfg)
        assert prediction.masks.shape == (5, 8, 8)

    def test_long_memory_disabled_keeps_first_state(self, tiny_model_cfg, tiny_dataset):
        """L ablation → final state is still frame 1's."""
        seq = load_dataset(tiny_dataset, masks="first")[0]
        prediction = predict_sequence(
            seq, ModelParams.initialize(tiny_model_cfg, 0), tiny_model_cfg, AblationFlags(disable_long=True)
        )
        assert prediction.state.frame == 1

    def test_run_inference_layout(self, tiny_model_cfg, tiny_dataset, tmp_path):
        """two sequences → <out>/<seq>/masks/00001..00005.pgm, non-negative timing."""
        seconds = run_inference(
            load_dataset(tiny_dataset, masks="first"), ModelParams.initialize(tiny_model_cfg, 0),
            tiny_model_cfg, tmp_path / "pred",
        )
        assert seconds >= 0.0
        for name in ("alpha", "beta"):
            files = sorted(p.name for p in (tmp_path / "pred" / name / "masks").iterdir())
            assert files == [f"{t:05d}.pgm" for t in range(1, 6)]


# ═══════════════════════════════════════════════════════════════════════
# Ablation, gradient-check fixture, benchmarks
# ═══════════════════════════════════════════════════════════════════════


class TestAblation:

    def test_rows_for_each_variant(self, tiny_model_cfg, tiny_dataset):
        """4 variants, 1 epoch → 4 rows in order, CSV with 4 decimals."""
        dataset = load_dataset(tiny_dataset)
        rows = run_ablation(dataset, dataset, tiny_model_cfg, _tiny_train(), ["full", "S", "L", "W"], tol=1)
        assert [r.variant for r in rows] == ["full", "S", "L", "W"]
        assert ABLATION_CSV_HEADER == "variant,J_mean,F_mean,JF_mean"
        for row in rows:
            fields = row.csv().split(",")
            assert len(fields) == 4
            assert all(len(v.split(".")[1]) == 4 for v in fields[1:])

    def test_in_memory_scores_match_perfect_prediction(self, tiny_model_cfg, tiny_dataset):
        """scores lie in [0, 1] and JF is the mean of J and F."""
        dataset = load_dataset(tiny_dataset)
        report = score_predictions(dataset, ModelParams.initialize(tiny_model_cfg, 0), tiny_model_cfg,
                                   AblationFlags(), tol=None)
        o = report.overall
        assert 0.0 <= o.J_mean <= 1.0 and 0.0 <= o.F_mean <= 1.0
        assert o.JF_mean == pytest.approx((o.J_mean + o.F_mean) / 2)


class TestGradcheckFixture:

    def test_toy_problem(self):
        """2 frames of 8×8, 5×5 square moving right; d=4, k=1, narrow widths."""
        seq = toy_sequence(0)
        assert seq.frames.shape == (2, 8, 8)
        assert all(seq.mask(t).sum() == 25 for t in range(2))
        assert seq.mask(1)[0].tolist() == [0, 1, 1, 1, 1, 1, 0, 0]
        cfg = toy_config()
        assert (cfg.d, cfg.graph.k) == (4, 1)
        assert (cfg.encoder_widths, cfg.decoder_widths) == ((4, 8), (8, 4))

    def test_three_frame_toy(self):
        """frames=3 → 3×8×8; frames 1 and 2 match the two-frame toy."""
        seq = toy_sequence(0, frames=3)
        assert seq.frames.shape == (3, 8, 8)
        assert np.array_equal(seq.frames[:2], toy_sequence(0).frames)

    @pytest.mark.parametrize("frames", [1, 5])
    def test_toy_length_bounds(self, frames):
        """fewer than 2 or more than 4 frames → InputError."""
        with pytest.raises(InputError):
            toy_sequence(0, frames=frames)

    def test_toy_sequence_seeded(self):
        """same seed → same frames."""
        assert np.array_equal(toy_sequence(4).frames, toy_sequence(4).frames)

    def test_two_frame_toy_every_entry(self):
        """two-frame toy, every entry → max relative error ≤ 1e-4."""
        assert run_gradcheck(seed=0, eps=1e-5) <= 1e-4


class TestBench:

    def test_sgru_rate_positive(self):
        """tiny window → positive ops/sec."""
        assert bench_sgru(min_seconds=0.01) > 0
