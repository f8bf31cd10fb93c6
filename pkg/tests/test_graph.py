import numpy as np
import pandas as pd
import pytest

from src.ai_engine.graph import METRICS_COLUMNS, TrainingOrchestrator, route_iteration, train
from src.ai_engine.schemas import TrainConfig
from src.env.pattern import RewardSpec
from src.infra.checkpoint import load_checkpoint


def tiny_config(**overrides) -> TrainConfig:
    base = dict(iterations=2, episodes=2, hidden_sizes=[8], embedding_dim=2, minibatch_size=64,
                policy_lr=1e-3, value_lr=1e-3, seed=3)
    return TrainConfig(**{**base, **overrides})


def test_route_iteration():
    assert route_iteration({"iteration": 1}, 2) == "continue"
    assert route_iteration({"iteration": 2}, 2) == "end"


def test_training_loop_writes_artifacts(tmp_path, small_fleet_toy):
    cfg = tiny_config()
    orchestrator = TrainingOrchestrator(cfg, small_fleet_toy, RewardSpec.constant(small_fleet_toy), tmp_path, "h1")
    metrics = orchestrator.run()

    assert list(metrics.columns) == METRICS_COLUMNS
    assert metrics["iteration"].tolist() == [1, 2]
    assert metrics["mean_fulfilled_fraction"].between(0, 1).all()
    assert np.isfinite(metrics[["surrogate_loss", "value_loss", "approx_kl"]].to_numpy()).all()
    assert (metrics["config_hash"] == "h1").all()
    assert metrics["lr"].tolist() == pytest.approx([cfg.policy_lr_at(1), cfg.policy_lr_at(2)])

    on_disk = pd.read_csv(tmp_path / "metrics.csv")
    assert len(on_disk) == 2
    timings = pd.read_csv(tmp_path / "timings.csv")
    assert timings["iteration"].tolist() == [1, 2]
    assert (timings["config_hash"] == "h1").all()
    assert (timings["seed"] == 3).all()

    ckpt = load_checkpoint(orchestrator.checkpoint_path)
    assert ckpt.iteration == 2
    for name, p in orchestrator.policy.network.params.items():
        assert np.array_equal(ckpt.policy.network.params[name], p)
    for name, p in orchestrator.value.network.params.items():
        assert np.array_equal(ckpt.value.network.params[name], p)


def test_training_is_reproducible(tmp_path, small_fleet_toy):
    rewards = RewardSpec.constant(small_fleet_toy)
    _, first = train(tiny_config(), small_fleet_toy, rewards, tmp_path / "a")
    _, second = train(tiny_config(), small_fleet_toy, rewards, tmp_path / "b")
    pd.testing.assert_frame_equal(first, second)
    assert (tmp_path / "a" / "metrics.csv").read_bytes() == (tmp_path / "b" / "metrics.csv").read_bytes()


def test_fresh_evaluation_episodes(tmp_path, small_fleet_toy):
    cfg = tiny_config(iterations=1, fresh_eval_episodes=2)
    _, metrics = train(cfg, small_fleet_toy, RewardSpec.constant(small_fleet_toy), tmp_path)
    assert 0.0 <= metrics["mean_fulfilled_fraction"].iloc[0] <= 1.0


def test_every_iteration_keeps_its_checkpoint(tmp_path, small_fleet_toy):
    orchestrator = TrainingOrchestrator(tiny_config(), small_fleet_toy, RewardSpec.constant(small_fleet_toy),
                                        tmp_path, "h2")
    orchestrator.run()
    first, second = load_checkpoint(tmp_path / "checkpoint_001.npz"), load_checkpoint(tmp_path / "checkpoint_002.npz")
    assert (first.iteration, second.iteration) == (1, 2)
    latest = load_checkpoint(orchestrator.checkpoint_path)
    for name, p in second.policy.network.params.items():
        assert np.array_equal(latest.policy.network.params[name], p)
    # the policy moves between iterations, so the first file must not be overwritten
    assert any(not np.array_equal(first.policy.network.params[n], p) for n, p in second.policy.network.params.items())
