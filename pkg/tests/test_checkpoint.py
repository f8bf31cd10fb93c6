import numpy as np
import pytest

from src.ai_engine.policy import build_networks
from src.ai_engine.ppo import ensure_optimizer
from src.ai_engine.schemas import TrainConfig
from src.infra.checkpoint import load_checkpoint, save_checkpoint
from src.infra.errors import CheckpointError
from src.nn.optim import adam_step


@pytest.fixture
def trained_pair(small_fleet_toy):
    policy, value = build_networks(small_fleet_toy, embedding_dim=2, hidden_sizes=[8, 4], seed=11)
    opt = ensure_optimizer(policy, 1e-3, TrainConfig())
    rng = np.random.default_rng(0)
    grads = {k: rng.normal(size=v.shape) for k, v in policy.network.params.items()}
    new_params, policy.optimizer = adam_step(policy.network.params, grads, opt)
    policy.network.set_params(new_params)
    return policy, value


def test_round_trip_is_bit_exact(tmp_path, trained_pair):
    policy, value = trained_pair
    rng = np.random.default_rng(123)
    rng.random(7)
    path = save_checkpoint(tmp_path / "ckpt.npz", policy, value, iteration=4, config_hash="abc", seed=9, rng=rng)
    loaded = load_checkpoint(path)

    assert loaded.iteration == 4
    assert loaded.meta["config_hash"] == "abc"
    assert loaded.policy.encoder.to_dict() == policy.encoder.to_dict()
    for name, p in policy.network.params.items():
        assert np.array_equal(loaded.policy.network.params[name], p)
        assert np.array_equal(loaded.policy.optimizer.m[name], policy.optimizer.m[name])
        assert np.array_equal(loaded.policy.optimizer.v[name], policy.optimizer.v[name])
    assert loaded.policy.optimizer.step == 1
    assert loaded.policy.optimizer.decay == policy.optimizer.decay
    assert loaded.value.optimizer is None
    for name, p in value.network.params.items():
        assert np.array_equal(loaded.value.network.params[name], p)
    assert loaded.value.return_scale == value.return_scale == 6.0
    assert np.array_equal(loaded.rng().random(5), rng.random(5))
    assert not (tmp_path / "ckpt.npz.tmp").exists()


def test_policy_only_checkpoint(tmp_path, trained_pair):
    policy, _ = trained_pair
    loaded = load_checkpoint(save_checkpoint(tmp_path / "p.npz", policy))
    assert loaded.value is None
    assert loaded.rng() is None


def test_missing_checkpoint(tmp_path):
    with pytest.raises(CheckpointError, match="does not exist"):
        load_checkpoint(tmp_path / "nope.npz")


def test_garbage_checkpoint(tmp_path):
    path = tmp_path / "bad.npz"
    path.write_bytes(b"not an archive")
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
