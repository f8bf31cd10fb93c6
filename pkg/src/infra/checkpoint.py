"""
Checkpoint storage: policy and value networks with their Adam states in one
`.npz` file, plus a JSON metadata record (network specs, encoder, optimizer
counters, RNG state, config hash, iteration). Writes go to a temp file that is
renamed into place, so an interrupted save never clobbers the previous file.
"""
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from src.ai_engine.policy import EncoderConfig, PolicyParams, ValueParams
from src.infra.errors import CheckpointError
from src.infra.logger import logger
from src.nn.network import Network, NetworkSpec
from src.nn.optim import OptimizerState

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    policy: PolicyParams
    value: Optional[ValueParams]
    meta: dict = field(default_factory=dict)

    @property
    def iteration(self) -> int:
        return int(self.meta.get("iteration", 0))

    def rng(self) -> Optional[np.random.Generator]:
        state = self.meta.get("rng_state")
        if state is None:
            return None
        rng = np.random.default_rng()
        rng.bit_generator.state = state
        return rng


def _optimizer_meta(opt: Optional[OptimizerState]):
    if opt is None:
        return None
    return {"lr": opt.lr, "beta1": opt.beta1, "beta2": opt.beta2, "eps": opt.eps,
            "decay": opt.decay, "step": opt.step}


def _pack(prefix: str, params, arrays: dict, meta: dict) -> None:
    meta[prefix] = {"spec": params.network.spec.to_dict(), "optimizer": _optimizer_meta(params.optimizer)}
    if isinstance(params, ValueParams):
        meta[prefix]["return_scale"] = params.return_scale
    for name, value in params.network.params.items():
        arrays[f"{prefix}/param/{name}"] = value
    if params.optimizer is not None:
        for name in params.network.params:
            arrays[f"{prefix}/m/{name}"] = params.optimizer.m[name]
            arrays[f"{prefix}/v/{name}"] = params.optimizer.v[name]


def _unpack(prefix: str, data, meta: dict, encoder: EncoderConfig, cls):
    spec = NetworkSpec.from_dict(meta[prefix]["spec"])
    net = Network(spec, 0)
    try:
        net.set_params({name: data[f"{prefix}/param/{name}"] for name in net.params})
        opt_meta = meta[prefix]["optimizer"]
        opt = None
        if opt_meta is not None:
            opt = OptimizerState(
                **opt_meta,
                m={name: data[f"{prefix}/m/{name}"] for name in net.params},
                v={name: data[f"{prefix}/v/{name}"] for name in net.params},
            )
    except KeyError as e:
        raise CheckpointError(f"checkpoint is missing array {e}")
    if cls is ValueParams:
        return cls(net, encoder, opt, return_scale=float(meta[prefix].get("return_scale", 1.0)))
    return cls(net, encoder, opt)


def save_checkpoint(path, policy: PolicyParams, value: Optional[ValueParams] = None, *,
                    iteration: int = 0, config_hash: str = "", seed: int = 0,
                    rng: Optional[np.random.Generator] = None, extra: Optional[dict] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: dict[str, np.ndarray] = {}
    meta = {
        "format": FORMAT_VERSION,
        "iteration": iteration,
        "config_hash": config_hash,
        "seed": seed,
        "encoder": policy.encoder.to_dict(),
        "rng_state": rng.bit_generator.state if rng is not None else None,
        "extra": extra or {},
    }
    _pack("policy", policy, arrays, meta)
    if value is not None:
        _pack("value", value, arrays, meta)
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))

    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        np.savez(f, **arrays)
    os.replace(tmp, path)
    logger.info(f"💾 Checkpoint saved: {path} (iteration {iteration})")
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta.get("format") != FORMAT_VERSION:
                raise CheckpointError(f"checkpoint {path} has unsupported format {meta.get('format')}")
            encoder = EncoderConfig.from_dict(meta["encoder"])
            policy = _unpack("policy", data, meta, encoder, PolicyParams)
            value = _unpack("value", data, meta, encoder, ValueParams) if "value" in meta else None
    except (OSError, ValueError, KeyError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}")
    return Checkpoint(policy, value, meta)
