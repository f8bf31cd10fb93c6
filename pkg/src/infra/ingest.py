"""
Pattern-file loading.

A pattern file is JSON: network sizes, a list of traffic blocks
(t_start, t_end, lam, P, tau) covering 1..H, optional reward tables and an
optional `train` block of TrainConfig defaults. Presets are pattern files kept in
the presets directory and addressed by file stem.
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from src.env.pattern import RewardBlock, RewardSpec, TrafficBlock, TrafficPattern
from src.infra.errors import PatternError
from src.infra.logger import logger
from src.infra.settings import settings

# --- Pydantic Models (file schema) ---


class BlockFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_start: int = Field(..., ge=1)
    t_end: int = Field(..., ge=1)
    lam: List[float]
    P: List[List[float]]
    tau: List[List[int]]


class RewardBlockFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t_start: int = Field(..., ge=1)
    t_end: int = Field(..., ge=1)
    match: Union[float, List[List[List[float]]]] = Field(1.0, description="c^f(o, d, eta), scalar or (R, R, L+1).")
    empty_cost: Union[float, List[List[float]]] = Field(0.0, description="c^e(o, d), scalar or (R, R).")


class RewardFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    match: float = 1.0
    empty_cost: float = 0.0
    blocks: Optional[List[RewardBlockFile]] = None


class PatternFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: str
    R: int = Field(..., ge=1)
    H: int = Field(..., ge=1)
    L: int = Field(..., ge=0)
    N: int = Field(..., ge=1)
    demand_scale: float = Field(1.0, gt=0, description="Multiplier applied to every arrival rate.")
    blocks: List[BlockFile]
    rewards: RewardFile = Field(default_factory=RewardFile)
    train: dict[str, Any] = Field(default_factory=dict)


@dataclass
class PatternBundle:
    pattern: TrafficPattern
    rewards: RewardSpec
    train: dict = field(default_factory=dict)
    source: Optional[Path] = None


def _array(values, shape, what: str, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(shape, float(arr))
    if arr.shape != shape:
        raise PatternError(f"{name}: {what} has shape {arr.shape}, expected {shape}")
    return arr


def _build(spec: PatternFile) -> PatternBundle:
    R, L = spec.R, spec.L
    blocks = []
    for b in spec.blocks:
        lam = _array(b.lam, (R,), "lam", spec.name) * spec.demand_scale
        P = _array(b.P, (R, R), "P", spec.name)
        tau = _array(b.tau, (R, R), "tau", spec.name).astype(np.int64)
        blocks.append(TrafficBlock(b.t_start, b.t_end, lam, P, tau))
    pattern = TrafficPattern(spec.name, R, spec.H, L, spec.N, tuple(blocks))

    if spec.rewards.blocks:
        reward_blocks = [
            RewardBlock(
                rb.t_start, rb.t_end,
                _array(rb.match, (R, R, L + 1), "match reward", spec.name),
                _array(rb.empty_cost, (R, R), "empty-route cost", spec.name),
            )
            for rb in spec.rewards.blocks
        ]
        rewards = RewardSpec.from_blocks(reward_blocks, spec.H)
    else:
        rewards = RewardSpec.constant(pattern, spec.rewards.match, spec.rewards.empty_cost)
    return PatternBundle(pattern, rewards, dict(spec.train))


def load_pattern_bundle(path) -> PatternBundle:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise PatternError(f"pattern file {path} does not exist")
    except json.JSONDecodeError as e:
        raise PatternError(f"pattern file {path} is not valid JSON: {e}")
    try:
        spec = PatternFile.model_validate(raw)
    except ValidationError as e:
        raise PatternError(f"pattern file {path} failed schema validation:\n{e}")
    bundle = _build(spec)
    bundle.source = path
    logger.info(f"✅ Loaded pattern '{bundle.pattern.name}' (R={spec.R}, H={spec.H}, L={spec.L}, N={spec.N}) from {path}")
    return bundle


def load_traffic_pattern(path) -> TrafficPattern:
    return load_pattern_bundle(path).pattern


def list_presets(presets_dir: Optional[Path] = None) -> list[str]:
    presets_dir = Path(presets_dir or settings.presets_dir)
    if not presets_dir.is_dir():
        return []
    return sorted(p.stem for p in presets_dir.glob("*.json"))


def resolve_preset(name: str, presets_dir: Optional[Path] = None) -> Path:
    presets_dir = Path(presets_dir or settings.presets_dir)
    path = presets_dir / f"{name}.json"
    if not path.exists():
        available = ", ".join(list_presets(presets_dir)) or "none"
        raise PatternError(f"unknown preset '{name}' (available: {available})")
    return path


def dump_pattern(pattern: TrafficPattern, rewards: RewardSpec, path, train: Optional[dict] = None) -> Path:
    """Write a pattern file that loads back to the same tables."""
    payload = {
        "name": pattern.name,
        "R": pattern.R, "H": pattern.H, "L": pattern.L, "N": pattern.N,
        "blocks": [
            {"t_start": b.t_start, "t_end": b.t_end, "lam": b.lam.tolist(), "P": b.P.tolist(), "tau": b.tau.tolist()}
            for b in pattern.blocks
        ],
        "rewards": {
            "blocks": [
                {"t_start": b.t_start, "t_end": b.t_end, "match": b.match.tolist(), "empty_cost": b.empty_cost.tolist()}
                for b in rewards.blocks
            ]
        },
        "train": train or {},
    }
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2))
    return path
