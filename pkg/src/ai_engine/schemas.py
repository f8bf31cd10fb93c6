import hashlib
import json
from pathlib import Path
from typing import Any, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

# --- Pydantic Models (Strict Schema) ---


class TrainConfig(BaseModel):
    """Hyper-parameters of the PPO loop; defaults reproduce the 5-region experiment."""
    model_config = ConfigDict(extra="forbid")

    iterations: int = Field(75, ge=1, description="J, number of policy iterations.")
    episodes: int = Field(300, ge=1, description="K, episodes simulated per iteration.")
    policy_lr: float = Field(0.00005, gt=0, description="Initial learning rate beta for the policy NN.")
    value_lr: float = Field(0.0001, gt=0, description="Learning rate for the value NN.")
    clip: float = Field(0.2, gt=0, lt=1, description="Initial clipping epsilon.")
    policy_passes: int = Field(3, ge=1, description="Passes over the data per policy update.")
    value_passes: int = Field(10, ge=1, description="Passes over the data per value fit.")
    kl_target: float = Field(0.012, gt=0, description="Approximate-KL level that stops policy passes early.")
    embedding_l2: float = Field(0.005, ge=0, description="L2 factor on embedding layers.")
    minibatch_size: int = Field(4096, ge=1)
    seed: int = Field(0, ge=0, description="Master seed for networks, rollouts and shuffles.")
    embedding_dim: int = Field(6, ge=0)
    hidden_sizes: List[int] = Field(default_factory=lambda: [399, 44, 5])
    activation: Literal["relu", "tanh"] = "relu"
    adam_beta1: float = Field(0.9, ge=0, lt=1)
    adam_beta2: float = Field(0.999, ge=0, lt=1)
    adam_eps: float = Field(1e-8, gt=0)
    lr_floor: float = Field(0.01, gt=0, description="Floor of the linear decay factor.")
    normalize_advantages: bool = False
    passenger_scale: Optional[float] = Field(None, gt=0, description="Divisor for passenger counts (defaults to N).")
    return_scale: Optional[float] = Field(None, gt=0, description="Divisor for value-net targets (defaults to N).")
    fresh_eval_episodes: int = Field(0, ge=0, description="Extra evaluation episodes per iteration (0 reuses rollouts).")
    workers: int = Field(1, ge=1)

    def policy_lr_at(self, j: int) -> float:
        return max(1.0 - j / self.iterations, self.lr_floor) * self.policy_lr

    def clip_at(self, j: int) -> float:
        return max((1.0 - j / self.iterations) * self.clip, self.lr_floor)


class RunConfig(BaseModel):
    """One CLI invocation, optionally loaded from a JSON file given with --config."""
    model_config = ConfigDict(extra="forbid")

    preset: Optional[str] = None
    pattern: Optional[Path] = None
    train: dict[str, Any] = Field(default_factory=dict)
    out_dir: Path = Path("runs")
    seed: int = Field(0, ge=0, lt=2 ** 64)
    policy: str = "greedy"
    eval_episodes: int = Field(300, ge=1)
    workers: int = Field(1, ge=1)
    plot: bool = True

    @field_validator("policy")
    @classmethod
    def _policy_selector(cls, v: str) -> str:
        if v in ("random", "greedy") or v.startswith("checkpoint:"):
            return v
        raise ValueError("policy must be 'random', 'greedy' or 'checkpoint:PATH'")

    @field_validator("pattern")
    @classmethod
    def _pattern_exists(cls, v: Optional[Path]) -> Optional[Path]:
        if v is not None and not Path(v).exists():
            raise ValueError(f"pattern file {v} does not exist")
        return v


def config_hash(run: RunConfig, train: TrainConfig, pattern_name: str) -> str:
    # output location and parallelism never change results, so they stay out of the hash
    payload = {
        "run": json.loads(run.model_dump_json(exclude={"out_dir", "workers", "plot"})),
        "train": json.loads(train.model_dump_json(exclude={"workers"})),
        "pattern": pattern_name,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
