import os
import sys
import time
from pathlib import Path
from typing import List, Optional, TypedDict

import numpy as np
import pandas as pd
from langgraph.graph import END, StateGraph

sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "../..")))

from src.ai_engine.policy import PolicyParams, ValueParams, build_networks
from src.ai_engine.ppo import (
    Dataset,
    PolicyUpdateStats,
    collect_rollouts,
    compute_advantages,
    compute_returns,
    fit_value,
    update_policy,
)
from src.ai_engine.schemas import TrainConfig
from src.env.pattern import RewardSpec, TrafficPattern
from src.evaluate import evaluate_policy
from src.infra.checkpoint import save_checkpoint
from src.infra.errors import NonFiniteError
from src.infra.logger import logger

METRICS_COLUMNS = ["iteration", "mean_fulfilled_fraction", "mean_episode_reward", "surrogate_loss",
                   "value_loss", "approx_kl", "lr", "clip", "config_hash", "seed"]
TIMINGS_COLUMNS = ["iteration", "wall_seconds", "config_hash", "seed"]
NODES_PER_ITERATION = 6


# --- State Definition ---
class TrainingState(TypedDict, total=False):
    iteration: int                 # j of the iteration in flight (1-based)
    started: float
    dataset: Optional[Dataset]
    value_loss: float
    update: Optional[PolicyUpdateStats]
    history: List[dict]
    timings: List[dict]


# --- Nodes ---
class TrainingNodes:
    def __init__(self, cfg: TrainConfig, pattern: TrafficPattern, rewards: RewardSpec,
                 policy: PolicyParams, value: ValueParams, rng: np.random.Generator):
        self.cfg = cfg
        self.pattern = pattern
        self.rewards = rewards
        self.policy = policy
        self.value = value
        self.rng = rng

    def rollout_node(self, state: TrainingState):
        j = state.get("iteration", 0) + 1
        logger.info(f"🔹 NODE: Rollout (iteration {j}/{self.cfg.iterations})")
        started = time.perf_counter()
        dataset = collect_rollouts(self.policy, self.pattern, self.rewards, self.cfg.episodes,
                                   self.cfg.seed, iteration=j, workers=self.cfg.workers)
        return {"iteration": j, "dataset": dataset, "started": started}

    def returns_node(self, state: TrainingState):
        logger.info("🔹 NODE: Returns")
        return {"dataset": compute_returns(state["dataset"])}

    def value_fit_node(self, state: TrainingState):
        logger.info("🔹 NODE: Value fit")
        self.value, loss = fit_value(self.value, state["dataset"], self.cfg, self.rng)
        return {"value_loss": loss}

    def advantages_node(self, state: TrainingState):
        logger.info("🔹 NODE: Advantages")
        dataset = compute_advantages(self.value, state["dataset"], self.cfg.normalize_advantages)
        return {"dataset": dataset}

    def policy_update_node(self, state: TrainingState):
        j = state["iteration"]
        lr, clip = self.cfg.policy_lr_at(j), self.cfg.clip_at(j)
        logger.info(f"🔹 NODE: Policy update (lr={lr:.3g}, clip={clip:.3g})")
        stats = update_policy(self.policy, state["dataset"], self.cfg, lr, clip, self.rng)
        return {"update": stats}


# --- Routing ---
def route_iteration(state: TrainingState, iterations: int):
    if state["iteration"] >= iterations:
        return "end"
    return "continue"


# --- Orchestrator ---
class TrainingOrchestrator:
    """Runs the PPO policy-iteration loop as a cyclic graph and writes its artifacts."""

    def __init__(self, cfg: TrainConfig, pattern: TrafficPattern, rewards: RewardSpec, out_dir,
                 config_hash: str = "", policy: Optional[PolicyParams] = None,
                 value: Optional[ValueParams] = None):
        self.cfg = cfg
        self.pattern = pattern
        self.rewards = rewards
        self.config_hash = config_hash
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        if policy is None or value is None:
            policy, value = build_networks(pattern, cfg.embedding_dim, cfg.hidden_sizes, cfg.activation,
                                           seed=cfg.seed, passenger_scale=cfg.passenger_scale,
                                           return_scale=cfg.return_scale)
        # minibatch shuffles draw from their own stream, disjoint from the per-episode streams
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(2 ** 32 - 1,)))
        self.nodes = TrainingNodes(cfg, pattern, rewards, policy, value, rng)

    @property
    def policy(self) -> PolicyParams:
        return self.nodes.policy

    @property
    def value(self) -> ValueParams:
        return self.nodes.value

    @property
    def metrics_path(self) -> Path:
        return self.out_dir / "metrics.csv"

    @property
    def checkpoint_path(self) -> Path:
        """Latest checkpoint; overwritten every iteration."""
        return self.out_dir / "checkpoint.npz"

    def iteration_checkpoint_path(self, j: int) -> Path:
        return self.out_dir / f"checkpoint_{j:03d}.npz"

    def report_node(self, state: TrainingState):
        j, dataset, stats = state["iteration"], state["dataset"], state["update"]
        fractions = dataset.fulfilled_fractions()
        if np.any(dataset.requests == 0):
            logger.warning("⚠️ Episode without requests counted as fully served")
        mean_fraction = float(fractions.mean())
        if self.cfg.fresh_eval_episodes:
            mean_fraction = evaluate_policy(
                self.policy, self.pattern, self.rewards, self.cfg.fresh_eval_episodes, self.cfg.seed,
                iteration=j, workers=self.cfg.workers, first_episode=self.cfg.episodes,
            ).mean

        row = {
            "iteration": j,
            "mean_fulfilled_fraction": mean_fraction,
            "mean_episode_reward": float(dataset.episode_reward.mean()),
            "surrogate_loss": stats.surrogate,
            "value_loss": state["value_loss"],
            "approx_kl": stats.approx_kl,
            "lr": self.cfg.policy_lr_at(j),
            "clip": self.cfg.clip_at(j),
            "config_hash": self.config_hash,
            "seed": self.cfg.seed,
        }
        history = state.get("history", []) + [row]
        timings = state.get("timings", []) + [{
            "iteration": j,
            "wall_seconds": time.perf_counter() - state["started"],
            "config_hash": self.config_hash,
            "seed": self.cfg.seed,
        }]

        pd.DataFrame(history, columns=METRICS_COLUMNS).to_csv(self.metrics_path, index=False, float_format="%.12g")
        pd.DataFrame(timings, columns=TIMINGS_COLUMNS).to_csv(self.out_dir / "timings.csv", index=False,
                                                              float_format="%.3f")
        for path in (self.iteration_checkpoint_path(j), self.checkpoint_path):
            save_checkpoint(path, self.policy, self.value, iteration=j, config_hash=self.config_hash,
                            seed=self.cfg.seed, rng=self.nodes.rng)

        logger.info(
            f"✅ Iteration {j}: fulfilled={mean_fraction:.4f} reward={row['mean_episode_reward']:.1f} "
            f"value_loss={row['value_loss']:.4g} L={stats.surrogate:.4g} kl={stats.approx_kl:.4f} "
            f"lr={row['lr']:.3g} clip={row['clip']:.3g} steps={stats.steps}"
            + (" (early stop)" if stats.stopped_early else "")
        )
        # the dataset is dropped here so it is not carried into the next rollout
        return {"history": history, "timings": timings, "dataset": None}

    def build_graph(self):
        workflow = StateGraph(TrainingState)
        workflow.add_node("rollout", self.nodes.rollout_node)
        workflow.add_node("returns", self.nodes.returns_node)
        workflow.add_node("value_fit", self.nodes.value_fit_node)
        workflow.add_node("advantages", self.nodes.advantages_node)
        workflow.add_node("policy_update", self.nodes.policy_update_node)
        workflow.add_node("report", self.report_node)

        workflow.set_entry_point("rollout")
        workflow.add_edge("rollout", "returns")
        workflow.add_edge("returns", "value_fit")
        workflow.add_edge("value_fit", "advantages")
        workflow.add_edge("advantages", "policy_update")
        workflow.add_edge("policy_update", "report")
        workflow.add_conditional_edges(
            "report",
            lambda s: route_iteration(s, self.cfg.iterations),
            {"continue": "rollout", "end": END},
        )
        return workflow.compile()

    def run(self) -> pd.DataFrame:
        logger.info(
            f"🚀 Training on '{self.pattern.name}': J={self.cfg.iterations}, K={self.cfg.episodes}, "
            f"seed={self.cfg.seed}, {self.policy.network.parameter_count()} policy parameters"
        )
        app = self.build_graph()
        limit = NODES_PER_ITERATION * self.cfg.iterations + 10
        try:
            final_state = app.invoke({"iteration": 0, "history": [], "timings": []}, {"recursion_limit": limit})
        except NonFiniteError as e:
            logger.error(f"❌ Training aborted: {e} (last checkpoint: {self.checkpoint_path})")
            raise
        return pd.DataFrame(final_state["history"], columns=METRICS_COLUMNS)


def train(cfg: TrainConfig, pattern: TrafficPattern, rewards: RewardSpec, out_dir, config_hash: str = ""):
    """Runs J policy iterations; returns (trained policy, metrics frame)."""
    orchestrator = TrainingOrchestrator(cfg, pattern, rewards, out_dir, config_hash)
    metrics = orchestrator.run()
    return orchestrator.policy, metrics
