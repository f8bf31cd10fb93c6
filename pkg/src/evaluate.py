"""
Policy evaluation and reporting: fulfilled-request statistics over seeded
episodes, the summary CSV row, and the learning-curve figure.
"""
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd
import plotly.graph_objects as go

from src.env.pattern import RewardSpec, TrafficPattern
from src.infra.logger import log_latency, logger
from src.sdm.engine import Policy
from src.worker import EpisodeJob, run_episodes

# best fulfilled fraction of the fluid-based lookahead policy on the five-region network
LOOKAHEAD_REFERENCE = 0.84

SUMMARY_COLUMNS = ["policy", "episodes", "mean_fulfilled_fraction", "stderr", "mean_episode_reward",
                   "zero_demand_episodes", "config_hash", "seed"]


@dataclass
class EvaluationSummary:
    fractions: np.ndarray
    rewards: np.ndarray
    requests: np.ndarray

    @property
    def episodes(self) -> int:
        return len(self.fractions)

    @property
    def mean(self) -> float:
        return float(np.mean(self.fractions))

    @property
    def stderr(self) -> float:
        if self.episodes < 2:
            return 0.0
        return float(np.std(self.fractions, ddof=1) / np.sqrt(self.episodes))

    @property
    def mean_reward(self) -> float:
        return float(np.mean(self.rewards))

    @property
    def zero_demand_episodes(self) -> int:
        return int(np.sum(self.requests == 0))


@log_latency
def evaluate_policy(policy: Policy, pattern: TrafficPattern, rewards: RewardSpec, episodes: int, seed: int,
                    iteration: int = 0, workers: int = 1, first_episode: int = 0) -> EvaluationSummary:
    """Run `episodes` seeded working days and collect the fulfilled fraction of each."""
    jobs = [EpisodeJob(policy, pattern, rewards, seed, iteration, first_episode + k) for k in range(episodes)]
    results = run_episodes(jobs, workers)
    summary = EvaluationSummary(
        fractions=np.array([r.fulfilled_fraction for r in results]),
        rewards=np.array([r.total_reward for r in results]),
        requests=np.array([r.total_requests for r in results]),
    )
    if summary.zero_demand_episodes:
        logger.warning(f"⚠️ {summary.zero_demand_episodes} episode(s) had no requests; counted as fully served")
    logger.info(f"📊 Fulfilled fraction {summary.mean:.4f} ± {summary.stderr:.4f} over {episodes} episodes")
    return summary


def write_eval_summary(summary: EvaluationSummary, path, policy_name: str, config_hash: str, seed: int) -> Path:
    row = {
        "policy": policy_name,
        "episodes": summary.episodes,
        "mean_fulfilled_fraction": summary.mean,
        "stderr": summary.stderr,
        "mean_episode_reward": summary.mean_reward,
        "zero_demand_episodes": summary.zero_demand_episodes,
        "config_hash": config_hash,
        "seed": seed,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame([row], columns=SUMMARY_COLUMNS).to_csv(path, index=False, float_format="%.12g")
    logger.info(f"💾 Evaluation summary saved: {path}")
    return path


def learning_curve(metrics: pd.DataFrame, path, config_hash: str = "", seed: int | None = None,
                   reference: float = LOOKAHEAD_REFERENCE) -> Path:
    """Bar chart of the per-iteration fulfilled fraction with a dashed reference line.
    The title carries the run's config hash and seed.

    Writes SVG when a static-image backend is available, otherwise an HTML file
    next to the requested path.
    """
    fig = go.Figure(go.Bar(
        x=metrics["iteration"], y=metrics["mean_fulfilled_fraction"], name="PPO policy", marker_color="#4C78A8",
    ))
    fig.add_hline(y=reference, line_dash="dash", line_color="#E45756",
                  annotation_text=f"lookahead reference {reference:.0%}", annotation_position="bottom right")
    fig.update_layout(
        title=f"Fulfilled requests per iteration (config {config_hash or '-'}, seed {'-' if seed is None else seed})",
        xaxis_title="Policy iteration", yaxis_title="Fulfilled requests",
        yaxis=dict(range=[0, 1], tickformat=".0%"), template="plotly_white", showlegend=False,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.write_image(str(path), format="svg")
    except Exception as e:
        path = path.with_suffix(".html")
        logger.warning(f"⚠️ Static image export unavailable ({e}); writing {path} instead")
        fig.write_html(str(path), include_plotlyjs="cdn")
    logger.info(f"📈 Learning curve saved: {path}")
    return path
