"""
Rollout workers: each episode runs with its own generator derived from
(master seed, iteration, episode) and results come back in episode order, so
the collected data does not depend on how many workers ran them.
"""
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any

import numpy as np

# --- PATH SETUP ---
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.env.pattern import RewardSpec, TrafficPattern
from src.infra.logger import logger
from src.sdm.engine import EpisodeResult, Policy, run_episode


def episode_rng(master_seed: int, iteration: int, episode: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(iteration, episode)))


def _discard(_state) -> None:
    return None


@dataclass
class EpisodeJob:
    policy: Policy
    pattern: TrafficPattern
    rewards: RewardSpec
    seed: int
    iteration: int
    episode: int
    encoder: Any = None   # EncoderConfig; when set, steps record raw count vectors


def run_episode_job(job: EpisodeJob) -> EpisodeResult:
    rng = episode_rng(job.seed, job.iteration, job.episode)
    snapshot = job.encoder.raw_counts if job.encoder is not None else _discard
    return run_episode(job.policy, job.pattern, job.rewards, rng, snapshot)


def run_episodes(jobs: list[EpisodeJob], workers: int = 1) -> list[EpisodeResult]:
    if workers <= 1 or len(jobs) <= 1:
        return [run_episode_job(job) for job in jobs]
    logger.info(f"👷 Dispatching {len(jobs)} episodes to {workers} workers")
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        # map() yields in submission order regardless of completion order
        return list(pool.map(run_episode_job, jobs))
