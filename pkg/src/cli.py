"""
Command-line entry point.

    python -m src.cli train    --preset didi5-small --iters 2 --episodes 2 --seed 1
    python -m src.cli eval     --preset didi5-small --policy checkpoint:runs/checkpoint.npz
    python -m src.cli simulate --preset didi5-small --policy greedy --seed 3

Every output file carries the run's config hash and master seed.
"""
import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

# --- PATH SETUP ---
sys.path.append(os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from src.ai_engine.baselines import BASELINES
from src.ai_engine.graph import train
from src.ai_engine.schemas import RunConfig, TrainConfig, config_hash
from src.env.pattern import TrafficPattern
from src.evaluate import evaluate_policy, learning_curve, write_eval_summary
from src.infra.checkpoint import load_checkpoint
from src.infra.errors import ConfigError, RideHailError
from src.infra.ingest import PatternBundle, load_pattern_bundle, resolve_preset
from src.infra.logger import log_latency, logger
from src.infra.notifier import notify_run_summary
from src.infra.settings import settings
from src.sdm.engine import run_episode
from src.sdm.trace import write_trace
from src.worker import episode_rng

DEFAULT_PRESET = "didi5-small"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ridehail", description="PPO fleet control for ride-hailing networks")
    parser.add_argument("command", choices=["train", "eval", "simulate"])
    parser.add_argument("--config", type=Path, help="RunConfig JSON file")
    source = parser.add_mutually_exclusive_group()
    source.add_argument("--preset", help=f"preset name (default {DEFAULT_PRESET})")
    source.add_argument("--pattern", type=Path, help="pattern file path")
    parser.add_argument("--seed", type=int, help="master seed")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--policy", help="random | greedy | checkpoint:PATH")
    parser.add_argument("--iters", type=int, help="override the number of policy iterations")
    parser.add_argument("--episodes", type=int, help="override episodes per iteration")
    parser.add_argument("--eval-episodes", type=int, help="episodes for the eval command")
    parser.add_argument("--workers", type=int, help="rollout worker processes")
    parser.add_argument("--no-plot", action="store_true", help="skip the learning-curve figure")
    return parser


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """Merges --config JSON with command-line flags (flags win)."""
    data = {"out_dir": str(settings.out_dir), "workers": settings.workers}
    if args.config:
        try:
            data.update(json.loads(Path(args.config).read_text()))
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {args.config} is not valid JSON: {e}")
    flags = {
        "preset": args.preset,
        "pattern": str(args.pattern) if args.pattern else None,
        "seed": args.seed,
        "out_dir": str(args.out) if args.out else None,
        "policy": args.policy,
        "eval_episodes": args.eval_episodes,
        "workers": args.workers,
    }
    if args.preset or args.pattern:
        data.pop("preset", None)
        data.pop("pattern", None)
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.no_plot:
        data["plot"] = False
    train_overrides = dict(data.get("train", {}))
    if args.iters is not None:
        train_overrides["iterations"] = args.iters
    if args.episodes is not None:
        train_overrides["episodes"] = args.episodes
    data["train"] = train_overrides
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid run configuration:\n{e}")


def load_bundle(run: RunConfig) -> PatternBundle:
    if run.pattern is not None:
        return load_pattern_bundle(run.pattern)
    return load_pattern_bundle(resolve_preset(run.preset or DEFAULT_PRESET))


def resolve_train_config(run: RunConfig, bundle: PatternBundle) -> TrainConfig:
    """Defaults < preset train block < --config train block < flags; seed and workers come from the run."""
    merged = {**bundle.train, **run.train, "seed": run.seed, "workers": run.workers}
    try:
        return TrainConfig.model_validate(merged)
    except ValidationError as e:
        raise ConfigError(f"invalid training configuration:\n{e}")


def select_policy(selector: str, pattern: TrafficPattern):
    if selector in BASELINES:
        return BASELINES[selector]()
    checkpoint = load_checkpoint(Path(selector.split(":", 1)[1]))
    enc = checkpoint.policy.encoder
    if (enc.R, enc.H, enc.L) != (pattern.R, pattern.H, pattern.L):
        raise ConfigError(
            f"checkpoint was trained for R={enc.R}, H={enc.H}, L={enc.L}; "
            f"pattern '{pattern.name}' has R={pattern.R}, H={pattern.H}, L={pattern.L}"
        )
    return checkpoint.policy


@log_latency
def cmd_train(run: RunConfig, bundle: PatternBundle, cfg: TrainConfig, chash: str) -> int:
    policy, metrics = train(cfg, bundle.pattern, bundle.rewards, run.out_dir, chash)
    if run.plot and len(metrics):
        learning_curve(metrics, Path(run.out_dir) / "learning_curve.svg", chash, cfg.seed)
    final = metrics.iloc[-1]
    print(f"final fulfilled fraction {final['mean_fulfilled_fraction']:.4f} after {int(final['iteration'])} iterations")
    notify_run_summary("train", {
        "pattern": bundle.pattern.name,
        "iterations": int(final["iteration"]),
        "mean_fulfilled_fraction": float(final["mean_fulfilled_fraction"]),
        "config_hash": chash,
        "seed": run.seed,
    })
    return 0


@log_latency
def cmd_eval(run: RunConfig, bundle: PatternBundle, cfg: TrainConfig, chash: str) -> int:
    policy = select_policy(run.policy, bundle.pattern)
    summary = evaluate_policy(policy, bundle.pattern, bundle.rewards, run.eval_episodes, run.seed,
                              workers=run.workers)
    write_eval_summary(summary, Path(run.out_dir) / "eval_summary.csv", run.policy, chash, run.seed)
    print(f"fulfilled fraction {summary.mean:.4f} ± {summary.stderr:.4f} (stderr, {summary.episodes} episodes)")
    notify_run_summary("eval", {
        "pattern": bundle.pattern.name,
        "policy": run.policy,
        "mean_fulfilled_fraction": summary.mean,
        "stderr": summary.stderr,
        "config_hash": chash,
        "seed": run.seed,
    })
    return 0


@log_latency
def cmd_simulate(run: RunConfig, bundle: PatternBundle, cfg: TrainConfig, chash: str) -> int:
    policy = select_policy(run.policy, bundle.pattern)
    # same stream as the first eval episode for this seed
    result = run_episode(policy, bundle.pattern, bundle.rewards, episode_rng(run.seed, 0, 0))
    path = write_trace(result.records, Path(run.out_dir) / "trace.csv", chash, run.seed)
    logger.info(f"💾 Trace saved: {path} ({len(result.records)} steps)")
    print(f"{len(result.records)} steps, reward {result.total_reward:g}, fulfilled {result.fulfilled_fraction:.4f}")
    return 0


COMMANDS = {"train": cmd_train, "eval": cmd_eval, "simulate": cmd_simulate}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = build_run_config(args)
        bundle = load_bundle(run)
        cfg = resolve_train_config(run, bundle)
        chash = config_hash(run, cfg, bundle.pattern.name)
        logger.info(f"⚙️ {args.command}: pattern={bundle.pattern.name} seed={run.seed} config_hash={chash}")
        return COMMANDS[args.command](run, bundle, cfg, chash)
    except (RideHailError, OSError) as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
