from pathlib import Path

import pandas as pd

from src.sdm.engine import StepRecord

TRACE_COLUMNS = ["epoch", "step", "o", "d", "kind", "reward", "behavior_prob", "config_hash", "seed"]


def records_to_frame(records: list[StepRecord], config_hash: str = "", seed: int = 0) -> pd.DataFrame:
    rows = [
        {
            "epoch": r.epoch,
            "step": r.step,
            "o": r.action.origin,
            "d": r.action.destination,
            "kind": r.kind.value,
            "reward": r.reward,
            "behavior_prob": r.behavior_prob,
            "config_hash": config_hash,
            "seed": seed,
        }
        for r in records
    ]
    return pd.DataFrame(rows, columns=TRACE_COLUMNS)


def write_trace(records: list[StepRecord], path: Path, config_hash: str = "", seed: int = 0) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_to_frame(records, config_hash, seed).to_csv(path, index=False, float_format="%.12g")
    return path
