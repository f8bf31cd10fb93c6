import os
from dataclasses import dataclass
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

REPO_ROOT = Path(__file__).resolve().parents[2]


@dataclass(frozen=True)
class Settings:
    """Process-level settings read from the environment (and `.env`)."""
    presets_dir: Path
    out_dir: Path
    workers: int
    log_file: str
    webhook_url: str | None


def get_settings() -> Settings:
    return Settings(
        presets_dir=Path(os.getenv("RIDEHAIL_PRESETS_DIR", REPO_ROOT / "presets")),
        out_dir=Path(os.getenv("RIDEHAIL_OUT_DIR", "runs")),
        workers=int(os.getenv("RIDEHAIL_WORKERS", 1)),
        log_file=os.getenv("RIDEHAIL_LOG_FILE", "system.log"),
        webhook_url=os.getenv("RIDEHAIL_WEBHOOK_URL") or None,
    )


settings = get_settings()
