import datetime

import requests

from src.infra.logger import logger
from src.infra.settings import settings


def notify_run_summary(command: str, summary: dict, webhook_url: str | None = None, timeout: float = 10.0) -> bool:
    """Posts a run summary to the configured webhook. Never raises."""
    url = webhook_url or settings.webhook_url
    if not url:
        return False

    fraction = summary.get("mean_fulfilled_fraction")
    headline = f"{fraction:.1%} fulfilled" if isinstance(fraction, (int, float)) else "finished"
    payload = {
        "username": "RideHail PPO 🚕",
        "embeds": [{
            "title": f"📊 {command}: {headline}",
            "color": 0x00ff00 if isinstance(fraction, (int, float)) and fraction >= 0.8 else 0xffff00,
            "fields": [{"name": str(k), "value": str(v), "inline": True} for k, v in summary.items()],
            "footer": {"text": f"Finished at {datetime.datetime.now().strftime('%H:%M')}"},
        }],
    }

    try:
        response = requests.post(url, json=payload, timeout=timeout)
        response.raise_for_status()
        logger.info("✅ Run summary sent")
        return True
    except requests.RequestException as e:
        logger.warning(f"❌ Run summary webhook failed: {e}")
        return False
