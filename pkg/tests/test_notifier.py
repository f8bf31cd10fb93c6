import dataclasses

import requests

from src.infra import notifier


class FakeResponse:
    def raise_for_status(self):
        pass


def test_no_url_means_no_post(monkeypatch):
    monkeypatch.setattr(notifier, "settings", dataclasses.replace(notifier.settings, webhook_url=None))
    monkeypatch.setattr(notifier.requests, "post", lambda *a, **k: (_ for _ in ()).throw(AssertionError))
    assert notifier.notify_run_summary("eval", {"mean_fulfilled_fraction": 0.5}) is False


def test_posts_embed(monkeypatch):
    sent = {}

    def fake_post(url, json, timeout):
        sent.update(url=url, json=json)
        return FakeResponse()

    monkeypatch.setattr(notifier.requests, "post", fake_post)
    ok = notifier.notify_run_summary("train", {"mean_fulfilled_fraction": 0.83, "seed": 1},
                                     webhook_url="http://hook")
    assert ok
    assert sent["url"] == "http://hook"
    assert "83.0% fulfilled" in sent["json"]["embeds"][0]["title"]


def test_failure_is_swallowed(monkeypatch):
    def boom(*args, **kwargs):
        raise requests.ConnectionError("down")

    monkeypatch.setattr(notifier.requests, "post", boom)
    assert notifier.notify_run_summary("eval", {}, webhook_url="http://hook") is False
