#!/usr/bin/env python3
"""Record real API responses into frontend/fixtures/ for the UI contract tests.

Responses come from the actual HTTP app over the mock-mode fixture corpus, so
the frontend tests exercise the same payload shapes the server produces.

Run from the repo root:  python scripts/record_ui_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

from fastapi.testclient import TestClient

from frameseek.config import load_config
from frameseek.engine import build_engine
from frameseek.server import EngineHolder, create_app

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "frontend" / "fixtures"


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    holder = EngineHolder(build_engine(load_config(ROOT / "data" / "config.json")))
    client = TestClient(create_app(holder))

    recordings = {
        "llandmark.json": client.post(
            "/api/search", json={"mode": "llandmark", "query": "The clip shows Ben Thanh Market", "k": 10}
        ),
        "semantic.json": client.post(
            "/api/search", json={"mode": "semantic", "query": "The clip shows Ben Thanh Market", "k": 10}
        ),
        "asr.json": client.post("/api/search", json={"mode": "asr", "query": "chợ Bến Thành", "k": 5}),
        "object_empty.json": client.post("/api/search", json={"mode": "object", "query": "zebra", "k": 5}),
        "temporal.json": client.post(
            "/api/temporal", json={"queries": ["a man speaking at a podium", "crowd waving flags"], "k": 5}
        ),
        "i2i.json": client.post(
            "/api/i2i",
            json={"query": "The clip shows Ben Thanh Market", "k": 5, "per_reference_top_k": 50,
                  "max_landmarks": 2, "images_per_landmark": 3},
        ),
        "i2i_partial_warnings.json": client.post(
            "/api/i2i",
            json={"query": "Ben Thanh Market and Turtle Tower", "k": 5, "per_reference_top_k": 10,
                  "max_landmarks": 2, "images_per_landmark": 2},
        ),
        "i2i_error.json": client.post("/api/i2i", json={"query": "Turtle Tower at dusk", "k": 5}),
        "capabilities.json": client.get("/api/capabilities"),
        "frame.json": client.get("/api/frame/L01/V001/37"),
    }

    for name, response in recordings.items():
        payload = {"status": response.status_code, "body": response.json()}
        (OUT / name).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        print(f"recorded {name} ({response.status_code})")


if __name__ == "__main__":
    main()
