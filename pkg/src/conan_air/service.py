"""Stateless reward-verifier HTTP service.

Endpoints: ``POST /v1/score``, ``POST /v1/advantages``, ``GET /v1/health``.
Responses use canonical JSON (sorted keys, compact separators) with floats
rounded to 9 significant digits, so identical requests give identical bytes.
"""

from __future__ import annotations

import json
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Literal, Optional

from fastapi import FastAPI, Request
from fastapi.responses import Response
from pydantic import BaseModel, ValidationError

from . import __version__
from .config import ServiceConfig
from .corpus import FrameLabel, QAType
from .grammar import parse
from .grpo import group_advantages
from .rewards import ScoringError, score_rollout

LabelWord = Literal["evidence", "contextual", "irrelevant"]


class Truth(BaseModel):
    answer: str
    gt_labels: list[dict[int, LabelWord]] = []
    retrieved_labels: list[list[LabelWord]] = []


class ScoreItem(BaseModel):
    task_type: Literal["multi_choice", "free_form"]
    raw_output: str
    truth: Truth


def _round9(x: Any) -> Any:
    if isinstance(x, float):
        return float(f"{x:.9g}")
    if isinstance(x, dict):
        return {k: _round9(v) for k, v in x.items()}
    if isinstance(x, list):
        return [_round9(v) for v in x]
    return x


def canonical_json(obj: Any) -> bytes:
    return json.dumps(_round9(obj), sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def _reply(obj: Any, status: int = 200) -> Response:
    return Response(canonical_json(obj), status_code=status, media_type="application/json")


def _error(status: int, code: str, detail: str) -> Response:
    return _reply({"error": {"code": code, "detail": detail}}, status)


def score_item(raw: Any) -> dict:
    """Score one request item; problems become an item-level error object."""
    try:
        item = ScoreItem.model_validate(raw)
    except ValidationError as exc:
        first = exc.errors()[0]
        loc = ".".join(str(p) for p in first["loc"])
        return {"error": {"code": "invalid_item", "detail": f"{loc}: {first['msg']}"}}
    rollout = parse(item.raw_output)
    gt = [{int(k): FrameLabel.from_word(v) for k, v in r.items()} for r in item.truth.gt_labels]
    retrieved = [[FrameLabel.from_word(v) for v in r] for r in item.truth.retrieved_labels]
    try:
        b = score_rollout(rollout, QAType(item.task_type), item.truth.answer, gt, retrieved, raw_text=item.raw_output)
    except ScoringError as exc:
        return {"error": {"code": "scoring_error", "detail": str(exc)}, "violations": rollout.violations}
    out = b.to_dict()
    out["well_formed"] = rollout.well_formed
    out["violations"] = rollout.violations
    return out


async def _json_body(request: Request) -> tuple[Optional[Any], Optional[Response]]:
    try:
        return json.loads(await request.body()), None
    except (ValueError, UnicodeDecodeError) as exc:
        return None, _error(400, "invalid_json", str(exc))


def create_app(config: ServiceConfig = ServiceConfig()) -> FastAPI:
    app = FastAPI(title="conan-air reward verifier", version=__version__)
    started = time.monotonic()
    counters = {"score_requests": 0, "scored_items": 0, "advantage_requests": 0}
    lock = threading.Lock()
    pool = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None

    def bump(**deltas):
        with lock:
            for k, v in deltas.items():
                counters[k] += v

    @app.post("/v1/score")
    async def score(request: Request):
        body, err = await _json_body(request)
        if err:
            return err
        if not isinstance(body, dict) or not isinstance(body.get("items"), list):
            return _error(400, "invalid_request", "body must be an object with an 'items' list")
        items = body["items"]
        if len(items) > config.max_batch:
            return _error(413, "batch_too_large", f"{len(items)} items exceeds the limit of {config.max_batch}")
        results = list(pool.map(score_item, items)) if pool else [score_item(i) for i in items]
        bump(score_requests=1, scored_items=len(items))
        return _reply({"results": results})

    @app.post("/v1/advantages")
    async def advantages(request: Request):
        body, err = await _json_body(request)
        if err:
            return err
        groups = body.get("groups") if isinstance(body, dict) else None
        if not isinstance(groups, list):
            return _error(400, "invalid_request", "body must be an object with a 'groups' list")
        out = []
        for k, g in enumerate(groups):
            if not isinstance(g, list) or not g:
                return _error(400, "invalid_group", f"group {k} must be a non-empty list")
            if not all(isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x) for x in g):
                return _error(400, "invalid_group", f"group {k} must contain finite numbers")
            out.append(group_advantages(g))
        bump(advantage_requests=1)
        return _reply({"advantages": out})

    @app.get("/v1/health")
    async def health():
        with lock:
            snapshot = dict(counters)
        return _reply(
            {"status": "ok", "version": __version__, "uptime_s": round(time.monotonic() - started, 3), "counters": snapshot}
        )

    return app


def serve(config: ServiceConfig) -> None:
    import uvicorn

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
