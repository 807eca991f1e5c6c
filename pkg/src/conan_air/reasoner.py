"""Reasoner clients that write the per-round reasoning text of a trace."""

from __future__ import annotations

import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import httpx

from .actions import (
    Action,
    ConfidentQuestionAnswering,
    RandomFrameSampling,
    SpecificFrameRetrieval,
)
from .corpus import CorpusSample, FrameLabel

log = logging.getLogger(__name__)

_TAG_RE = re.compile(r"</?(identification|reasoning|action|answer)>")


class ReasonerError(RuntimeError):
    pass


@dataclass(frozen=True)
class RoundContext:
    sample: CorpusSample
    round_index: int
    visible: tuple[int, ...]
    action: Action


class ReasonerClient(Protocol):
    def reason(self, ctx: RoundContext) -> str: ...


def clean_reasoning(text: str) -> str:
    """Strip grammar tags and surrounding whitespace so the text renders."""
    return _TAG_RE.sub("", text).strip()


def _describe_action(action: Action) -> str:
    if isinstance(action, RandomFrameSampling):
        return f"random frame sampling ({action.count} new frames)"
    if isinstance(action, SpecificFrameRetrieval):
        clips = ", ".join(f"{s:g}s-{e:g}s" for s, e in action.clips)
        return f"specific frame retrieval of {action.count} frames within {clips}"
    return "confident question answering"


def build_messages(ctx: RoundContext) -> list[dict]:
    s = ctx.sample
    lines = [f"Question: {s.question}"]
    if s.options:
        lines += [f"{o.label}. {o.text}" for o in s.options]
    lines.append(f"Reference answer: {s.answer}")
    lines.append(f"Round {ctx.round_index}. Visible frames:")
    for i in ctx.visible:
        f = s.frames[i]
        lines.append(f"- frame {i} at {f.timestamp:g}s [{f.label.word}]: {f.description}")
    lines.append(f"Chosen action: {_describe_action(ctx.action)}")
    system = (
        "You write the reasoning of a video detective. Analyze the question and the visible "
        "frames, cite evidence and contextual frames by timestamp, and argue step by step "
        "towards the chosen action. Reply with plain prose only."
    )
    return [{"role": "system", "content": system}, {"role": "user", "content": "\n".join(lines)}]


class MockReasoner:
    """Deterministic template reasoner for tests and offline runs."""

    def reason(self, ctx: RoundContext) -> str:
        s = ctx.sample
        by_label = {lab: [i for i in ctx.visible if s.frames[i].label is lab] for lab in FrameLabel}
        parts = [f"Round {ctx.round_index}: the question asks \"{s.question}\"."]
        ev, cx = by_label[FrameLabel.EVIDENCE], by_label[FrameLabel.CONTEXTUAL]
        if ev:
            ts = ", ".join(f"{s.frames[i].timestamp:g}s" for i in ev)
            parts.append(f"Evidence appears at {ts}: {s.frames[ev[0]].description}.")
        if cx:
            ts = ", ".join(f"{s.frames[i].timestamp:g}s" for i in cx)
            parts.append(f"Contextual hints appear at {ts}.")
        if not ev and not cx:
            parts.append(f"All {len(ctx.visible)} visible frames are unrelated to the question.")
        if isinstance(ctx.action, ConfidentQuestionAnswering):
            parts.append("The evidence is sufficient, so I answer now.")
        elif isinstance(ctx.action, SpecificFrameRetrieval):
            parts.append("The evidence is incomplete, so I retrieve frames around the relevant clips.")
        else:
            parts.append("Nothing relevant is visible yet, so I sample new frames at random.")
        return " ".join(parts)


class RemoteReasoner:
    """Chat-completions style client.

    Reads ``CONAN_REASONER_URL``, ``CONAN_REASONER_KEY`` and
    ``CONAN_REASONER_MODEL`` when arguments are omitted.
    """

    def __init__(
        self,
        url: Optional[str] = None,
        model: Optional[str] = None,
        api_key: Optional[str] = None,
        max_in_flight: int = 4,
        retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
        transport: Optional[httpx.BaseTransport] = None,
    ):
        self.url = url or os.environ.get("CONAN_REASONER_URL")
        if not self.url:
            raise ReasonerError("no reasoner URL configured (CONAN_REASONER_URL)")
        self.model = model or os.environ.get("CONAN_REASONER_MODEL", "kimi-k2")
        self.api_key = api_key if api_key is not None else os.environ.get("CONAN_REASONER_KEY")
        self.retries = retries
        self.backoff = backoff
        self._slots = threading.BoundedSemaphore(max_in_flight)
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        self._client = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def _endpoint(self) -> str:
        base = self.url.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"

    def reason(self, ctx: RoundContext) -> str:
        payload = {"model": self.model, "messages": build_messages(ctx), "temperature": 0}
        last_exc: Optional[Exception] = None
        for attempt in range(self.retries):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            try:
                with self._slots:
                    resp = self._client.post(self._endpoint(), json=payload)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (httpx.HTTPError, KeyError, IndexError, TypeError, ValueError) as exc:
                last_exc = exc
                log.warning("reasoner call failed (attempt %d/%d): %s", attempt + 1, self.retries, exc)
        raise ReasonerError(f"reasoner failed after {self.retries} attempts: {last_exc}")

    def close(self):
        self._client.close()
