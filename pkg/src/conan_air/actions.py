"""The three reasoning-loop actions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

DEFAULT_COUNT = 8


@dataclass(frozen=True)
class RandomFrameSampling:
    count: int = DEFAULT_COUNT

    name = "random_frame_sampling"

    def __post_init__(self):
        if self.count <= 0:
            raise ValueError("count must be positive")


@dataclass(frozen=True)
class SpecificFrameRetrieval:
    clips: tuple[tuple[float, float], ...]
    count: int = DEFAULT_COUNT

    name = "specific_frame_retrieval"

    def __post_init__(self):
        if not self.clips:
            raise ValueError("specific_frame_retrieval needs at least one clip")
        for start, end in self.clips:
            if start < 0 or end < start:
                raise ValueError(f"invalid clip ({start}, {end})")
        if self.count <= 0:
            raise ValueError("count must be positive")


@dataclass(frozen=True)
class ConfidentQuestionAnswering:
    answer: str = ""

    name = "confident_question_answering"


Action = Union[RandomFrameSampling, SpecificFrameRetrieval, ConfidentQuestionAnswering]


def action_to_dict(action: Action) -> dict:
    if isinstance(action, RandomFrameSampling):
        params = {"count": action.count}
    elif isinstance(action, SpecificFrameRetrieval):
        params = {"clips": [[s, e] for s, e in action.clips], "count": action.count}
    else:
        params = {"answer": action.answer}
    return {"type": action.name, "params": params}


def action_from_dict(d: dict) -> Action:
    kind, params = d["type"], d.get("params", {})
    if kind == RandomFrameSampling.name:
        return RandomFrameSampling(int(params.get("count", DEFAULT_COUNT)))
    if kind == SpecificFrameRetrieval.name:
        clips = tuple((float(s), float(e)) for s, e in params["clips"])
        return SpecificFrameRetrieval(clips, int(params.get("count", DEFAULT_COUNT)))
    if kind == ConfidentQuestionAnswering.name:
        return ConfidentQuestionAnswering(str(params.get("answer", "")))
    raise ValueError(f"unknown action type {kind!r}")
