"""Automated construction of multi-round reasoning traces and their
cold-start stage renderings."""

from __future__ import annotations

import enum
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Hashable, Mapping, NamedTuple, Optional, Sequence, Union

from .actions import (
    DEFAULT_COUNT,
    Action,
    ConfidentQuestionAnswering,
    RandomFrameSampling,
    SpecificFrameRetrieval,
    action_from_dict,
    action_to_dict,
)
from .corpus import CorpusSample, FrameLabel
from .grammar import ParsedRound, render_round
from .reasoner import ReasonerClient, ReasonerError, RoundContext, clean_reasoning

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TracerConfig:
    initial_frames: int = 16
    frames_per_retrieval: int = DEFAULT_COUNT
    retrieval_threshold: float = 0.5
    max_rounds: int = 3
    seed: int = 0

    def __post_init__(self):
        if min(self.initial_frames, self.frames_per_retrieval, self.max_rounds) < 1:
            raise ValueError("frame counts and max_rounds must be >= 1")
        if not 0.0 < self.retrieval_threshold <= 1.0:
            raise ValueError("retrieval_threshold must be in (0, 1]")


@dataclass(frozen=True)
class TraceRound:
    round_index: int
    visible_frames: tuple[int, ...]
    gt_labels: Mapping[int, FrameLabel]
    reasoning_text: str
    action: Action


@dataclass(frozen=True)
class Trace:
    sample_id: str
    rounds: tuple[TraceRound, ...]
    final_answer: str
    edi_norm: Optional[float] = None

    @property
    def round_count(self) -> int:
        return len(self.rounds)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "round_count": self.round_count,
            "rounds": [
                {
                    "round_index": r.round_index,
                    "visible_frames": list(r.visible_frames),
                    "gt_labels": {str(i): r.gt_labels[i].word for i in r.visible_frames},
                    "reasoning_text": r.reasoning_text,
                    "action": action_to_dict(r.action),
                }
                for r in self.rounds
            ],
            "final_answer": self.final_answer,
            "edi_norm": self.edi_norm,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Trace":
        rounds = tuple(
            TraceRound(
                round_index=int(r["round_index"]),
                visible_frames=tuple(int(i) for i in r["visible_frames"]),
                gt_labels={int(k): FrameLabel.from_word(v) for k, v in r["gt_labels"].items()},
                reasoning_text=r["reasoning_text"],
                action=action_from_dict(r["action"]),
            )
            for r in d["rounds"]
        )
        if len(rounds) != d.get("round_count", len(rounds)):
            raise ValueError("round_count does not match the number of rounds")
        return cls(d["sample_id"], rounds, d["final_answer"], d.get("edi_norm"))


class ApplyResult(NamedTuple):
    visible: tuple[int, ...]
    added: tuple[int, ...]
    exhausted: bool


def _n(sample_or_n: Union[CorpusSample, int]) -> int:
    return sample_or_n if isinstance(sample_or_n, int) else sample_or_n.n_frames


def init_visible(sample: Union[CorpusSample, int], k: int = 16, seed: Hashable = None) -> tuple[int, ...]:
    """k uniformly spaced frame indices (all frames when N <= k)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    n = _n(sample)
    if n <= k:
        return tuple(range(n))
    if k == 1:
        return (0,)
    out = dict.fromkeys(round(j * (n - 1) / (k - 1)) for j in range(k))
    return tuple(out)


def clip_windows(labels: Mapping[int, FrameLabel], timestamps: Sequence[float]) -> tuple[tuple[float, float], ...]:
    """Timestamp windows spanning runs of consecutive relevant visible frames."""
    windows = []
    run: list[int] = []
    for i in sorted(labels):
        if labels[i] is not FrameLabel.IRRELEVANT:
            run.append(i)
            continue
        if run:
            windows.append((timestamps[run[0]], timestamps[run[-1]]))
            run = []
    if run:
        windows.append((timestamps[run[0]], timestamps[run[-1]]))
    return tuple(windows)


def decide_action(
    labels: Mapping[int, FrameLabel],
    config: TracerConfig,
    timestamps: Sequence[float],
    round_index: int = 1,
    answer: str = "",
) -> Action:
    """Pick the next action from the visible frames' true labels.

    Evidence proportion counts only Evidence frames; Contextual frames decide
    between random sampling and targeted retrieval. The last allowed round
    always answers.
    """
    if not labels:
        raise ValueError("no visible frames")
    if round_index >= config.max_rounds:
        return ConfidentQuestionAnswering(answer)
    n_ev = sum(1 for lab in labels.values() if lab is FrameLabel.EVIDENCE)
    if n_ev / len(labels) >= config.retrieval_threshold:
        return ConfidentQuestionAnswering(answer)
    if all(lab is FrameLabel.IRRELEVANT for lab in labels.values()):
        return RandomFrameSampling(config.frames_per_retrieval)
    return SpecificFrameRetrieval(clip_windows(labels, timestamps), config.frames_per_retrieval)


def resolve_clips(timestamps: Sequence[float], clips, pad: int = 1) -> list[int]:
    """Frame indices inside any clip, widened by ``pad`` frames on each side."""
    n = len(timestamps)
    hit = set()
    for start, end in clips:
        inside = [i for i, t in enumerate(timestamps) if start <= t <= end]
        if not inside:
            continue
        for i in range(max(0, inside[0] - pad), min(n - 1, inside[-1] + pad) + 1):
            hit.add(i)
    return sorted(hit)


def _spread(candidates: Sequence[int], k: int) -> list[int]:
    if k >= len(candidates):
        return list(candidates)
    if k == 1:
        return [candidates[len(candidates) // 2]]
    picks = dict.fromkeys(candidates[round(j * (len(candidates) - 1) / (k - 1))] for j in range(k))
    return list(picks)


def apply_action(
    sample: CorpusSample,
    visible: Sequence[int],
    action: Action,
    seed: Hashable = 0,
    max_new: Optional[int] = None,
) -> ApplyResult:
    """Add frames for a sampling/retrieval action; ``exhausted`` when none can be added."""
    if isinstance(action, ConfidentQuestionAnswering):
        raise ValueError("confident_question_answering does not fetch frames")
    seen = set(visible)
    count = action.count if max_new is None else min(action.count, max_new)
    if isinstance(action, RandomFrameSampling):
        pool = [i for i in range(sample.n_frames) if i not in seen]
        new = random.Random(seed).sample(pool, min(count, len(pool)))
    else:
        pool = [i for i in resolve_clips(sample.timestamps, action.clips) if i not in seen]
        new = _spread(pool, count)
    if not new:
        return ApplyResult(tuple(sorted(seen)), (), True)
    return ApplyResult(tuple(sorted(seen.union(new))), tuple(sorted(new)), False)


def round_seed(seed: int, sample_id: str, round_index: int) -> str:
    return f"{seed}:{sample_id}:{round_index}"


def plan_rounds(sample: CorpusSample, config: TracerConfig):
    """Run the decision loop without a reasoner; yields (round, visible, labels, action)."""
    visible = init_visible(sample, config.initial_frames)
    for r in range(1, config.max_rounds + 1):
        labels = {i: sample.frames[i].label for i in visible}
        action = decide_action(labels, config, sample.timestamps, r, sample.answer)
        yield r, visible, labels, action
        if isinstance(action, ConfidentQuestionAnswering):
            return
        visible = apply_action(sample, visible, action, round_seed(config.seed, sample.sample_id, r)).visible


def round_count(sample: CorpusSample, config: TracerConfig = TracerConfig()) -> int:
    return sum(1 for _ in plan_rounds(sample, config))


class TraceError(RuntimeError):
    pass


def build_trace(
    sample: CorpusSample,
    reasoner: ReasonerClient,
    config: TracerConfig = TracerConfig(),
    edi_norm: Optional[float] = None,
) -> Trace:
    """Teacher-forced trace: actions follow the true labels, the final answer
    is the ground truth, the reasoner only writes the prose."""
    rounds = []
    for r, visible, labels, action in plan_rounds(sample, config):
        try:
            text = clean_reasoning(reasoner.reason(RoundContext(sample, r, visible, action)))
        except ReasonerError as exc:
            raise TraceError(f"{sample.sample_id}: {exc}") from exc
        rounds.append(TraceRound(r, visible, labels, text, action))
    return Trace(sample.sample_id, tuple(rounds), sample.answer, edi_norm)


def build_traces(
    samples: Sequence[CorpusSample],
    reasoner: ReasonerClient,
    config: TracerConfig = TracerConfig(),
    workers: int = 1,
    edi_norms: Optional[Sequence[Optional[float]]] = None,
) -> tuple[list[Trace], list[tuple[str, str]]]:
    """Build traces in input order; failed samples are dropped and reported."""
    norms = list(edi_norms) if edi_norms is not None else [None] * len(samples)

    def one(args):
        sample, norm = args
        try:
            return build_trace(sample, reasoner, config, norm), None
        except TraceError as exc:
            log.error("dropping trace: %s", exc)
            return None, (sample.sample_id, str(exc))

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, zip(samples, norms)))
    else:
        results = [one(a) for a in zip(samples, norms)]
    traces = [t for t, _ in results if t is not None]
    failures = [f for _, f in results if f is not None]
    return traces, failures


# ---------------------------------------------------------------------------
# cold-start stage renderings


class Stage(enum.Enum):
    TEXTUAL = "textual"
    MULTIMODAL_ALIGNMENT = "multimodal_alignment"
    VISION_CENTRIC = "vision_centric"


# rounds allowed per stage: textual uses single-round traces, alignment adds
# two-round ones, the vision-centric stage takes everything
STAGE_MAX_ROUNDS = {Stage.TEXTUAL: 1, Stage.MULTIMODAL_ALIGNMENT: 2, Stage.VISION_CENTRIC: None}


def stage_accepts(trace: Trace, stage: Stage) -> bool:
    cap = STAGE_MAX_ROUNDS[stage]
    return cap is None or trace.round_count <= cap


def _frame_entry(sample: CorpusSample, i: int, stage: Stage) -> dict:
    f = sample.frames[i]
    ref = {"sample_id": sample.sample_id, "frame_index": i, "timestamp": f.timestamp}
    if stage is Stage.TEXTUAL:
        return {"timestamp": f.timestamp, "description": f.description}
    if stage is Stage.MULTIMODAL_ALIGNMENT:
        return {"frame_ref": ref, "timestamp": f.timestamp, "description": f.description}
    return {"frame_ref": ref, "timestamp": f.timestamp}


def export_stage(trace: Trace, sample: CorpusSample, stage: Stage) -> dict:
    """One training record for a cold-start stage.

    Each round lists only the frames that became visible in that round, so
    observations interleave with the round targets.
    """
    if trace.sample_id != sample.sample_id:
        raise ValueError("trace and sample ids differ")
    stage = Stage(stage)
    rounds = []
    shown: set[int] = set()
    for k, r in enumerate(trace.rounds):
        new = [i for i in r.visible_frames if i not in shown]
        shown.update(new)
        action = r.action
        if isinstance(action, ConfidentQuestionAnswering):
            action = ConfidentQuestionAnswering(trace.final_answer.strip())
        target = render_round(
            ParsedRound({i: r.gt_labels[i] for i in r.visible_frames}, r.reasoning_text, action),
            final=(k == len(trace.rounds) - 1),
        )
        rounds.append({"round_index": r.round_index, "frames": [_frame_entry(sample, i, stage) for i in new], "target": target})
    record = {"stage": stage.value, "sample_id": trace.sample_id, "question": sample.question}
    if sample.options:
        record["options"] = [{"label": o.label, "text": o.text} for o in sample.options]
    record["rounds"] = rounds
    record["answer"] = trace.final_answer
    return record
