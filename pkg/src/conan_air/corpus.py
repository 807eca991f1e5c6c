"""Frame-annotated video QA records: ingestion, frame categorization and
synthetic corpora."""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence


class CorpusError(ValueError):
    """Raised for malformed corpus records. Carries the 1-based line number."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FrameLabel(enum.IntEnum):
    # ordered so that comparisons follow Evidence > Contextual > Irrelevant
    IRRELEVANT = 0
    CONTEXTUAL = 1
    EVIDENCE = 2

    @property
    def word(self) -> str:
        return self.name.lower()

    @classmethod
    def from_word(cls, word: str) -> "FrameLabel":
        try:
            return cls[word.upper()]
        except KeyError:
            raise ValueError(f"unknown frame label {word!r}") from None


class QAType(enum.Enum):
    MULTI_CHOICE = "multi_choice"
    FREE_FORM = "free_form"


@dataclass(frozen=True)
class LabelThresholds:
    t_evidence: float = 0.7
    t_contextual: float = 0.3

    def __post_init__(self):
        if not 0.0 < self.t_evidence <= 1.0:
            raise ValueError(f"t_evidence must be in (0, 1], got {self.t_evidence}")
        if not 0.0 <= self.t_contextual < 1.0:
            raise ValueError(f"t_contextual must be in [0, 1), got {self.t_contextual}")
        if self.t_evidence <= self.t_contextual:
            raise ValueError("t_evidence must be greater than t_contextual")


DEFAULT_THRESHOLDS = LabelThresholds()


@dataclass(frozen=True)
class FrameRecord:
    index: int
    timestamp: float
    description: str
    relevance_score: float
    label: FrameLabel


@dataclass(frozen=True)
class Option:
    label: str
    text: str


@dataclass(frozen=True)
class CorpusSample:
    sample_id: str
    frames: tuple[FrameRecord, ...]
    question: str
    qa_type: QAType
    answer: str
    options: Optional[tuple[Option, ...]] = None

    def __post_init__(self):
        if not self.frames:
            raise ValueError(f"sample {self.sample_id!r} has no frames")
        for i, fr in enumerate(self.frames):
            if fr.index != i:
                raise ValueError(f"sample {self.sample_id!r}: frame indices must be 0..N-1")
            if i and fr.timestamp <= self.frames[i - 1].timestamp:
                raise ValueError(
                    f"sample {self.sample_id!r}: timestamps not strictly increasing at frame {i}"
                )
        if self.qa_type is QAType.MULTI_CHOICE:
            if not self.options:
                raise ValueError(f"sample {self.sample_id!r}: multi_choice requires options")
            if self.answer not in {o.label for o in self.options}:
                raise ValueError(
                    f"sample {self.sample_id!r}: answer {self.answer!r} is not among the option labels"
                )

    @property
    def n_frames(self) -> int:
        return len(self.frames)

    @property
    def labels(self) -> tuple[FrameLabel, ...]:
        return tuple(f.label for f in self.frames)

    @property
    def timestamps(self) -> tuple[float, ...]:
        return tuple(f.timestamp for f in self.frames)


def categorize_frame(score: float, thresholds: LabelThresholds = DEFAULT_THRESHOLDS) -> FrameLabel:
    """Map a normalized relevance score to a frame label.

    Lower bounds are inclusive, so ``score == t_contextual`` is Contextual.
    """
    if not (0.0 <= score <= 1.0):
        raise ValueError(f"relevance score must be in [0, 1], got {score!r}")
    if score >= thresholds.t_evidence:
        return FrameLabel.EVIDENCE
    if score >= thresholds.t_contextual:
        return FrameLabel.CONTEXTUAL
    return FrameLabel.IRRELEVANT


_RECORD_KEYS = {"sample_id", "question", "qa_type", "options", "answer", "frames", "max_scale"}
_FRAME_KEYS = {"timestamp", "description", "relevance_score"}


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValueError(f"{what} must be a number, got {value!r}")
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite")
    return float(value)


def _string(value, what: str) -> str:
    if not isinstance(value, str):
        raise ValueError(f"{what} must be a string, got {value!r}")
    return value


def sample_from_record(record: dict, thresholds: LabelThresholds = DEFAULT_THRESHOLDS) -> CorpusSample:
    """Build a labeled sample from one decoded record. Raises ValueError."""
    if not isinstance(record, dict):
        raise ValueError("record must be an object")
    unknown = set(record) - _RECORD_KEYS
    if unknown:
        raise ValueError(f"unknown fields {sorted(unknown)}")
    for key in ("sample_id", "question", "qa_type", "answer", "frames"):
        if key not in record:
            raise ValueError(f"missing field {key!r}")

    sample_id = _string(record["sample_id"], "sample_id")
    try:
        qa_type = QAType(record["qa_type"])
    except ValueError:
        raise ValueError(f"qa_type must be 'multi_choice' or 'free_form', got {record['qa_type']!r}") from None

    scale = 1.0
    if record.get("max_scale") is not None:
        scale = _number(record["max_scale"], "max_scale")
        if scale <= 0:
            raise ValueError("max_scale must be positive")

    options = None
    if record.get("options") is not None:
        if not isinstance(record["options"], list):
            raise ValueError("options must be a list")
        opts = []
        for o in record["options"]:
            if not isinstance(o, dict) or set(o) != {"label", "text"}:
                raise ValueError("each option must be {label, text}")
            opts.append(Option(_string(o["label"], "option label"), _string(o["text"], "option text")))
        options = tuple(opts)

    raw_frames = record["frames"]
    if not isinstance(raw_frames, list) or not raw_frames:
        raise ValueError("frames must be a non-empty list")
    frames = []
    for i, f in enumerate(raw_frames):
        if not isinstance(f, dict) or set(f) != _FRAME_KEYS:
            raise ValueError(f"frame {i} must have exactly the fields {sorted(_FRAME_KEYS)}")
        ts = _number(f["timestamp"], f"frame {i} timestamp")
        if ts < 0:
            raise ValueError(f"frame {i} timestamp is negative")
        score = _number(f["relevance_score"], f"frame {i} relevance_score") / scale
        if not 0.0 <= score <= 1.0:
            raise ValueError(f"frame {i} relevance_score outside [0, 1] after normalization")
        frames.append(
            FrameRecord(
                index=i,
                timestamp=ts,
                description=_string(f["description"], f"frame {i} description"),
                relevance_score=score,
                label=categorize_frame(score, thresholds),
            )
        )

    return CorpusSample(
        sample_id=sample_id,
        frames=tuple(frames),
        question=_string(record["question"], "question"),
        qa_type=qa_type,
        answer=_string(record["answer"], "answer"),
        options=options,
    )


def ingest(lines: Iterable[str], thresholds: LabelThresholds = DEFAULT_THRESHOLDS) -> list[CorpusSample]:
    """Parse line-delimited records. The first bad line aborts the whole file."""
    samples = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            samples.append(sample_from_record(record, thresholds))
        except (ValueError, TypeError) as exc:
            raise CorpusError(str(exc), line=lineno) from exc
    return samples


def load_corpus(path, thresholds: LabelThresholds = DEFAULT_THRESHOLDS) -> list[CorpusSample]:
    with open(path, encoding="utf-8") as fh:
        return ingest(fh, thresholds)


def sample_to_record(sample: CorpusSample) -> dict:
    record = {
        "sample_id": sample.sample_id,
        "question": sample.question,
        "qa_type": sample.qa_type.value,
    }
    if sample.options is not None:
        record["options"] = [{"label": o.label, "text": o.text} for o in sample.options]
    record["answer"] = sample.answer
    record["frames"] = [
        {"timestamp": f.timestamp, "description": f.description, "relevance_score": f.relevance_score}
        for f in sample.frames
    ]
    return record


def serialize(samples: Iterable[CorpusSample]) -> str:
    return "".join(json.dumps(sample_to_record(s), ensure_ascii=False) + "\n" for s in samples)


# ---------------------------------------------------------------------------
# synthetic corpora


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 100
    n_frames: int = 64
    evidence_ratio_range: tuple[float, float] = (0.05, 0.5)
    seed: int = 0
    free_form_fraction: float = 0.25
    frame_interval: float = 2.0
    max_clusters: int = 3
    spread_range: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        lo, hi = self.evidence_ratio_range
        if self.n_samples < 0:
            raise ValueError("n_samples must be non-negative")
        if self.n_frames < 1:
            raise ValueError("n_frames must be at least 1")
        if lo > hi:
            raise ValueError(f"empty evidence ratio range [{lo}, {hi}]")
        if not (0.0 <= lo and hi <= 1.0):
            raise ValueError("evidence ratio range must lie within [0, 1]")
        if self.max_clusters < 1:
            raise ValueError("max_clusters must be >= 1")
        s_lo, s_hi = self.spread_range
        if not 0.0 <= s_lo <= s_hi <= 1.0:
            raise ValueError("spread range must be an interval within [0, 1]")


_SCENES = ("a kitchen", "a street crossing", "a classroom", "a football pitch", "a workshop", "a park")
_OBJECTS = ("red ball", "blue umbrella", "bicycle", "laptop", "dog", "green door", "trophy", "guitar")
_FREE_ANSWERS = (
    "the man picks up the red ball",
    "a dog runs across the field",
    "the girl opens the green door",
    "two players swap shirts",
    "the teacher writes on the board",
    "someone repairs the bicycle",
)


def _scores_for(label: FrameLabel, rng: random.Random, thresholds: LabelThresholds) -> float:
    if label is FrameLabel.EVIDENCE:
        lo, hi = thresholds.t_evidence, 1.0
    elif label is FrameLabel.CONTEXTUAL:
        lo, hi = thresholds.t_contextual, thresholds.t_evidence
    else:
        lo, hi = 0.0, thresholds.t_contextual
    # keep strictly inside the band so rounding cannot cross a threshold
    for _ in range(100):
        s = round(rng.uniform(lo, hi), 4)
        if categorize_frame(s, thresholds) is label:
            return s
    return lo if label is not FrameLabel.IRRELEVANT else 0.0


def _synthetic_labels(n: int, ratio: float, rng: random.Random, spec: "SyntheticSpec") -> list[FrameLabel]:
    m = min(n, int(round(ratio * n)))
    labels = [FrameLabel.IRRELEVANT] * n
    if m == 0:
        # a few contextual hints even without evidence
        for i in rng.sample(range(n), k=min(n, max(0, n // 16))):
            labels[i] = FrameLabel.CONTEXTUAL
        return labels
    # evidence is grouped into 1..3 temporal clusters whose centres spread
    # over a random fraction of the video; wide spreads give hard samples
    n_clusters = min(m, rng.randint(1, spec.max_clusters))
    sizes = [m // n_clusters + (1 if c < m % n_clusters else 0) for c in range(n_clusters)]
    spread = rng.uniform(*spec.spread_range)
    offset = rng.uniform(0.0, 1.0 - spread)
    free = set(range(n))
    for c, size in enumerate(sizes):
        centre = offset + (spread * c / (n_clusters - 1) if n_clusters > 1 else rng.uniform(0, spread))
        want = round(centre * (n - size))
        starts = [s for s in range(n - size + 1) if all(i in free for i in range(s, s + size))]
        if starts:
            start = min(starts, key=lambda s: (abs(s - want), s))
            chosen = range(start, start + size)
        else:
            chosen = rng.sample(sorted(free), k=size)
        for i in chosen:
            labels[i] = FrameLabel.EVIDENCE
            free.discard(i)
    # contextual frames flank the evidence clusters
    for i in range(n):
        if labels[i] is FrameLabel.EVIDENCE:
            for j in (i - 2, i - 1, i + 1, i + 2):
                if 0 <= j < n and labels[j] is FrameLabel.IRRELEVANT and rng.random() < 0.6:
                    labels[j] = FrameLabel.CONTEXTUAL
    return labels


def gen_synthetic(spec: SyntheticSpec, thresholds: LabelThresholds = DEFAULT_THRESHOLDS) -> list[CorpusSample]:
    """Generate a deterministic corpus whose ground-truth labels are known.

    Frame descriptions name their label, so template reasoners can cite them.
    """
    rng = random.Random(spec.seed)
    samples = []
    for k in range(spec.n_samples):
        n = spec.n_frames
        ratio = rng.uniform(*spec.evidence_ratio_range)
        labels = _synthetic_labels(n, ratio, rng, spec)
        scene = rng.choice(_SCENES)
        obj = rng.choice(_OBJECTS)
        frames = []
        for i, lab in enumerate(labels):
            ts = round(i * spec.frame_interval, 3)
            if lab is FrameLabel.EVIDENCE:
                desc = f"[{lab.word}] the {obj} is clearly visible in {scene}"
            elif lab is FrameLabel.CONTEXTUAL:
                desc = f"[{lab.word}] people move around {scene} near the {obj}"
            else:
                desc = f"[{lab.word}] background footage of {scene}"
            score = _scores_for(lab, rng, thresholds)
            frames.append(FrameRecord(i, ts, desc, score, categorize_frame(score, thresholds)))
        sid = f"syn-{spec.seed}-{k:05d}"
        if rng.random() < spec.free_form_fraction:
            answer = rng.choice(_FREE_ANSWERS)
            sample = CorpusSample(
                sample_id=sid,
                frames=tuple(frames),
                question=f"What happens with the {obj} in {scene}?",
                qa_type=QAType.FREE_FORM,
                answer=answer,
            )
        else:
            letters = ("A", "B", "C", "D")
            texts = rng.sample(_FREE_ANSWERS, k=4)
            answer = rng.choice(letters)
            sample = CorpusSample(
                sample_id=sid,
                frames=tuple(frames),
                question=f"What happens with the {obj} in {scene}?",
                qa_type=QAType.MULTI_CHOICE,
                answer=answer,
                options=tuple(Option(lbl, t) for lbl, t in zip(letters, texts)),
            )
        samples.append(sample)
    return samples
