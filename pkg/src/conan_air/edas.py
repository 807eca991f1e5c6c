"""Evidence Difficulty Index and difficulty-aware curriculum sampling."""

from __future__ import annotations

import enum
import math
import random
import statistics
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence, Union

from .corpus import CorpusSample, FrameLabel

# Largest population variance of points in [0, 1]; also the no-evidence sentinel.
MAX_VARIANCE = 0.25

DEFAULT_ROUND_QUOTA = {1: 25_000, 2: 25_000, 3: 10_000}


class InfeasibleQuota(ValueError):
    """The pool cannot supply a requested stratum."""


class Stage(enum.Enum):
    SFT = "sft"
    RLVR = "rlvr"


@dataclass(frozen=True)
class EdiScore:
    p: float
    var_raw: float
    edi_paper: float
    edi_norm: float


def evidence_ratio(labels: Sequence[FrameLabel]) -> float:
    if not labels:
        raise ValueError("evidence_ratio of an empty label list")
    return sum(1 for lab in labels if lab is FrameLabel.EVIDENCE) / len(labels)


def temporal_variance(positions: Sequence[float]) -> float:
    """Population variance of normalized positions.

    No positions means no evidence at all; this returns MAX_VARIANCE so the
    sample lands at the top of the difficulty scale.
    """
    for x in positions:
        if not 0.0 <= x <= 1.0:
            raise ValueError(f"position {x!r} outside [0, 1]")
    if not positions:
        return MAX_VARIANCE
    # exact rational arithmetic: identical points give exactly 0
    return statistics.pvariance(positions)


def frame_positions(sample: CorpusSample, mode: str = "index") -> list[float]:
    """Normalized [0, 1] position of every frame, by index or by timestamp."""
    n = sample.n_frames
    if mode == "index":
        if n == 1:
            return [0.0]
        return [i / (n - 1) for i in range(n)]
    if mode == "time":
        t0, t1 = sample.frames[0].timestamp, sample.frames[-1].timestamp
        if t1 == t0:
            return [0.0] * n
        return [min(1.0, (f.timestamp - t0) / (t1 - t0)) for f in sample.frames]
    raise ValueError(f"unknown position mode {mode!r}")


def edi_from_labels(labels: Sequence[FrameLabel], positions: Optional[Sequence[float]] = None) -> EdiScore:
    n = len(labels)
    if positions is None:
        positions = [0.0] if n == 1 else [i / (n - 1) for i in range(n)]
    p = evidence_ratio(labels)
    ev = [x for x, lab in zip(positions, labels) if lab is FrameLabel.EVIDENCE]
    if not ev:
        return EdiScore(p=0.0, var_raw=MAX_VARIANCE, edi_paper=MAX_VARIANCE, edi_norm=1.0)
    var = temporal_variance(ev)
    edi_paper = (1.0 - p) * var
    return EdiScore(p=p, var_raw=var, edi_paper=edi_paper, edi_norm=edi_paper / MAX_VARIANCE)


def edi(sample: CorpusSample, position_mode: str = "index") -> EdiScore:
    return edi_from_labels(sample.labels, frame_positions(sample, position_mode))


# ---------------------------------------------------------------------------
# curriculum sampling


class PoolEntry(NamedTuple):
    sample: Union[CorpusSample, str]
    edi: EdiScore
    round_count: int

    @property
    def sample_id(self) -> str:
        return self.sample if isinstance(self.sample, str) else self.sample.sample_id


@dataclass(frozen=True)
class CurriculumSpec:
    stage: Stage
    target_size: int
    easy_fraction: Optional[float] = None  # None: 0.7 for SFT, 0.3 for RLVR
    edi_threshold: float = 0.5
    round_quota: Optional[Mapping[int, int]] = None
    seed: int = 0

    def __post_init__(self):
        if self.target_size < 0:
            raise ValueError("target_size must be non-negative")
        if self.easy_fraction is not None and not 0.0 <= self.easy_fraction <= 1.0:
            raise ValueError("easy_fraction must be in [0, 1]")
        if self.round_quota is not None:
            if any(v < 0 for v in self.round_quota.values()):
                raise ValueError("round quotas must be non-negative")
            if sum(self.round_quota.values()) != self.target_size:
                raise ValueError(
                    f"round quotas sum to {sum(self.round_quota.values())}, expected {self.target_size}"
                )

    @property
    def resolved_easy_fraction(self) -> float:
        if self.easy_fraction is not None:
            return self.easy_fraction
        return 0.7 if self.stage is Stage.SFT else 0.3


def stratum_counts(target_size: int, easy_fraction: float) -> tuple[int, int]:
    """(n_easy, n_hard); the hard count is floored, the remainder goes to easy."""
    # tolerance absorbs binary error such as 1000 * (1 - 0.7) = 299.99999999999994
    n_hard = math.floor(target_size * (1.0 - easy_fraction) + 1e-9)
    return target_size - n_hard, n_hard


def scale_round_quota(target_size: int, base: Mapping[int, int] = DEFAULT_ROUND_QUOTA) -> dict[int, int]:
    """Scale a round-count quota to a new total by largest remainder."""
    total = sum(base.values())
    if total <= 0:
        raise ValueError("base quota is empty")
    exact = {r: target_size * c / total for r, c in base.items()}
    out = {r: math.floor(v) for r, v in exact.items()}
    short = target_size - sum(out.values())
    for r in sorted(exact, key=lambda r: (-(exact[r] - out[r]), r))[:short]:
        out[r] += 1
    return out


def _split_easy_across_rounds(quota, avail_easy, avail_hard, n_easy, target):
    lo = {r: max(0, q - avail_hard.get(r, 0)) for r, q in quota.items()}
    hi = {r: min(q, avail_easy.get(r, 0)) for r, q in quota.items()}
    for r in quota:
        if lo[r] > hi[r]:
            raise InfeasibleQuota(
                f"round {r}: need {quota[r]} samples but the pool has only "
                f"{avail_easy.get(r, 0)} easy + {avail_hard.get(r, 0)} hard"
            )
    if sum(lo.values()) > n_easy:
        raise InfeasibleQuota(f"stratum 'hard' too small to meet the round quotas with {target - n_easy} hard samples")
    if sum(hi.values()) < n_easy:
        raise InfeasibleQuota(f"stratum 'easy' too small to meet the round quotas with {n_easy} easy samples")
    ideal = {r: q * n_easy / target if target else 0.0 for r, q in quota.items()}
    e = {r: min(hi[r], max(lo[r], math.floor(ideal[r]))) for r in quota}
    diff = n_easy - sum(e.values())
    while diff > 0:
        r = max((r for r in quota if e[r] < hi[r]), key=lambda r: (ideal[r] - e[r], -r))
        e[r] += 1
        diff -= 1
    while diff < 0:
        r = max((r for r in quota if e[r] > lo[r]), key=lambda r: (e[r] - ideal[r], -r))
        e[r] -= 1
        diff += 1
    return e


def sample_curriculum(pool: Sequence[PoolEntry], spec: CurriculumSpec) -> list[str]:
    """Draw a curriculum split and return sample ids in pool order.

    Easy means ``edi_norm < spec.edi_threshold``. Raises InfeasibleQuota when
    a stratum (or a round/stratum cell) cannot be filled.
    """
    entries = [PoolEntry(*e) for e in pool]
    ids = [e.sample_id for e in entries]
    if len(set(ids)) != len(ids):
        raise ValueError("pool contains duplicate sample ids")

    n_easy, n_hard = stratum_counts(spec.target_size, spec.resolved_easy_fraction)
    rng = random.Random(spec.seed)

    def is_easy(e: PoolEntry) -> bool:
        return e.edi.edi_norm < spec.edi_threshold

    cells: dict[tuple, list[int]] = {}
    for pos, e in enumerate(entries):
        key = (e.round_count if spec.round_quota is not None else None, is_easy(e))
        cells.setdefault(key, []).append(pos)

    if spec.round_quota is None:
        need = {(None, True): n_easy, (None, False): n_hard}
    else:
        quota = {r: q for r, q in spec.round_quota.items() if q > 0}
        avail_easy = {r: len(cells.get((r, True), [])) for r in quota}
        avail_hard = {r: len(cells.get((r, False), [])) for r in quota}
        split = _split_easy_across_rounds(quota, avail_easy, avail_hard, n_easy, spec.target_size)
        need = {}
        for r in sorted(quota):
            need[(r, True)] = split[r]
            need[(r, False)] = quota[r] - split[r]

    chosen: list[int] = []
    for key in sorted(need, key=lambda k: (k[0] if k[0] is not None else -1, not k[1])):
        k = need[key]
        have = cells.get(key, [])
        if k > len(have):
            name = "easy" if key[1] else "hard"
            where = f" (round {key[0]})" if key[0] is not None else ""
            raise InfeasibleQuota(f"stratum '{name}'{where} has {len(have)} samples, need {k}")
        chosen.extend(rng.sample(have, k))
    return [ids[pos] for pos in sorted(chosen)]


def stratum_of(score: EdiScore, threshold: float = 0.5) -> str:
    return "easy" if score.edi_norm < threshold else "hard"
