"""Verifiable rewards: format, outcome (exact match / ROUGE), frame
identification, frame retrieval and the correctness-gated joint reward."""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Sequence, Union

from .actions import SpecificFrameRetrieval
from .corpus import FrameLabel, QAType
from .grammar import ParsedRollout, extract_answer, parse

FORMAT_REWARD = 0.5
MAX_TOTAL = 3.5


class ScoringError(ValueError):
    """Ground truth does not line up with the rollout being scored."""


@dataclass(frozen=True)
class RewardBreakdown:
    r_fmt: float
    r_outcome: float
    r_ide: float
    r_ret: float
    r_total: float
    task_type: QAType

    def to_dict(self) -> dict:
        d = asdict(self)
        d["task_type"] = self.task_type.value
        return d


def format_reward(rollout: ParsedRollout) -> float:
    return FORMAT_REWARD if rollout.well_formed else 0.0


# ---------------------------------------------------------------------------
# outcome rewards

_CHOICE_RE = re.compile(r"^\(?([A-Z])\s*[).:\]](?:\s|$)")
_TRAILING_PUNCT_RE = re.compile(r"[\s.,;:!?)\]]+$")


def normalize_choice(text: str) -> str:
    """Trim, uppercase, take the leading letter of ``C) ...``-shaped text,
    drop trailing punctuation."""
    t = text.strip().upper()
    m = _CHOICE_RE.match(t)
    if m:
        return m.group(1)
    return _TRAILING_PUNCT_RE.sub("", t)


def mc_reward(y: str, y_hat: str) -> float:
    """1 when the predicted choice equals the reference after normalization."""
    return 1.0 if normalize_choice(y) == normalize_choice(y_hat) else 0.0


_TOKEN_RE = re.compile(r"[^\W_]+")


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs; whitespace and punctuation separate tokens
    and are dropped."""
    return _TOKEN_RE.findall(text.lower())


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _f1(overlap: int, n_pred: int, n_ref: int) -> float:
    if overlap == 0:
        return 0.0
    precision = overlap / n_pred
    recall = overlap / n_ref
    return 2 * precision * recall / (precision + recall)


def rouge_n(y: str, y_hat: str, n: int = 1) -> float:
    """ROUGE-N F1 between prediction ``y`` and reference ``y_hat``.

    When neither side has an n-gram (e.g. single-word texts for n=2) the score
    is 1 for identical token sequences and 0 otherwise.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pred, ref = tokenize(y), tokenize(y_hat)
    pg, rg = _ngrams(pred, n), _ngrams(ref, n)
    n_pred, n_ref = sum(pg.values()), sum(rg.values())
    if n_pred == 0 and n_ref == 0:
        return 1.0 if pred == ref else 0.0
    if n_pred == 0 or n_ref == 0:
        return 0.0
    overlap = sum((pg & rg).values())
    return _f1(overlap, n_pred, n_ref)


def lcs_length(a: Sequence, b: Sequence) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, yb in enumerate(b):
            cur.append(prev[j] + 1 if x == yb else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l(y: str, y_hat: str) -> float:
    pred, ref = tokenize(y), tokenize(y_hat)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    return _f1(lcs_length(pred, ref), len(pred), len(ref))


def free_reward(y: str, y_hat: str) -> float:
    return (rouge_n(y, y_hat, 1) + rouge_n(y, y_hat, 2) + rouge_l(y, y_hat)) / 3.0


def outcome_reward(task_type: QAType, y: Optional[str], y_hat: str) -> float:
    if y is None:
        return 0.0
    if task_type is QAType.MULTI_CHOICE:
        return mc_reward(y, y_hat)
    return free_reward(y, y_hat)


# ---------------------------------------------------------------------------
# process rewards


def identification_reward(
    rollout: ParsedRollout, gt: Sequence[Mapping[int, FrameLabel]]
) -> float:
    """Mean over rounds of 3-way label accuracy on that round's visible frames.

    ``gt[k]`` maps every frame visible in round k to its true label; frames the
    rollout leaves unlabeled count as wrong.
    """
    if not rollout.well_formed:
        return 0.0
    if len(gt) != len(rollout.rounds):
        raise ScoringError(f"rollout has {len(rollout.rounds)} rounds, ground truth has {len(gt)}")
    if not gt:
        return 0.0
    accs = []
    for rnd, truth in zip(rollout.rounds, gt):
        if not truth:
            accs.append(0.0)
            continue
        hits = sum(1 for idx, lab in truth.items() if rnd.identification.get(int(idx)) == lab)
        accs.append(hits / len(truth))
    return sum(accs) / len(accs)


def retrieval_reward(rollout: ParsedRollout, retrieved: Sequence[Sequence[FrameLabel]]) -> float:
    """Mean over specific-retrieval actions of the fraction of returned frames
    that are evidence or contextual. No retrievals scores 1."""
    if not rollout.well_formed:
        return 0.0
    n_ret = sum(1 for a in rollout.actions() if isinstance(a, SpecificFrameRetrieval))
    if n_ret != len(retrieved):
        raise ScoringError(f"rollout has {n_ret} retrieval actions, ground truth has {len(retrieved)}")
    if n_ret == 0:
        return 1.0
    ratios = []
    for labels in retrieved:
        if not labels:
            ratios.append(0.0)
        else:
            ratios.append(sum(1 for lab in labels if lab is not FrameLabel.IRRELEVANT) / len(labels))
    return sum(ratios) / len(ratios)


def joint_reward(
    r_fmt: float, r_outcome: float, r_ide: float, r_ret: float, task_type: QAType
) -> RewardBreakdown:
    """Gated sum: process rewards only count once the outcome is positive."""
    if r_outcome > 0:
        total = r_fmt + r_outcome + r_ide + r_ret
    else:
        total = r_fmt + r_outcome
    return RewardBreakdown(r_fmt, r_outcome, r_ide, r_ret, total, task_type)


def score_rollout(
    rollout: Union[str, ParsedRollout],
    task_type: QAType,
    answer: str,
    gt_labels: Sequence[Mapping[int, FrameLabel]] = (),
    retrieved_labels: Sequence[Sequence[FrameLabel]] = (),
    raw_text: Optional[str] = None,
) -> RewardBreakdown:
    """Parse (if needed) and score one rollout end to end.

    Malformed rollouts get zero format/process reward and an outcome from any
    extractable answer block. Misaligned ground truth raises ScoringError.
    """
    if isinstance(rollout, str):
        raw_text = rollout
        rollout = parse(rollout)
    r_fmt = format_reward(rollout)
    if rollout.well_formed:
        y = rollout.answer
        r_ide = identification_reward(rollout, gt_labels)
        r_ret = retrieval_reward(rollout, retrieved_labels)
    else:
        y = extract_answer(raw_text) if raw_text is not None else rollout.answer
        r_ide = r_ret = 0.0
    r_o = outcome_reward(task_type, y, answer)
    return joint_reward(r_fmt, r_o, r_ide, r_ret, task_type)
