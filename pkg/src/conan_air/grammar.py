"""Canonical tagged rollout grammar: renderer and strict parser.

A rollout is one or more rounds followed by an optional answer::

    rollout        = round { round } [ answer ]
    round          = identification reasoning action
    identification = "<identification>" [ item { "," item } ] "</identification>"
    item           = index ":" ( "evidence" | "contextual" | "irrelevant" )
    reasoning      = "<reasoning>" text "</reasoning>"
    action         = "<action>" ( "random_frame_sampling"
                                | "specific_frame_retrieval" " " clip { "," clip }
                                | "confident_question_answering" ) "</action>"
    clip           = number "-" number
    answer         = "<answer>" text "</answer>"

Whitespace between blocks is ignored and payloads are trimmed. The answer is
present exactly when the last action is confident_question_answering, and no
earlier round may answer. Parsing never raises: malformed input comes back
with ``well_formed=False`` and a list of violations.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .actions import (
    Action,
    ConfidentQuestionAnswering,
    RandomFrameSampling,
    SpecificFrameRetrieval,
)
from .corpus import FrameLabel

TAGS = ("identification", "reasoning", "action", "answer")
_TAG_RE = re.compile(r"<(/?)(identification|reasoning|action|answer)>")
_ITEM_RE = re.compile(r"(\d{1,9}):(evidence|contextual|irrelevant)", re.ASCII)
_NUM = r"\d+(?:\.\d+)?(?:[eE][+-]?\d+)?"
_CLIP_RE = re.compile(rf"({_NUM})-({_NUM})", re.ASCII)


@dataclass
class ParsedRound:
    identification: dict[int, FrameLabel] = field(default_factory=dict)
    reasoning: str = ""
    action: Optional[Action] = None


@dataclass
class ParsedRollout:
    rounds: list[ParsedRound] = field(default_factory=list)
    answer: Optional[str] = None
    well_formed: bool = False
    violations: list[str] = field(default_factory=list)

    @property
    def terminal(self) -> bool:
        return bool(self.rounds) and isinstance(self.rounds[-1].action, ConfidentQuestionAnswering)

    def actions(self) -> list[Action]:
        return [r.action for r in self.rounds if r.action is not None]


# ---------------------------------------------------------------------------
# rendering


def _fmt_num(x: float) -> str:
    return repr(float(x))


def render_action(action: Action) -> str:
    if isinstance(action, SpecificFrameRetrieval):
        clips = ",".join(f"{_fmt_num(s)}-{_fmt_num(e)}" for s, e in action.clips)
        return f"{action.name} {clips}"
    return action.name


def _check_text(text: str, what: str):
    if text != text.strip():
        raise ValueError(f"{what} must not have surrounding whitespace")
    if _TAG_RE.search(text):
        raise ValueError(f"{what} must not contain grammar tags")


def render_round(rnd: ParsedRound, final: bool = False) -> str:
    if rnd.action is None:
        raise ValueError("round has no action")
    _check_text(rnd.reasoning, "reasoning")
    for idx in rnd.identification:
        if idx < 0:
            raise ValueError(f"negative frame index {idx}")
    ident = ",".join(f"{i}:{FrameLabel(lab).word}" for i, lab in rnd.identification.items())
    text = (
        f"<identification>{ident}</identification>\n"
        f"<reasoning>{rnd.reasoning}</reasoning>\n"
        f"<action>{render_action(rnd.action)}</action>"
    )
    if isinstance(rnd.action, ConfidentQuestionAnswering):
        if not final:
            raise ValueError("only the last round may answer")
        _check_text(rnd.action.answer, "answer")
        text += f"\n<answer>{rnd.action.answer}</answer>"
    return text


def render(rounds: Sequence[ParsedRound]) -> str:
    """Render rounds in the canonical grammar.

    The answer block comes from the final round's ConfidentQuestionAnswering.
    """
    if not rounds:
        raise ValueError("cannot render an empty rollout")
    parts = [render_round(r, final=(i == len(rounds) - 1)) for i, r in enumerate(rounds)]
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# parsing


def _tokenize(text: str, violations: list[str]) -> list[tuple[str, str]]:
    blocks = []
    pos = 0
    open_name = None
    open_end = 0
    for m in _TAG_RE.finditer(text):
        closing, name = m.group(1) == "/", m.group(2)
        if open_name is None:
            if text[pos : m.start()].strip():
                violations.append("stray text outside tags")
            if closing:
                violations.append(f"unexpected closing tag </{name}>")
            else:
                open_name, open_end = name, m.end()
        elif closing and name == open_name:
            blocks.append((name, text[open_end : m.start()].strip()))
            open_name = None
        else:
            violations.append(f"unbalanced tag <{open_name}>")
            open_name, open_end = (None, 0) if closing else (name, m.end())
        pos = m.end()
    if open_name is not None:
        violations.append(f"unclosed tag <{open_name}>")
    elif text[pos:].strip():
        violations.append("stray text outside tags")
    return blocks


def _parse_identification(payload: str, violations: list[str]) -> dict[int, FrameLabel]:
    out: dict[int, FrameLabel] = {}
    if not payload:
        return out
    for item in payload.split(","):
        m = _ITEM_RE.fullmatch(item)
        if m is None:
            head = item.split(":", 1)[0]
            if not (head.isascii() and head.isdigit()) or len(head) > 9:
                violations.append(f"invalid frame index {head[:20]!r}")
            else:
                violations.append(f"invalid identification item {item[:40]!r}")
            continue
        idx = int(m.group(1))
        if idx in out:
            violations.append(f"duplicate frame index {idx}")
            continue
        out[idx] = FrameLabel.from_word(m.group(2))
    return out


def parse_action(payload: str, violations: list[str]) -> Optional[Action]:
    if payload == RandomFrameSampling.name:
        return RandomFrameSampling()
    if payload == ConfidentQuestionAnswering.name:
        return ConfidentQuestionAnswering()
    head, _, rest = payload.partition(" ")
    if head == SpecificFrameRetrieval.name and rest:
        clips = []
        for part in rest.split(","):
            m = _CLIP_RE.fullmatch(part)
            if m is None:
                violations.append(f"invalid clip {part[:40]!r}")
                return None
            s, e = float(m.group(1)), float(m.group(2))
            if not (math.isfinite(s) and math.isfinite(e)) or e < s:
                violations.append(f"invalid clip {part[:40]!r}")
                return None
            clips.append((s, e))
        return SpecificFrameRetrieval(tuple(clips))
    violations.append(f"unknown action name {head[:40]!r}")
    return None


def parse(text) -> ParsedRollout:
    """Parse a rollout. Accepts str or bytes; never raises."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    if not isinstance(text, str):
        return ParsedRollout(violations=["input is not text"])
    violations: list[str] = []
    blocks = _tokenize(text, violations)

    rounds: list[ParsedRound] = []
    answer: Optional[str] = None
    cur: Optional[ParsedRound] = None
    seen: set[str] = set()
    answered = False

    for name, payload in blocks:
        if answered:
            violations.append("content after answer")
            continue
        if name == "identification":
            if cur is not None and cur.action is None:
                violations.append("missing action")
            if rounds and isinstance(rounds[-1].action, ConfidentQuestionAnswering):
                violations.append("round after confident_question_answering")
            cur = ParsedRound(identification=_parse_identification(payload, violations))
            rounds.append(cur)
            seen = {"identification"}
        elif name == "reasoning":
            if cur is None or cur.action is not None:
                violations.append("missing identification")
                cur = ParsedRound()
                rounds.append(cur)
                seen = set()
            if "reasoning" in seen:
                violations.append("multiple reasoning blocks")
            cur.reasoning = payload
            seen.add("reasoning")
        elif name == "action":
            if cur is None:
                violations.append("missing identification")
                cur = ParsedRound()
                rounds.append(cur)
                seen = set()
            if "action" in seen:
                violations.append("multiple actions")
                continue
            if "reasoning" not in seen:
                violations.append("missing reasoning")
            seen.add("action")
            cur.action = parse_action(payload, violations)
        else:  # answer
            last = rounds[-1].action if rounds else None
            if not isinstance(last, ConfidentQuestionAnswering):
                violations.append("answer without confident_question_answering")
            answer = payload
            answered = True
            if isinstance(last, ConfidentQuestionAnswering):
                rounds[-1].action = ConfidentQuestionAnswering(payload)

    if not rounds:
        violations.append("empty rollout")
    else:
        if "action" not in seen and not answered:
            violations.append("missing action")
        if isinstance(rounds[-1].action, ConfidentQuestionAnswering) and answer is None:
            violations.append("missing answer")

    return ParsedRollout(rounds=rounds, answer=answer, well_formed=not violations, violations=violations)


def extract_answer(text) -> Optional[str]:
    """Best-effort answer payload, used when a rollout is malformed."""
    if isinstance(text, (bytes, bytearray)):
        text = bytes(text).decode("utf-8", errors="replace")
    m = re.search(r"<answer>(.*?)</answer>", text, re.DOTALL)
    return m.group(1).strip() if m else None
