"""Independent reference implementations and sample builders for tests.

The oracles here deliberately avoid the package's own helpers: n-grams are
counted by brute-force enumeration, LCS uses the full quadratic table, and the
action rule is re-derived with exact fractions.
"""

from fractions import Fraction
from itertools import groupby

from conan_air.corpus import CorpusSample, FrameLabel, FrameRecord, Option, QAType, categorize_frame

E, C, I = FrameLabel.EVIDENCE, FrameLabel.CONTEXTUAL, FrameLabel.IRRELEVANT
_SCORE = {E: 0.9, C: 0.5, I: 0.1}


def make_sample(labels, sample_id="s0", qa_type=QAType.MULTI_CHOICE, answer=None, interval=1.0):
    frames = tuple(
        FrameRecord(i, i * interval, f"[{lab.word}] frame {i}", _SCORE[lab], categorize_frame(_SCORE[lab]))
        for i, lab in enumerate(labels)
    )
    if qa_type is QAType.MULTI_CHOICE:
        return CorpusSample(
            sample_id,
            frames,
            "Which option?",
            qa_type,
            answer or "C",
            tuple(Option(x, f"option {x}") for x in "ABCD"),
        )
    return CorpusSample(sample_id, frames, "What happens?", qa_type, answer or "a dog runs across the field")


# ---------------------------------------------------------------------------
# ROUGE oracles


def oracle_tokens(text):
    out, cur = [], []
    for ch in text.lower():
        if ch.isalnum():
            cur.append(ch)
        elif cur:
            out.append("".join(cur))
            cur = []
    if cur:
        out.append("".join(cur))
    return out


def oracle_rouge_n(pred, ref, n):
    p, r = oracle_tokens(pred), oracle_tokens(ref)
    pg = [tuple(p[i : i + n]) for i in range(len(p) - n + 1)]
    rg = [tuple(r[i : i + n]) for i in range(len(r) - n + 1)]
    if not pg and not rg:
        return 1.0 if p == r else 0.0
    if not pg or not rg:
        return 0.0
    # clipped overlap by matching each predicted n-gram to an unused reference one
    used = [False] * len(rg)
    overlap = 0
    for g in pg:
        for j, h in enumerate(rg):
            if not used[j] and g == h:
                used[j] = True
                overlap += 1
                break
    if overlap == 0:
        return 0.0
    prec, rec = overlap / len(pg), overlap / len(rg)
    return 2 * prec * rec / (prec + rec)


def oracle_lcs(a, b):
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[len(a)][len(b)]


def oracle_rouge_l(pred, ref):
    p, r = oracle_tokens(pred), oracle_tokens(ref)
    if not p and not r:
        return 1.0
    if not p or not r:
        return 0.0
    lcs = oracle_lcs(p, r)
    if lcs == 0:
        return 0.0
    prec, rec = lcs / len(p), lcs / len(r)
    return 2 * prec * rec / (prec + rec)


# ---------------------------------------------------------------------------
# action rule oracle


def oracle_decide(labels_by_index, timestamps, threshold, round_index, max_rounds):
    """Returns ("answer"|"random"|"retrieve", windows)."""
    if round_index >= max_rounds:
        return "answer", ()
    order = sorted(labels_by_index)
    n_ev = sum(labels_by_index[i] == E for i in order)
    # thresholds are decimal settings: 0.1 means 1/10, not its binary expansion
    thr = threshold if isinstance(threshold, Fraction) else Fraction(str(threshold))
    if Fraction(n_ev, len(order)) >= thr:
        return "answer", ()
    if all(labels_by_index[i] == I for i in order):
        return "random", ()
    windows = []
    for relevant, grp in groupby(order, key=lambda i: labels_by_index[i] != I):
        grp = list(grp)
        if relevant:
            windows.append((timestamps[grp[0]], timestamps[grp[-1]]))
    return "retrieve", tuple(windows)


# ---------------------------------------------------------------------------
# EDI oracle


def oracle_edi(labels):
    n = len(labels)
    ev = [Fraction(i, n - 1) if n > 1 else Fraction(0) for i, lab in enumerate(labels) if lab == E]
    if not ev:
        return Fraction(1), Fraction(1, 4)
    p = Fraction(len(ev), n)
    mean = sum(ev) / len(ev)
    var = sum((x - mean) ** 2 for x in ev) / len(ev)
    paper = (1 - p) * var
    return paper * 4, paper
