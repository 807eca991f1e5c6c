import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conan_air.corpus import (
    CorpusError,
    FrameLabel,
    LabelThresholds,
    SyntheticSpec,
    categorize_frame,
    gen_synthetic,
    ingest,
    serialize,
)

T = LabelThresholds(0.7, 0.3)


def record(sample_id="v1", answer="B", options="ABCD", frames=None, **extra):
    rec = {
        "sample_id": sample_id,
        "question": "What is the man holding?",
        "qa_type": "multi_choice",
        "options": [{"label": x, "text": f"thing {x}"} for x in options],
        "answer": answer,
        "frames": frames
        or [
            {"timestamp": 0.0, "description": "a hallway", "relevance_score": 0.1},
            {"timestamp": 1.5, "description": "a man walks in", "relevance_score": 0.4},
            {"timestamp": 3.0, "description": "he lifts a red ball", "relevance_score": 0.95},
        ],
    }
    rec.update(extra)
    return json.dumps(rec)


@pytest.mark.parametrize(
    "score, expected",
    [(0.9, FrameLabel.EVIDENCE), (0.0, FrameLabel.IRRELEVANT), (0.3, FrameLabel.CONTEXTUAL), (0.7, FrameLabel.EVIDENCE)],
)
def test_categorize_examples(score, expected):
    assert categorize_frame(score, T) is expected


@pytest.mark.parametrize("score", [-0.01, 1.01, float("nan")])
def test_categorize_rejects_out_of_range(score):
    with pytest.raises(ValueError):
        categorize_frame(score, T)


def test_label_order():
    assert FrameLabel.EVIDENCE > FrameLabel.CONTEXTUAL > FrameLabel.IRRELEVANT


@given(st.floats(0, 1), st.floats(0, 1))
def test_categorize_monotone(a, b):
    lo, hi = sorted((a, b))
    assert categorize_frame(hi, T) >= categorize_frame(lo, T)


@given(
    st.floats(0, 1),
    st.floats(0.01, 1).flatmap(lambda te: st.tuples(st.just(te), st.floats(0, te, exclude_max=True))),
)
def test_categorize_partition(score, th):
    thresholds = LabelThresholds(*th)
    label = categorize_frame(score, thresholds)
    hits = [
        score >= thresholds.t_evidence,
        thresholds.t_contextual <= score < thresholds.t_evidence,
        score < thresholds.t_contextual,
    ]
    assert sum(hits) == 1
    assert label is [FrameLabel.EVIDENCE, FrameLabel.CONTEXTUAL, FrameLabel.IRRELEVANT][hits.index(True)]


def test_thresholds_validated():
    with pytest.raises(ValueError):
        LabelThresholds(0.3, 0.3)
    with pytest.raises(ValueError):
        LabelThresholds(0.0, 0.0)


def test_ingest_counts_and_labels():
    samples = ingest([record("a"), record("b")])
    assert [s.sample_id for s in samples] == ["a", "b"]
    assert samples[0].labels == (FrameLabel.IRRELEVANT, FrameLabel.CONTEXTUAL, FrameLabel.EVIDENCE)


def test_ingest_empty():
    assert ingest([]) == []
    assert ingest(["\n", "  "]) == []


def test_ingest_answer_not_in_options_names_line():
    with pytest.raises(CorpusError) as err:
        ingest([record("a"), record("b", answer="E")])
    assert err.value.line == 2
    assert "line 2" in str(err.value)


def test_ingest_rejects_non_monotonic_timestamps():
    frames = [
        {"timestamp": 1.0, "description": "x", "relevance_score": 0.1},
        {"timestamp": 1.0, "description": "y", "relevance_score": 0.1},
    ]
    with pytest.raises(CorpusError, match="line 1"):
        ingest([record(frames=frames)])


@pytest.mark.parametrize(
    "line",
    ["{not json", json.dumps({"sample_id": "x"}), record(extra_field=1), record(qa_type="essay")],
)
def test_ingest_rejects_malformed(line):
    with pytest.raises(CorpusError):
        ingest([line])


def test_ingest_normalizes_by_max_scale():
    frames = [
        {"timestamp": 0.0, "description": "x", "relevance_score": 2},
        {"timestamp": 1.0, "description": "y", "relevance_score": 9},
    ]
    (s,) = ingest([record(frames=frames, max_scale=10)])
    assert [f.relevance_score for f in s.frames] == [0.2, 0.9]
    assert s.labels == (FrameLabel.IRRELEVANT, FrameLabel.EVIDENCE)


def test_free_form_needs_no_options():
    rec = json.loads(record())
    rec.pop("options")
    rec["qa_type"] = "free_form"
    rec["answer"] = "a red ball"
    (s,) = ingest([json.dumps(rec)])
    assert s.options is None


def test_serialize_round_trip():
    samples = ingest([record("a"), record("b", max_scale=1.0)])
    again = ingest(serialize(samples).splitlines())
    assert again == samples


@given(st.integers(0, 5), st.integers(1, 20), st.integers(0, 10_000))
def test_synthetic_round_trip(n_samples, n_frames, seed):
    samples = gen_synthetic(SyntheticSpec(n_samples, n_frames, seed=seed))
    assert ingest(serialize(samples).splitlines()) == samples


def test_synthetic_is_deterministic():
    spec = SyntheticSpec(n_samples=10, n_frames=24, seed=42)
    assert serialize(gen_synthetic(spec)) == serialize(gen_synthetic(spec))
    assert serialize(gen_synthetic(spec)) != serialize(gen_synthetic(SyntheticSpec(10, 24, seed=43)))


def test_synthetic_forced_ratio():
    samples = gen_synthetic(SyntheticSpec(n_samples=5, n_frames=17, evidence_ratio_range=(1.0, 1.0)))
    assert all(lab is FrameLabel.EVIDENCE for s in samples for lab in s.labels)


def test_synthetic_zero_samples():
    assert gen_synthetic(SyntheticSpec(n_samples=0)) == []


def test_synthetic_descriptions_name_the_label():
    for s in gen_synthetic(SyntheticSpec(n_samples=3, n_frames=20, seed=1)):
        for f in s.frames:
            assert f.label.word in f.description


def test_synthetic_rejects_empty_range():
    with pytest.raises(ValueError):
        SyntheticSpec(evidence_ratio_range=(0.6, 0.4))
    with pytest.raises(ValueError):
        SyntheticSpec(n_frames=0)
