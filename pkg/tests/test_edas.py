import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conan_air.edas import (
    CurriculumSpec,
    EdiScore,
    InfeasibleQuota,
    PoolEntry,
    Stage,
    edi,
    edi_from_labels,
    evidence_ratio,
    sample_curriculum,
    scale_round_quota,
    stratum_counts,
    temporal_variance,
)
from helpers import C, E, I, make_sample, oracle_edi

labels_st = st.lists(st.sampled_from([E, C, I]), min_size=1, max_size=40)


@pytest.mark.parametrize("labels, p", [([E, E, E, E], 1.0), ([E, C, I, I], 0.25), ([I, I], 0.0)])
def test_evidence_ratio(labels, p):
    assert evidence_ratio(labels) == p


def test_evidence_ratio_empty():
    with pytest.raises(ValueError):
        evidence_ratio([])


@pytest.mark.parametrize("xs, var", [([0.5], 0.0), ([0.0, 1.0], 0.25), ([0.2, 0.2, 0.2], 0.0)])
def test_temporal_variance(xs, var):
    assert temporal_variance(xs) == var


def test_temporal_variance_rejects_out_of_range():
    with pytest.raises(ValueError):
        temporal_variance([0.5, 1.5])


def test_edi_all_evidence_is_zero():
    s = make_sample([E, E, E, E, E])
    assert edi(s).edi_paper == 0.0


def test_edi_two_endpoints():
    s = make_sample([E, I, I, E])
    assert edi(s) == EdiScore(p=0.5, var_raw=0.25, edi_paper=0.125, edi_norm=0.5)


def test_edi_no_evidence_is_max():
    assert edi(make_sample([I, C, I, I])).edi_norm == 1.0


def test_edi_single_evidence_is_zero():
    assert edi(make_sample([I, E, I, C])).edi_norm == 0.0


def test_edi_time_positions():
    s = make_sample([E, I, E], interval=2.0)
    assert edi(s, "time").var_raw == pytest.approx(0.25)
    with pytest.raises(ValueError):
        edi(s, "seconds")


@given(labels_st)
def test_edi_bounds_and_oracle(labels):
    score = edi_from_labels(labels)
    norm, paper = oracle_edi(labels)
    assert 0.0 <= score.edi_norm <= 1.0
    assert score.edi_paper == pytest.approx(0.25 * score.edi_norm, abs=1e-12)
    assert score.edi_norm == pytest.approx(float(norm), abs=1e-12)
    assert score.edi_paper == pytest.approx(float(paper), abs=1e-12)


# ---------------------------------------------------------------------------
# curriculum


def pool_of(n_easy, n_hard, rounds=lambda k: 1):
    easy = EdiScore(0.5, 0.1, 0.05, 0.2)
    hard = EdiScore(0.1, 0.25, 0.225, 0.9)
    pool = [PoolEntry(f"e{k:03d}", easy, rounds(k)) for k in range(n_easy)]
    pool += [PoolEntry(f"h{k:03d}", hard, rounds(k)) for k in range(n_hard)]
    return pool


def split(ids):
    return sum(i.startswith("e") for i in ids), sum(i.startswith("h") for i in ids)


def test_sft_composition():
    ids = sample_curriculum(pool_of(50, 50), CurriculumSpec(Stage.SFT, 10))
    assert split(ids) == (7, 3)


def test_rlvr_composition():
    ids = sample_curriculum(pool_of(50, 50), CurriculumSpec(Stage.RLVR, 10))
    assert split(ids) == (3, 7)


def test_rlvr_needs_hard_samples():
    with pytest.raises(InfeasibleQuota, match="hard"):
        sample_curriculum(pool_of(100, 0), CurriculumSpec(Stage.RLVR, 10))


@pytest.mark.parametrize(
    "size, frac, expected",
    [(10, 0.7, (7, 3)), (1000, 0.7, (700, 300)), (1000, 0.3, (300, 700)), (7, 0.7, (5, 2)), (3, 0.3, (1, 2))],
)
def test_stratum_rounding_floors_hard(size, frac, expected):
    assert stratum_counts(size, frac) == expected


def test_threshold_boundary_is_hard():
    at = EdiScore(0.0, 0.125, 0.125, 0.5)
    ids = sample_curriculum([PoolEntry("x", at, 1)], CurriculumSpec(Stage.SFT, 1, easy_fraction=0.0))
    assert ids == ["x"]


@settings(max_examples=50)
@given(st.integers(0, 60), st.integers(0, 60), st.integers(0, 40), st.integers(0, 2**31), st.sampled_from(list(Stage)))
def test_curriculum_properties(n_easy, n_hard, size, seed, stage):
    pool = pool_of(n_easy, n_hard)
    spec = CurriculumSpec(stage, size, seed=seed)
    want = stratum_counts(size, spec.resolved_easy_fraction)
    try:
        ids = sample_curriculum(pool, spec)
    except InfeasibleQuota:
        assert want[0] > n_easy or want[1] > n_hard
        return
    assert split(ids) == want
    assert len(set(ids)) == len(ids)
    assert ids == sample_curriculum(pool, spec)


def test_round_quota_exact():
    pool = pool_of(60, 60, rounds=lambda k: 1 + k % 3)
    quota = {1: 5, 2: 3, 3: 2}
    ids = sample_curriculum(pool, CurriculumSpec(Stage.SFT, 10, round_quota=quota, seed=3))
    by_id = {p.sample_id: p for p in pool}
    got = {r: sum(by_id[i].round_count == r for i in ids) for r in quota}
    assert got == quota
    assert split(ids) == (7, 3)


def test_round_quota_infeasible_names_round():
    pool = pool_of(10, 10, rounds=lambda k: 1)
    with pytest.raises(InfeasibleQuota, match="round 3"):
        sample_curriculum(pool, CurriculumSpec(Stage.SFT, 10, round_quota={1: 8, 3: 2}))


def test_round_quota_must_sum():
    with pytest.raises(ValueError):
        CurriculumSpec(Stage.SFT, 10, round_quota={1: 5})


def test_scale_round_quota():
    assert scale_round_quota(60_000) == {1: 25_000, 2: 25_000, 3: 10_000}
    q = scale_round_quota(10)
    assert sum(q.values()) == 10 and q == {1: 4, 2: 4, 3: 2}
    assert sum(scale_round_quota(1000).values()) == 1000


def test_duplicate_ids_rejected():
    pool = pool_of(2, 2)
    with pytest.raises(ValueError):
        sample_curriculum(pool + pool[:1], CurriculumSpec(Stage.SFT, 2))


def test_pool_accepts_corpus_samples():
    s = make_sample([E, I, I, E], sample_id="real")
    ids = sample_curriculum([(s, edi(s), 2)], CurriculumSpec(Stage.RLVR, 1, easy_fraction=0.0))
    assert ids == ["real"]
