import math

import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conan_air.grpo import batch_advantages, group_advantages

rewards = st.lists(st.floats(-10, 10, allow_nan=False), min_size=1, max_size=64)


def test_constant_group():
    assert all(abs(a) <= 1e-8 for a in group_advantages([1, 1, 1, 1]))


def test_two_point_group():
    assert group_advantages([0, 1]) == pytest.approx([-1, 1], abs=1e-6)


def test_signs():
    adv = group_advantages([2.8, 0.5, 0.5, 0.5])
    assert adv[0] > 0 and all(a < 0 for a in adv[1:])
    assert abs(sum(adv)) <= 1e-6 * 4


def test_matches_direct_formula():
    r = [0.5, 3.5, 1.2, 2.8, 0.0]
    mean = sum(r) / len(r)
    std = math.sqrt(sum((x - mean) ** 2 for x in r) / len(r))
    assert group_advantages(r) == pytest.approx([(x - mean) / (std + 1e-8) for x in r], abs=1e-12)


@pytest.mark.parametrize("bad", [[], [1.0, float("nan")], [float("inf")]])
def test_rejects(bad):
    with pytest.raises(ValueError):
        group_advantages(bad)


def test_batch():
    assert batch_advantages([[1, 1], [0, 1]]) == [group_advantages([1, 1]), group_advantages([0, 1])]
    assert batch_advantages([]) == []


@given(rewards, st.floats(-100, 100))
def test_sum_zero_and_shift_invariance(r, c):
    # spreads near epsilon lose their digits to the shift itself
    spread = max(r) - min(r)
    assume(spread == 0 or spread >= 1e-6)
    adv = group_advantages(r)
    assert len(adv) == len(r)
    assert abs(sum(adv)) <= 1e-6 * len(r)
    shifted = group_advantages([x + c for x in r])
    assert max(abs(a - b) for a, b in zip(adv, shifted)) <= 1e-6


@given(st.lists(st.floats(1, 10), min_size=2, max_size=64), st.floats(0.5, 20))
def test_scale_invariance(r, c):
    if max(r) - min(r) < 1e-3:
        return
    a, b = group_advantages(r), group_advantages([x * c for x in r])
    assert max(abs(x - y) for x, y in zip(a, b)) <= 1e-4
