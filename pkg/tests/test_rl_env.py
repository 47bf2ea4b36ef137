import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptive_sci.rl_env import (
    ACTIONS,
    Action,
    RewardConfig,
    StateSpace,
    TransitionModel,
    psnr_band_reward,
    reward,
    reward_set,
    step,
    transition_distribution,
)

D, K, I = Action.DECREASE, Action.KEEP, Action.INCREASE
T03 = TransitionModel(alpha=0.3, beta=0.3)


# --- types ------------------------------------------------------------------------

def test_state_space_defaults_and_validation():
    s = StateSpace()
    assert s.values == (6, 8, 10, 12, 15, 20)
    assert (s.bmin, s.bmax, s.last) == (6, 20, 5)
    for bad in ((6,), (6, 6), (10, 8), (0, 5)):
        with pytest.raises(ValueError):
            StateSpace(bad)
    with pytest.raises(ValueError):
        s.index(7)


def test_exactly_three_actions():
    assert len(ACTIONS) == 3
    assert Action.parse(" keep ") is K
    with pytest.raises(ValueError):
        Action.parse("jump")


@pytest.mark.parametrize("kw", [dict(alpha=-0.1), dict(beta=1.1)])
def test_transition_model_validation(kw):
    with pytest.raises(ValueError):
        TransitionModel(**kw)


@pytest.mark.parametrize("kw", [dict(r1=0.0), dict(r2=0.5), dict(lambda1=2.0), dict(lambda2=1.0),
                                dict(psnr_low=30.0), dict(drth=1.0)])
def test_reward_config_validation(kw):
    with pytest.raises(ValueError):
        RewardConfig(**kw)


# --- transitions on the three-state table ------------------------------------------

# rows of the three-state table, indices into [6, 10, 15], alpha = beta = 0.3
TABLE_3 = {
    (0, D): {0: 1.0},
    (0, K): {0: 1.0},
    (0, I): {1: 0.3, 2: 0.7},
    (1, D): {0: 1.0},
    (1, K): {1: 1.0},
    (1, I): {2: 1.0},
    (2, D): {0: 0.3, 1: 0.7},
    (2, K): {2: 1.0},
    (2, I): {2: 1.0},
}


@pytest.mark.parametrize("s,a", list(TABLE_3))
def test_three_state_rows(s, a):
    assert dict(transition_distribution(s, a, T03, 3)) == pytest.approx(TABLE_3[s, a], abs=1e-15)


def test_decrease_from_top_of_three_states_example():
    assert transition_distribution(2, D, TransitionModel(beta=0.3), 3) == [(0, 0.3), (1, 0.7)]


def test_keep_is_identity_everywhere():
    for s in range(6):
        assert transition_distribution(s, K, TransitionModel()) == [(s, 1.0)]


def test_six_state_interior_rows():
    t = TransitionModel(alpha=0.6, beta=0.2)
    assert transition_distribution(2, I, t) == [(3, 0.6), (4, pytest.approx(0.4))]
    assert transition_distribution(3, D, t) == [(1, 0.2), (2, 0.8)]
    assert transition_distribution(4, I, t) == [(5, 1.0)]
    assert transition_distribution(1, D, t) == [(0, 1.0)]


@given(st.integers(2, 9), st.floats(0, 1), st.floats(0, 1))
def test_distributions_sum_to_one(n, alpha, beta):
    t = TransitionModel(alpha, beta)
    for s, a in itertools.product(range(n), ACTIONS):
        dist = transition_distribution(s, a, t, n)
        assert all(p >= 0 for _, p in dist)
        assert sum(p for _, p in dist) == 1.0
        assert all(0 <= j < n and abs(j - s) <= 2 for j, _ in dist)


def test_bad_state_index():
    with pytest.raises(ValueError):
        transition_distribution(6, K, TransitionModel())


@pytest.mark.parametrize("s,a", [(0, I), (2, D), (0, D), (1, I)])
def test_step_frequencies_match_distribution(s, a):
    rng = np.random.default_rng(1234)
    n = 10_000
    draws = np.array([step(s, a, T03, rng, 3) for _ in range(n)])
    for j, p in TABLE_3[s, a].items():
        assert abs(np.mean(draws == j) - p) <= 0.02


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.floats(0, 1), st.floats(0, 1))
def test_step_stays_inside_and_boundaries_are_no_ops(seed, n, alpha, beta):
    rng = np.random.default_rng(seed)
    t = TransitionModel(alpha, beta)
    assert step(0, D, t, rng, n) == 0
    assert step(n - 1, I, t, rng, n) == n - 1
    for _ in range(20):
        s = int(rng.integers(n))
        assert 0 <= step(s, Action(int(rng.integers(3))), t, rng, n) < n


def test_step_uses_one_draw_per_call():
    a, b = np.random.default_rng(5), np.random.default_rng(5)
    step(1, K, TransitionModel(), a)
    step(2, I, TransitionModel(), a)
    b.random()
    b.random()
    assert a.random() == b.random()


# --- reward ------------------------------------------------------------------------

# Base outcome per (rate side, action, position), written out from the branch rules:
# below the threshold only Decrease, or Keep at the bottom, is encouraged;
# at or above it only Increase, or Keep at the top.
BASE = {
    ("low", D, "min"): +1, ("low", D, "mid"): +1, ("low", D, "max"): +1,
    ("low", K, "min"): +1, ("low", K, "mid"): -1, ("low", K, "max"): -1,
    ("low", I, "min"): -1, ("low", I, "mid"): -1, ("low", I, "max"): -1,
    ("high", D, "min"): -1, ("high", D, "mid"): -1, ("high", D, "max"): -1,
    ("high", K, "min"): -1, ("high", K, "mid"): -1, ("high", K, "max"): +1,
    ("high", I, "min"): +1, ("high", I, "mid"): +1, ("high", I, "max"): +1,
}
# (base sign, psnr case) -> final reward with r1=1, r2=-1, lambda1=1.5, lambda2=0.5
MODULATED = {
    (+1, "none"): 1.0, (+1, "above"): 1.5, (+1, "below"): 0.5,
    (-1, "none"): -1.0, (-1, "above"): -0.5, (-1, "below"): -1.5,
}
POSITION = {"min": 0, "mid": 2, "max": 5}


def test_truth_table_all_54_cases():
    cfg = RewardConfig()
    rates = {"low": cfg.drth - 0.1, "high": cfg.drth + 0.1}
    psnrs = {"none": None, "below": cfg.psnrth - 2, "above": cfg.psnrth + 2}
    n = 0
    for (side, a, pos), sign in BASE.items():
        for case, p in psnrs.items():
            got = reward(a, POSITION[pos], rates[side], p, cfg)
            assert got == MODULATED[sign, case], (side, a, pos, case)
            n += 1
    assert n == 54


@pytest.mark.parametrize("a,s,rate,p,expected", [
    (D, 2, 0.6, None, 1.0),
    (D, 2, 0.9, None, -1.0),
    (K, 0, 0.6, None, 1.0),
    (I, 2, 0.75, None, 1.0),        # the threshold itself counts as acceptable
    (I, 2, 0.9, 26.0, 0.5),         # psnr equal to psnrth takes the weakening branch
])
def test_reward_examples(a, s, rate, p, expected):
    assert reward(a, s, rate, p) == expected


def test_reward_example_with_higher_psnr_threshold():
    assert reward(I, 2, 0.9, 30.0, RewardConfig(psnrth=28.0)) == 1.5


def test_reward_rejects_rate_outside_unit_interval():
    with pytest.raises(ValueError):
        reward(K, 1, 1.2)


@given(st.sampled_from(ACTIONS), st.integers(0, 5), st.floats(0, 1),
       st.one_of(st.none(), st.floats(0, 60)))
def test_reward_lands_in_finite_set(a, s, rate, p):
    assert reward(a, s, rate, p) in set(reward_set(RewardConfig()))


def test_reward_respects_state_count():
    # with three states the top is index 2, so Keep there is rewarded on a good rate
    assert reward(K, 2, 0.9, n_states=3) == 1.0
    assert reward(K, 2, 0.9) == -1.0


# --- PSNR band reward ------------------------------------------------------------------

@pytest.mark.parametrize("p,B,expected", [(26.0, 10, 20.0), (24.0, 6, 0.0), (24.0, 20, 0.0),
                                          (22.0, 10, -20.0), (30.0, 6, 36.0)])
def test_psnr_band_examples(p, B, expected):
    assert psnr_band_reward(p, B) == pytest.approx(expected, abs=1e-12)


@given(st.floats(0, 60), st.sampled_from([6, 8, 10, 12, 15]))
def test_psnr_band_monotone_in_b(p, B):
    lo, hi = psnr_band_reward(p, B), psnr_band_reward(p, B + 5)
    if p > 24:
        assert hi > lo
    elif p < 24:
        assert hi < lo
