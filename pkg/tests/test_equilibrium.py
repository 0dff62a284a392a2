import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from csc_sim.equilibrium import (
    attack_result,
    best_response,
    best_responses,
    marginal_cost,
    marginal_rewards,
    verify_dominance,
)
from csc_sim.errors import EffortOutOfRange
from csc_sim.model import GameParams, RewardScheme, TypeProfile, cost

# root of marginal_cost(e) = 30 at gamma=0.35, award=100, e_max=2 (mpmath findroot, 30 digits)
ROOT_MR30 = 0.527985083723204865983921802267


def grid_argmax(mr, params, step=1e-5):
    grid = np.linspace(0.0, 1.0, int(round(1 / step)) + 1)
    values = mr * grid - params.cost_factor_c * np.expm1(grid) / (params.e_max - grid)
    return grid[np.argmax(values)]


def test_marginal_cost_examples():
    p = GameParams(award=100, e_max=2.0, cost_factor_c=1.0)
    assert marginal_cost(0.0, p) == pytest.approx(1 / 2)
    assert marginal_cost(1.0, p) == pytest.approx(2 * math.e - 1, rel=1e-15)
    with pytest.raises(EffortOutOfRange):
        marginal_cost(2.0, p)


@pytest.mark.parametrize("e", [0.05, 0.3, 0.5, 0.9, 1.4])
def test_marginal_cost_matches_central_difference(e):
    p = GameParams(award=100, e_max=2.0, cost_factor_c=7.0)
    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        fd = (cost(e + h, p) - cost(e - h, p)) / (2 * h)
        errs.append(abs(fd - marginal_cost(e, p)))
    # halving h quarters the error
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4, rel=0.05)


def test_best_response_examples(params):
    assert best_response(0.0, params) == 0.0
    assert marginal_cost(0.0, params) == pytest.approx(10.1845923702, rel=1e-10)
    assert best_response(10.0, params) == 0.0
    e = best_response(30.0, params)
    assert e == pytest.approx(ROOT_MR30, abs=1e-10)
    assert e == pytest.approx(grid_argmax(30.0, params), abs=1e-4)
    assert best_response(1e6, params) == 1.0


def test_best_response_rejects_negative(params):
    with pytest.raises(ValueError):
        best_response(-1.0, params)


@settings(max_examples=300)
@given(st.floats(0.3, 0.5), st.floats(1.05, 4.0), st.floats(0.0, 1.0))
def test_root_correctness(gamma, e_max, u):
    p = GameParams.from_gamma(gamma, award=100, e_max=e_max)
    lo, hi = marginal_cost(0.0, p), marginal_cost(1.0, p)
    mr = lo + u * (hi - lo)
    e = best_response(mr, p)
    assert 0.0 <= e <= 1.0
    if lo < mr < hi:
        assert abs(marginal_cost(e, p) - mr) <= 1e-8 * max(1.0, mr)


@settings(max_examples=100)
@given(st.floats(0.0, 200.0), st.floats(0.0, 200.0))
def test_best_response_monotone(a, b):
    p = GameParams.from_gamma(0.4, award=100, e_max=2.5)
    a, b = sorted((a, b))
    assert best_response(a, p) <= best_response(b, p)


def test_grid_oracle_equivalence(rng):
    draws = 1000
    for _ in range(draws):
        p = GameParams.from_gamma(rng.uniform(0.1, 0.8), award=100, e_max=rng.uniform(1.1, 4.0))
        mr = rng.uniform(0, 1.2 * marginal_cost(1.0, p))
        assert abs(best_response(mr, p) - grid_argmax(mr, p)) <= 1e-4


def test_vectorised_matches_scalar(params, rng):
    mrs = rng.uniform(0, 100, size=50)
    vec = best_responses(mrs, params)
    assert [best_response(m, params) for m in mrs] == list(vec)


def test_attack_result_all_zero(params):
    prof = TypeProfile((0.01,) * 30)
    assert np.all(marginal_rewards(prof, "linear", params) < params.cost_factor_c / params.e_max)
    eq = attack_result(prof, "linear", params)
    assert eq.efforts == (0.0,) * 30
    assert eq.attack_result == 0.0


def test_identical_attackers_identical_efforts(params):
    eq = attack_result(TypeProfile((0.1,) * 12), "linear", params)
    assert len(set(eq.efforts)) == 1
    assert eq.attack_result == min(eq.raw_total, 1.0)


def test_square_attracts_more_than_linear(params, rng):
    for _ in range(20):
        raw = rng.uniform(1, 10, size=30)
        prof = TypeProfile(tuple(raw / raw.sum()))
        lin = attack_result(prof, "linear", params).attack_result
        sq = attack_result(prof, "square", params).attack_result
        assert sq >= lin


def test_linear_effort_ignores_other_entries(params, rng):
    raw = rng.uniform(0.01, 0.1, size=10)
    base = attack_result(TypeProfile(tuple(raw)), "linear", params).efforts[0]
    for _ in range(10):
        shuffled = np.concatenate([[raw[0]], rng.permutation(raw[1:])])
        assert attack_result(TypeProfile(tuple(shuffled)), "linear", params).efforts[0] == pytest.approx(base, abs=1e-12)


def test_linear_effort_nondecreasing_in_own_type(params):
    others = (0.1, 0.2, 0.05)
    efforts = [attack_result(TypeProfile((t,) + others), "linear", params).efforts[0]
               for t in np.linspace(0.01, 0.9, 40)]
    assert all(a <= b for a, b in zip(efforts, efforts[1:]))


def test_attack_result_capped(params):
    eq = attack_result(TypeProfile((0.6, 0.6, 0.6)), "linear", params)
    assert eq.raw_total > 1.0
    assert eq.attack_result == 1.0
    assert sum(eq.delivered) == pytest.approx(1.0)


def test_verify_dominance_interior(params, rng):
    prof = TypeProfile((0.3, 0.2, 0.25))
    assert 0 < best_response(marginal_rewards(prof, "linear", params)[0], params) < 1
    for _ in range(5):
        rep = verify_dominance(prof, 0, rng.uniform(0, 1, size=2), params, grid_step=1e-3)
        assert rep.dominant


def test_verify_dominance_boundary_zero(params, rng):
    prof = TypeProfile((0.01, 0.5, 0.4))
    rep = verify_dominance(prof, 0, rng.uniform(0, 1, size=2), params, grid_step=1e-3)
    assert rep.candidate == 0.0
    assert rep.dominant and rep.grid_argmax == 0.0


def test_verify_dominance_negative_control(params):
    prof = TypeProfile((0.3, 0.2, 0.25))
    star = best_response(marginal_rewards(prof, "linear", params)[0], params)
    rep = verify_dominance(prof, 0, [0.4, 0.1], params, grid_step=1e-3, candidate=star + 0.1)
    assert not rep.dominant
    assert rep.max_violation > 0
