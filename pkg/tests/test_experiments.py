import dataclasses
import math

import numpy as np
import pytest

from csc_sim.errors import ConfigError
from csc_sim.experiments import (
    InvariantViolation,
    ScenarioConfig,
    SWEEP_COLUMNS,
    evaluate_profile,
    parse_config,
    random_profile,
    sample_bets,
    series_sweep,
    sweep,
    sweep_to_csv,
)
from csc_sim.mechanism import check_ex_post_ir, fairness_score, payments, quasi_utility
from csc_sim.model import GameParams, RewardScheme, cost


def small(**kw):
    base = dict(replicates=8, sweep_steps=6, seed=7)
    base.update(kw)
    return ScenarioConfig(**base)


def test_parse_config_roundtrip():
    cfg = parse_config("""
        n = 12          # attackers
        gamma = 0.4
        scheme = Linear
        theta_target = 0.8
        min_to_max_ratio = 0.1
        seed = 99
        series_parameter = gamma
        series_values = 0.3, 0.4
        schemes = linear, square
    """)
    assert cfg.n == 12 and cfg.gamma == 0.4 and cfg.scheme is RewardScheme.LINEAR
    assert cfg.theta == 0.8 and cfg.spread_ratio == 10.0 and cfg.seed == 99
    assert cfg.series_values == (0.3, 0.4)
    assert cfg.schemes == (RewardScheme.LINEAR, RewardScheme.SQUARE)


def test_cost_factor_replaces_gamma():
    cfg = parse_config("cost_factor_c = 12.5")
    assert cfg.gamma is None and cfg.game_params().cost_factor_c == 12.5


@pytest.mark.parametrize("text", [
    "gamma = 0.3\ncost_factor_c = 2",
    "replicates = 0",
    "bogus_key = 1",
    "sweep_parameter = colour",
    "distribution = normal",
    "n = many",
    "sweep_steps = 0",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_overrides_win():
    cfg = parse_config("seed = 1\nscheme = linear", seed=5, scheme="square")
    assert cfg.seed == 5 and cfg.scheme is RewardScheme.SQUARE


def test_sample_bets_deterministic_and_exact_total():
    cfg = ScenarioConfig(n=30, theta=1.0, seed=42)
    a, b = sample_bets(cfg, 3), sample_bets(cfg, 3)
    assert a == b
    assert sample_bets(cfg, 4) != a
    assert a.bet_total(100) == pytest.approx(100, abs=1e-9)


def test_sample_bets_explicit_list():
    cfg = ScenarioConfig(bets=(10.0, 20.0))
    assert sample_bets(cfg, 0).types == (0.1, 0.2)


def test_sample_bets_spread_ratio():
    cfg = ScenarioConfig(n=30, theta=1.0, seed=1)
    ratios = []
    for r in range(10_000):
        bets = sample_bets(cfg, r).bets(100)
        ratios.append(bets.max() / bets.min())
    assert max(ratios) <= 10.0
    assert max(ratios) > 9.9
    # pooled over draws, normalised bets span the full 1:10 range
    pooled = np.concatenate([sample_bets(ScenarioConfig(n=2, theta=0.5, seed=1), r).bets(100)
                             / sample_bets(ScenarioConfig(n=2, theta=0.5, seed=1), r).bets(100).sum()
                             for r in range(2000)])
    assert pooled.min() == pytest.approx(1 / 11, abs=0.01)


def test_sample_bets_infeasible():
    with pytest.raises(ConfigError):
        sample_bets(ScenarioConfig(n=1, theta=1.5), 0)


def test_random_profile_feasible(rng):
    for n in (1, 2, 5, 30):
        prof = random_profile(rng, n)
        assert prof.n == n and max(prof.types) < 1
        assert 0.2 <= prof.theta <= 2.0


def test_evaluate_profile_matches_mechanism(params):
    cfg = ScenarioConfig(n=30, theta=1.3, seed=3)
    prof = sample_bets(cfg, 0)
    for scheme in RewardScheme:
        m = evaluate_profile(prof, scheme, params)
        out = payments(prof, scheme, params)
        assert m.attack_result == out.attack_result
        assert m.payment_share == pytest.approx(out.total_payment / 100)
        assert m.d_rms == pytest.approx(fairness_score(prof, scheme, params), rel=1e-12)
        ir = check_ex_post_ir(prof, scheme, params)
        assert m.ir_fraction == pytest.approx(sum(ir) / len(ir))
        utils = [quasi_utility(prof, i, 1, scheme, params, out) for i in range(prof.n)]
        assert m.profit_to_bet == pytest.approx(np.mean(utils) / np.mean(prof.bets(100)), rel=1e-12)


def test_cost_sharing(params):
    """Splitting the work across attackers is cheaper than one attacker doing it all."""
    for seed in range(20):
        prof = sample_bets(ScenarioConfig(n=30, theta=1.0 + seed * 0.05, seed=seed), 0)
        for scheme in RewardScheme:
            eq = payments(prof, scheme, params).equilibrium
            spent = sum(cost(e, params) for e in eq.delivered)
            assert spent <= cost(min(eq.raw_total, 1.0), params) + 1e-12
            if eq.raw_total < params.e_max:
                assert sum(cost(e, params) for e in eq.efforts) <= cost(eq.raw_total, params) + 1e-12


def test_sweep_rows_and_csv():
    cfg = small(sweep_from=0.4, sweep_to=1.4)
    rows = sweep(cfg)
    assert [r.value for r in rows] == pytest.approx(np.linspace(0.4, 1.4, 6))
    assert all(r.replicates == 8 and 0 <= r.attack_result <= 1 for r in rows)
    text = sweep_to_csv(rows)
    assert text.splitlines()[0] == ",".join(SWEEP_COLUMNS)
    assert len(text.splitlines()) == 7


def test_sweep_over_n_and_gamma():
    rows = sweep(small(sweep_parameter="n", sweep_from=5, sweep_to=30, theta=0.9))
    assert [r.value for r in rows] == [5, 10, 15, 20, 25, 30]
    ars = [r.attack_result for r in rows]
    assert all(a >= b - 1e-12 for a, b in zip(ars, ars[1:]))
    rows = sweep(small(sweep_parameter="gamma", sweep_from=0.3, sweep_to=0.5))
    ars = [r.attack_result for r in rows]
    assert all(a >= b - 1e-12 for a, b in zip(ars, ars[1:]))


def test_sweep_workers_do_not_change_results():
    cfg = small()
    assert sweep_to_csv(sweep(cfg)) == sweep_to_csv(sweep(cfg, workers=4))


def test_sweep_reports_failing_seed():
    cfg = small(n=2, sweep_from=1.0, sweep_to=1.9)
    with pytest.raises(ConfigError, match="seed=7"):
        sweep(cfg)


def test_invariant_violation_aborts(monkeypatch, params):
    from csc_sim import experiments

    real = experiments.payments

    def broken(*a, **kw):
        out = real(*a, **kw)
        return dataclasses.replace(out, payments=tuple(p + 50 for p in out.payments))

    monkeypatch.setattr(experiments, "payments", broken)
    with pytest.raises(InvariantViolation):
        sweep(small(sweep_from=1.8, sweep_to=2.0, sweep_steps=2))


def test_series_sweep_shape():
    cfg = small(schemes=("linear", "square"), series_parameter="gamma", series_values=(0.3, 0.5), sweep_steps=3)
    rows = series_sweep(cfg)
    assert len(rows) == 2 * 2 * 3
    assert {(r["scheme"], r["gamma"]) for r in rows} == {
        (s, g) for s in RewardScheme for g in (0.3, 0.5)
    }
