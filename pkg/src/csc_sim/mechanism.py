"""The contract viewed as a direct mechanism.

A reported type profile maps to an outcome: the equilibrium attack result
and one net payment per identity (reward minus bet).  The checks below
verify the properties the mechanism is supposed to have: truthful single
identity betting is optimal, the sponsor never pays more than the award,
participation is worthwhile and payments track actual contribution.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .equilibrium import Equilibrium, attack_result
from .errors import InvalidTransactionCount, SplitMismatch
from .model import GameParams, RewardScheme, TypeProfile, cost, reward_shares

BUDGET_TOL = 1e-9
SPLIT_TOL = 1e-12


@dataclass(frozen=True)
class Outcome:
    attack_result: float
    payments: tuple[float, ...]
    equilibrium: Equilibrium
    bet_total: float
    award: float

    @property
    def total_payment(self) -> float:
        return math.fsum(self.payments)

    @property
    def sponsor_residual(self) -> float:
        """Part of the award left to the sponsor after paying the attackers."""
        return self.award - self.total_payment


@dataclass(frozen=True)
class Valuation:
    value: float
    k: int


def _payments_at(profile: TypeProfile, scheme, params: GameParams, result: float) -> np.ndarray:
    bet_t = profile.bet_total(params.award)
    rewards = (bet_t + params.award) * reward_shares(scheme, profile) * result
    return rewards - profile.bets(params.award)


def payments(profile: TypeProfile, scheme: RewardScheme | str, params: GameParams) -> Outcome:
    eq = attack_result(profile, scheme, params)
    p = _payments_at(profile, scheme, params, eq.attack_result)
    return Outcome(
        attack_result=eq.attack_result,
        payments=tuple(float(x) for x in p),
        equilibrium=eq,
        bet_total=profile.bet_total(params.award),
        award=params.award,
    )


def _check_k(k: int) -> None:
    if int(k) != k or k < 1:
        raise InvalidTransactionCount(f"an attacker needs at least one betting transaction, got k={k}")


def valuation(
    profile: TypeProfile, i: int, k: int, scheme: RewardScheme | str, params: GameParams,
    outcome: Outcome | None = None,
) -> Valuation:
    _check_k(k)
    outcome = outcome or payments(profile, scheme, params)
    effort = outcome.equilibrium.efforts[i]
    return Valuation(value=-(cost(effort, params) + k * params.fee_delta), k=int(k))


def quasi_utility(
    profile: TypeProfile,
    i: int,
    k: int,
    scheme: RewardScheme | str,
    params: GameParams,
    outcome: Outcome | None = None,
) -> float:
    outcome = outcome or payments(profile, scheme, params)
    return valuation(profile, i, k, scheme, params, outcome).value + outcome.payments[i]


@dataclass(frozen=True)
class SplitReport:
    truthful_utility: float
    split_utility: float
    delta_gap: float
    parts: int


def check_dsic_split(
    profile: TypeProfile,
    i: int,
    split: Sequence[float],
    scheme: RewardScheme | str,
    params: GameParams,
) -> SplitReport:
    """Compare betting ``t_i`` from one identity against splitting it.

    The splitting attacker still knows its true type, so it contributes its
    truthful equilibrium effort once and the attack result is unchanged; only
    the reward shares and the number of paid fees differ.
    """
    parts = [float(x) for x in split]
    if not parts or any(not x > 0 for x in parts):
        raise SplitMismatch("split parts must be positive")
    if abs(math.fsum(parts) - profile.types[i]) > SPLIT_TOL:
        raise SplitMismatch(f"split parts sum to {math.fsum(parts)}, expected {profile.types[i]}")

    truthful = payments(profile, scheme, params)
    effort_cost = cost(truthful.equilibrium.efforts[i], params)
    u_truth = truthful.payments[i] - effort_cost - params.fee_delta

    expanded = profile.replace(i, parts)
    split_pay = _payments_at(expanded, scheme, params, truthful.attack_result)[i : i + len(parts)]
    u_split = math.fsum(split_pay) - effort_cost - len(parts) * params.fee_delta
    return SplitReport(u_truth, u_split, u_truth - u_split, len(parts))


@dataclass(frozen=True)
class BudgetReport:
    ok: bool
    slack: float


def check_budget(outcome: Outcome, params: GameParams) -> BudgetReport:
    total = outcome.total_payment
    return BudgetReport(ok=total <= params.award + BUDGET_TOL, slack=params.award - total)


def ir_threshold(params: GameParams, rule: float | str | None = None) -> float:
    """Resolve the participation threshold.

    ``None`` or ``"2delta"`` gives ``+2 * fee``; ``"-2delta"`` treats the two
    withdrawal fees as a loss instead; a number is used as is.
    """
    if rule is None:
        return 2.0 * params.fee_delta
    if isinstance(rule, str):
        key = rule.strip().lower().replace(" ", "")
        if key in ("2delta", "+2delta", "literal"):
            return 2.0 * params.fee_delta
        if key in ("-2delta", "withdrawal"):
            return -2.0 * params.fee_delta
        return float(key)
    return float(rule)


def check_ex_post_ir(
    profile: TypeProfile,
    scheme: RewardScheme | str,
    params: GameParams,
    threshold: float | str | None = None,
    outcome: Outcome | None = None,
) -> list[bool]:
    bar = ir_threshold(params, threshold)
    outcome = outcome or payments(profile, scheme, params)
    return [quasi_utility(profile, i, 1, scheme, params, outcome) >= bar for i in range(profile.n)]


def fair_payments(outcome: Outcome) -> np.ndarray:
    """Contribution-based payments, award * e_i * attack_result, on delivered efforts."""
    efforts = np.asarray(outcome.equilibrium.delivered)
    return outcome.award * efforts * outcome.attack_result


def fairness_score(
    profile: TypeProfile,
    scheme: RewardScheme | str,
    params: GameParams,
    outcome: Outcome | None = None,
) -> float:
    """RMS distance between mechanism payments and contribution-based payments."""
    outcome = outcome or payments(profile, scheme, params)
    diff = np.asarray(outcome.payments) - fair_payments(outcome)
    return float(np.sqrt(np.mean(diff * diff)))


@dataclass(frozen=True)
class CheckRow:
    scenario: str
    check: str
    passed: bool
    value: float


CHECK_COLUMNS = ("scenario", "check", "passed", "value")


def check_rows_to_csv(rows: Iterable[CheckRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CHECK_COLUMNS)
    for row in rows:
        writer.writerow([row.scenario, row.check, "pass" if row.passed else "fail", f"{row.value:.12g}"])
    return buf.getvalue()
