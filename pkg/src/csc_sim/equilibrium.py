"""Best responses and the equilibrium attack result.

Each attacker's utility is its reward share times the pot times the attack
result, minus a strictly convex effort cost.  Under the linear scheme the
marginal reward of one unit of effort is a constant that does not depend on
what the other attackers do, so the best response is a dominant strategy.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    ArrayLike,
    GameParams,
    RewardScheme,
    TypeProfile,
    _check_effort,
    attack_phase_utility,
    reward_shares,
)

# Interval halvings; 60 drives the bracket well below float spacing on [0, 1].
_BISECT_ITERS = 60


@dataclass(frozen=True)
class Equilibrium:
    efforts: tuple[float, ...]
    raw_total: float
    attack_result: float

    @property
    def delivered(self) -> tuple[float, ...]:
        """Efforts actually spent once attackers stop at a full success.

        Best responses may sum past 1; nobody is paid for the excess, so the
        delivered contributions are scaled down proportionally to sum to 1.
        """
        if self.raw_total <= 1.0:
            return self.efforts
        return tuple(e / self.raw_total for e in self.efforts)


def _marginal_cost(e: np.ndarray, c: float, e_max: float) -> np.ndarray:
    gap = e_max - e
    return c * np.exp(e) / gap + c * np.expm1(e) / (gap * gap)


def marginal_cost(e: ArrayLike, params: GameParams) -> ArrayLike:
    """Derivative of :func:`~csc_sim.model.cost`; strictly increasing."""
    out = _marginal_cost(_check_effort(e, params), params.cost_factor_c, params.e_max)
    return float(out) if out.ndim == 0 else out


def marginal_rewards(profile: TypeProfile, scheme: RewardScheme | str, params: GameParams) -> np.ndarray:
    """Reward gained per unit of effort, (bet_t + award) * share_i."""
    pot = profile.bet_total(params.award) + params.award
    return pot * reward_shares(scheme, profile)


def best_responses(marginal_reward: ArrayLike, params: GameParams) -> np.ndarray:
    """Vectorised best response; see :func:`best_response`."""
    mr = np.atleast_1d(np.asarray(marginal_reward, dtype=float))
    if np.any(mr < 0) or np.any(np.isnan(mr)):
        raise ValueError("marginal reward must be nonnegative")
    out = np.zeros_like(mr)
    lo_clamp = mr <= marginal_cost(0.0, params)
    hi_clamp = mr >= marginal_cost(1.0, params)
    out[hi_clamp] = 1.0
    interior = ~(lo_clamp | hi_clamp)
    if np.any(interior):
        target = mr[interior]
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        c, e_max = params.cost_factor_c, params.e_max
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            below = _marginal_cost(mid, c, e_max) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[interior] = 0.5 * (lo + hi)
    return out


def best_response(marginal_reward: float, params: GameParams) -> float:
    """Effort in [0, 1] maximising ``marginal_reward * e - cost(e)``.

    Clamped to 0 when the reward slope never beats the marginal cost at zero
    effort, to 1 when it still beats it at full effort; otherwise the root of
    ``marginal_cost(e) == marginal_reward`` by bisection.
    """
    return float(best_responses(marginal_reward, params)[0])


def attack_result(profile: TypeProfile, scheme: RewardScheme | str, params: GameParams) -> Equilibrium:
    efforts = best_responses(marginal_rewards(profile, scheme, params), params)
    raw = float(efforts.sum())
    return Equilibrium(tuple(float(e) for e in efforts), raw, min(raw, 1.0))


@dataclass(frozen=True)
class DominanceReport:
    dominant: bool
    max_violation: float
    candidate: float
    grid_argmax: float


def verify_dominance(
    profile: TypeProfile,
    i: int,
    opponents_efforts: Sequence[float],
    params: GameParams,
    grid_step: float = 1e-3,
    scheme: RewardScheme | str = RewardScheme.LINEAR,
    candidate: float | None = None,
    tol: float = 1e-9,
) -> DominanceReport:
    """Brute-force check that ``candidate`` is a best reply to ``opponents_efforts``.

    The candidate defaults to the solver's effort for attacker ``i``.  Utility
    is the uncapped one, i.e. reward grows linearly with total effort.
    """
    if grid_step <= 0:
        raise ValueError("grid_step must be positive")
    if candidate is None:
        candidate = best_response(marginal_rewards(profile, scheme, params)[i], params)
    others = float(np.sum(np.asarray(opponents_efforts, dtype=float)))
    steps = int(round(1.0 / grid_step))
    grid = np.linspace(0.0, 1.0, steps + 1)
    u_grid = attack_phase_utility(profile, i, grid, grid + others, scheme, params, capped=False)
    u_star = attack_phase_utility(profile, i, candidate, candidate + others, scheme, params, capped=False)
    violation = float(np.max(u_grid) - u_star)
    return DominanceReport(
        dominant=violation <= tol,
        max_violation=max(violation, 0.0),
        candidate=float(candidate),
        grid_argmax=float(grid[int(np.argmax(u_grid))]),
    )
