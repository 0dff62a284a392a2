"""Scenario constants and the primitive functions of the attackers' game.

All traffic quantities are expressed in units of the traffic required for a
successful attack, so an effort of 1.0 means "launches the whole attack
alone" and the attack succeeds once the summed effort reaches 1.0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import (
    BetExceedsAward,
    EffortOutOfRange,
    NonPositiveBet,
    ResultOutOfRange,
)

ArrayLike = Union[float, np.ndarray]

# exp(1) - 1: cost of a full-size attack per unit of c*(e_max - 1)
_E_MINUS_ONE = math.e - 1.0


class RewardScheme(str, enum.Enum):
    LINEAR = "linear"
    SQUARE = "square"

    @classmethod
    def coerce(cls, value: "RewardScheme | str") -> "RewardScheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown reward scheme {value!r}; expected 'linear' or 'square'") from None


@dataclass(frozen=True)
class GameParams:
    """Global constants of one scenario.

    ``award`` is the sponsor deposit, ``e_max`` the traffic ceiling (in units
    of the successful-attack traffic), ``cost_factor_c`` the average cost
    factor and ``fee_delta`` the flat per-transaction fee.
    """

    award: float = 100.0
    e_max: float = 2.0
    cost_factor_c: float = 0.0
    fee_delta: float = 0.0

    def __post_init__(self) -> None:
        if not self.award > 0:
            raise ValueError(f"award must be positive, got {self.award}")
        if not self.e_max > 1:
            raise ValueError(f"e_max must exceed 1 (the success threshold), got {self.e_max}")
        if self.cost_factor_c < 0:
            raise ValueError(f"cost_factor_c must be nonnegative, got {self.cost_factor_c}")
        if self.fee_delta < 0:
            raise ValueError(f"fee_delta must be nonnegative, got {self.fee_delta}")

    @classmethod
    def from_gamma(
        cls, gamma: float, award: float = 100.0, e_max: float = 2.0, fee_delta: float = 0.0
    ) -> "GameParams":
        """Build params from gamma = cost(1) / award."""
        if gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {gamma}")
        c = gamma * award * (e_max - 1.0) / _E_MINUS_ONE
        return cls(award=award, e_max=e_max, cost_factor_c=c, fee_delta=fee_delta)

    @property
    def gamma(self) -> float:
        """Cost of a full successful attack relative to the award."""
        return self.cost_factor_c * _E_MINUS_ONE / ((self.e_max - 1.0) * self.award)


@dataclass(frozen=True)
class TypeProfile:
    """Private types t_i = bet_i / award of all attackers, in order."""

    types: tuple[float, ...]

    def __post_init__(self) -> None:
        types = tuple(float(t) for t in self.types)
        if not types:
            raise ValueError("a type profile needs at least one attacker")
        for t in types:
            if not t > 0:
                raise NonPositiveBet(f"type {t} is not positive")
            if not t < 1:
                raise BetExceedsAward(f"type {t} is not below 1 (bet must be smaller than the award)")
        object.__setattr__(self, "types", types)

    @property
    def n(self) -> int:
        return len(self.types)

    @property
    def theta(self) -> float:
        """Total bets over award."""
        return math.fsum(self.types)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.types, dtype=float)

    def bets(self, award: float) -> np.ndarray:
        return self.as_array() * award

    def bet_total(self, award: float) -> float:
        return math.fsum(t * award for t in self.types)

    def replace(self, i: int, parts: Sequence[float]) -> "TypeProfile":
        """Profile where attacker ``i`` is replaced by one identity per part."""
        types = list(self.types)
        return TypeProfile(tuple(types[:i]) + tuple(parts) + tuple(types[i + 1 :]))


def normalize_types(bets: Sequence[float], award: float) -> TypeProfile:
    if not award > 0:
        raise ValueError(f"award must be positive, got {award}")
    types = []
    for b in bets:
        if not b > 0:
            raise NonPositiveBet(f"bet {b} is not positive")
        if not b < award:
            raise BetExceedsAward(f"bet {b} is not below the award {award}")
        types.append(b / award)
    return TypeProfile(tuple(types))


def reward_shares(scheme: RewardScheme | str, profile: TypeProfile) -> np.ndarray:
    """Fraction of the pot owed to each attacker on a full success."""
    scheme = RewardScheme.coerce(scheme)
    t = profile.as_array()
    if scheme is RewardScheme.LINEAR:
        weights = t
    else:
        weights = t * t
    return weights / weights.sum()


def reward_share(scheme: RewardScheme | str, profile: TypeProfile, i: int) -> float:
    if not -profile.n <= i < profile.n:
        raise IndexError(f"attacker index {i} out of range for {profile.n} attackers")
    return float(reward_shares(scheme, profile)[i])


def _check_effort(e: ArrayLike, params: GameParams) -> np.ndarray:
    arr = np.asarray(e, dtype=float)
    if np.any(arr < 0) or np.any(arr >= params.e_max) or np.any(np.isnan(arr)):
        raise EffortOutOfRange(f"effort must lie in [0, {params.e_max}), got {e}")
    return arr


def cost(e: ArrayLike, params: GameParams) -> ArrayLike:
    """Cost of generating effort ``e``; diverges as ``e`` approaches e_max."""
    arr = _check_effort(e, params)
    out = params.cost_factor_c * np.expm1(arr) / (params.e_max - arr)
    return float(out) if out.ndim == 0 else out


def reward(
    scheme: RewardScheme | str,
    profile: TypeProfile,
    i: int,
    e_tot: float,
    params: GameParams,
) -> float:
    if not 0.0 <= e_tot <= 1.0:
        raise ResultOutOfRange(f"attack result must lie in [0, 1], got {e_tot}")
    pot = profile.bet_total(params.award) + params.award
    return pot * reward_share(scheme, profile, i) * e_tot


def attack_phase_utility(
    profile: TypeProfile,
    i: int,
    e_i: ArrayLike,
    e_tot: ArrayLike,
    scheme: RewardScheme | str,
    params: GameParams,
    capped: bool = True,
) -> ArrayLike:
    """Attacker ``i``'s payoff: reward minus effort cost minus the bet.

    With ``capped=False`` the reward keeps growing linearly past a total
    effort of 1; that is the setting in which effort choices are dominant.
    ``e_i`` and ``e_tot`` may be arrays of equal shape.
    """
    e_i_arr = np.asarray(e_i, dtype=float)
    e_tot_arr = np.asarray(e_tot, dtype=float)
    if np.any(e_i_arr > e_tot_arr + 1e-12):
        raise ValueError("own effort cannot exceed the total effort")
    if np.any(e_tot_arr < 0):
        raise ResultOutOfRange(f"attack result must be nonnegative, got {e_tot}")
    result = np.minimum(e_tot_arr, 1.0) if capped else e_tot_arr
    pot = profile.bet_total(params.award) + params.award
    gross = pot * reward_share(scheme, profile, i) * result
    out = gross - np.asarray(cost(e_i_arr, params)) - profile.types[i] * params.award
    return float(out) if np.ndim(out) == 0 else out
