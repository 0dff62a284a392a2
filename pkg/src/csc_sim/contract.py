"""State-machine simulation of the betting/settlement contract.

Nothing here touches a network or a chain.  A :class:`Ledger` holds account
balances, :class:`ContractSim` owns the contract state and an integer
logical clock, and the attack phase is replaced by a call into the
equilibrium solver whose result is handed back as a keyed-tag data feed.

Amounts are kept as :class:`fractions.Fraction` so that every transfer
conserves total value exactly.
"""

from __future__ import annotations

import copy
import csv
import enum
import hashlib
import hmac
import io
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Union

from .equilibrium import attack_result
from .errors import (
    AlreadySettled,
    BadSignature,
    BetTooLarge,
    BetTooSmall,
    ContractError,
    InsufficientFunds,
    InvalidWindow,
    NoBets,
    TooEarly,
    TooLate,
    WrongPhase,
)
from .model import GameParams, RewardScheme, TypeProfile, normalize_types

Amount = Union[int, float, Fraction]


def _amount(x: Amount) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


class Ledger:
    """Account balances plus a sink collecting transaction fees."""

    def __init__(self, balances: Optional[dict[str, Amount]] = None):
        self.balances: dict[str, Fraction] = {k: _amount(v) for k, v in (balances or {}).items()}
        self.fee_sink = Fraction(0)

    def balance(self, account: str) -> Fraction:
        return self.balances.get(account, Fraction(0))

    def credit(self, account: str, amount: Fraction) -> None:
        self.balances[account] = self.balance(account) + amount

    def debit(self, account: str, amount: Fraction) -> None:
        self.balances[account] = self.balance(account) - amount

    def charge_fee(self, account: str, fee: Fraction) -> None:
        self.debit(account, fee)
        self.fee_sink += fee

    def total(self) -> Fraction:
        return sum(self.balances.values(), Fraction(0)) + self.fee_sink


class Phase(str, enum.Enum):
    DEPLOYED = "deployed"
    COMMITTING = "committing"
    ATTACKING = "attacking"
    SETTLED = "settled"


@dataclass
class Betting:
    account: str
    bet: Fraction
    reward: Fraction = Fraction(0)


@dataclass
class ContractState:
    phase: Phase = Phase.DEPLOYED
    owner: str = ""
    award: Fraction = Fraction(0)
    target_url: str = ""
    bet_min: Fraction = Fraction(0)
    start_time: int = 0
    end_time: int = 0
    bettings: list[Betting] = field(default_factory=list)
    escrow: Fraction = Fraction(0)

    def bet_total(self) -> Fraction:
        return sum((b.bet for b in self.bettings), Fraction(0))


@dataclass(frozen=True)
class DataFeed:
    ar: float
    tag: bytes


def _feed_payload(ar: float, target_url: str, start_time: int, end_time: int) -> bytes:
    return struct.pack(">dqq", ar, start_time, end_time) + target_url.encode("utf-8")


def sign_feed(key: bytes, ar: float, target_url: str, start_time: int, end_time: int) -> DataFeed:
    """Oracle stub: tag the attack result with an HMAC under ``key``."""
    tag = hmac.new(key, _feed_payload(ar, target_url, start_time, end_time), hashlib.sha256).digest()
    return DataFeed(ar=float(ar), tag=tag)


def sig_ver(key: bytes, feed: DataFeed, target_url: str, start_time: int, end_time: int) -> bool:
    expected = sign_feed(key, feed.ar, target_url, start_time, end_time).tag
    return hmac.compare_digest(expected, feed.tag)


@dataclass(frozen=True)
class TraceRow:
    tick: int
    op: str
    account: str
    amount: Fraction
    result: str


TRACE_COLUMNS = ("tick", "op", "account", "amount", "result")


@dataclass(frozen=True)
class SettlementReport:
    ar: float
    accounts: tuple[str, ...]
    bets: tuple[Fraction, ...]
    rewards: tuple[Fraction, ...]
    sponsor_refund: Fraction

    @property
    def payments(self) -> tuple[float, ...]:
        """Net gain of each betting identity, reward minus bet."""
        return tuple(float(r - b) for r, b in zip(self.rewards, self.bets))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(("account", "bet", "reward", "payment"))
        for acct, bet, rew in zip(self.accounts, self.bets, self.rewards):
            writer.writerow((acct, f"{float(bet):.12g}", f"{float(rew):.12g}", f"{float(rew - bet):.12g}"))
        writer.writerow(("sponsor_refund", "", f"{float(self.sponsor_refund):.12g}", ""))
        return buf.getvalue()


class ContractSim:
    """Single-writer simulation of one contract instance.

    Every operation either applies completely or raises a
    :class:`~csc_sim.errors.ContractError` and leaves ledger and contract
    state untouched.  Accepted transactions cost ``params.fee_delta``;
    rejected ones are free unless ``fee_on_reject`` is set.
    """

    def __init__(
        self,
        ledger: Ledger,
        params: GameParams,
        scheme: RewardScheme | str = RewardScheme.LINEAR,
        oracle_key: bytes = b"oracle-key",
        fee_on_reject: bool = False,
    ):
        self.ledger = ledger
        self.params = params
        self.scheme = RewardScheme.coerce(scheme)
        self.oracle_key = oracle_key
        self.fee_on_reject = fee_on_reject
        self.fee = _amount(params.fee_delta)
        self.state = ContractState()
        self.clock = 0
        self.accepted_tx = 0
        self.trace: list[TraceRow] = []

    # -- bookkeeping ---------------------------------------------------

    def advance(self, now: Optional[int]) -> int:
        if now is not None:
            if now < self.clock:
                raise ValueError(f"clock cannot go backwards ({now} < {self.clock})")
            self.clock = int(now)
        return self.clock

    def total_value(self) -> Fraction:
        return self.ledger.total() + self.state.escrow

    def snapshot(self):
        """Deep copy of everything an operation may mutate, for comparisons."""
        return copy.deepcopy((self.ledger.balances, self.ledger.fee_sink, self.state, self.accepted_tx))

    def _accept(self, op: str, account: str, amount: Fraction) -> None:
        self.ledger.charge_fee(account, self.fee)
        self.accepted_tx += 1
        self.trace.append(TraceRow(self.clock, op, account, amount, "ok"))

    def _reject(self, op: str, account: str, amount: Fraction, err: ContractError) -> ContractError:
        if self.fee_on_reject and account:
            self.ledger.charge_fee(account, self.fee)
        self.trace.append(TraceRow(self.clock, op, account, amount, type(err).__name__))
        return err

    def trace_to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for row in self.trace:
            writer.writerow((row.tick, row.op, row.account, f"{float(row.amount):.12g}", row.result))
        return buf.getvalue()

    # -- phase 1 ---------------------------------------------------------

    def init_contract(
        self,
        sponsor: str,
        award: Amount,
        target_url: str,
        start_time: int,
        end_time: int,
        bet_min: Amount,
        now: Optional[int] = None,
    ) -> ContractState:
        self.advance(now)
        award = _amount(award)
        if self.state.phase is not Phase.DEPLOYED:
            raise self._reject("init", sponsor, award, WrongPhase("contract already initialised"))
        if start_time >= end_time:
            raise self._reject("init", sponsor, award, InvalidWindow(f"start {start_time} >= end {end_time}"))
        if not award > 0:
            raise self._reject("init", sponsor, award, InsufficientFunds("award must be positive"))
        if self.ledger.balance(sponsor) < award:
            raise self._reject(
                "init", sponsor, award,
                InsufficientFunds(f"{sponsor} holds {float(self.ledger.balance(sponsor))} < award {float(award)}"),
            )
        self.ledger.debit(sponsor, award)
        self.state = ContractState(
            phase=Phase.COMMITTING,
            owner=sponsor,
            award=award,
            target_url=target_url,
            bet_min=_amount(bet_min),
            start_time=int(start_time),
            end_time=int(end_time),
            escrow=award,
        )
        self._accept("init", sponsor, award)
        return self.state

    def commit_bet(self, account: str, bet: Amount, now: Optional[int] = None) -> Betting:
        self.advance(now)
        bet = _amount(bet)
        st = self.state
        if st.phase is not Phase.COMMITTING:
            raise self._reject("commit", account, bet, WrongPhase(f"cannot bet in phase {st.phase.value}"))
        if not self.clock < st.start_time:
            raise self._reject("commit", account, bet, TooLate(f"tick {self.clock} is not before start {st.start_time}"))
        if not bet > st.bet_min:
            raise self._reject("commit", account, bet, BetTooSmall(f"bet {float(bet)} <= bet_min {float(st.bet_min)}"))
        if not bet < st.award:
            raise self._reject("commit", account, bet, BetTooLarge(f"bet {float(bet)} >= award {float(st.award)}"))
        if self.ledger.balance(account) < bet:
            raise self._reject("commit", account, bet, InsufficientFunds(f"{account} cannot cover bet {float(bet)}"))
        self.ledger.debit(account, bet)
        st.escrow += bet
        record = Betting(account=account, bet=bet)
        st.bettings.append(record)
        self._accept("commit", account, bet)
        return record

    # -- phase 2 ---------------------------------------------------------

    def type_profile(self) -> TypeProfile:
        """One type per betting record; separate identities stay separate."""
        award = float(self.state.award)
        return normalize_types([float(b.bet) for b in self.state.bettings], award)

    def run_attack_phase(self, now: Optional[int] = None) -> DataFeed:
        """Freeze the bets, solve the equilibrium and emit the oracle's feed."""
        self.advance(now)
        st = self.state
        if st.phase not in (Phase.COMMITTING, Phase.ATTACKING):
            raise WrongPhase(f"no attack phase from {st.phase.value}")
        if self.clock < st.start_time:
            raise TooEarly(f"attack window opens at {st.start_time}, clock is {self.clock}")
        if not st.bettings:
            raise NoBets("no bets were committed; settlement will refund the award")
        st.phase = Phase.ATTACKING
        eq = attack_result(self.type_profile(), self.scheme, self._solver_params())
        return sign_feed(self.oracle_key, eq.attack_result, st.target_url, st.start_time, st.end_time)

    def _solver_params(self) -> GameParams:
        p = self.params
        return GameParams(award=float(self.state.award), e_max=p.e_max,
                          cost_factor_c=p.cost_factor_c, fee_delta=p.fee_delta)

    # -- phase 3 ---------------------------------------------------------

    def reward_allocation(
        self,
        feed: Optional[DataFeed],
        now: Optional[int] = None,
        caller: Optional[str] = None,
    ) -> SettlementReport:
        self.advance(now)
        st = self.state
        caller = caller or st.owner
        if st.phase is Phase.SETTLED:
            raise self._reject("settle", caller, Fraction(0), AlreadySettled("contract already settled"))
        if st.phase is Phase.DEPLOYED:
            raise self._reject("settle", caller, Fraction(0), WrongPhase("contract not initialised"))
        if not self.clock > st.end_time:
            raise self._reject("settle", caller, Fraction(0), TooEarly(f"tick {self.clock} is not after end {st.end_time}"))

        if st.bettings:
            if feed is None or not sig_ver(self.oracle_key, feed, st.target_url, st.start_time, st.end_time):
                raise self._reject("settle", caller, Fraction(0), BadSignature("data feed failed verification"))
            if not 0.0 <= feed.ar <= 1.0:
                raise self._reject("settle", caller, Fraction(0), BadSignature(f"attack result {feed.ar} out of range"))
            ar = Fraction(feed.ar)
        else:
            ar = Fraction(0)

        rewards = self._compute_payments(ar)
        for record, amount in zip(st.bettings, rewards):
            record.reward = amount
            self.ledger.credit(record.account, amount)
        refund = st.escrow - sum(rewards, Fraction(0))
        self.ledger.credit(st.owner, refund)
        st.escrow = Fraction(0)
        st.phase = Phase.SETTLED
        self._accept("settle", caller, refund)
        return SettlementReport(
            ar=float(ar),
            accounts=tuple(b.account for b in st.bettings),
            bets=tuple(b.bet for b in st.bettings),
            rewards=tuple(rewards),
            sponsor_refund=refund,
        )

    def _compute_payments(self, ar: Fraction) -> list[Fraction]:
        st = self.state
        if not st.bettings:
            return []
        pot = st.award + st.bet_total()
        if self.scheme is RewardScheme.LINEAR:
            weights = [b.bet for b in st.bettings]
        else:
            weights = [b.bet * b.bet for b in st.bettings]
        denom = sum(weights, Fraction(0))
        return [pot * w / denom * ar for w in weights]
