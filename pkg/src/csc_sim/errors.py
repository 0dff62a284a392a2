"""Exception hierarchy shared by every module."""


class CSCError(Exception):
    """Base class for all errors raised by csc_sim."""


# model / equilibrium
class NonPositiveBet(CSCError, ValueError):
    pass


class BetExceedsAward(CSCError, ValueError):
    pass


class EffortOutOfRange(CSCError, ValueError):
    pass


class ResultOutOfRange(CSCError, ValueError):
    pass


# mechanism
class InvalidTransactionCount(CSCError, ValueError):
    pass


class SplitMismatch(CSCError, ValueError):
    pass


# contract simulation
class ContractError(CSCError):
    """A transaction rejected by the contract; state is left untouched."""


class InsufficientFunds(ContractError):
    pass


class InvalidWindow(ContractError):
    pass


class TooLate(ContractError):
    pass


class TooEarly(ContractError):
    pass


class BetTooSmall(ContractError):
    pass


class BetTooLarge(ContractError):
    pass


class BadSignature(ContractError):
    pass


class AlreadySettled(ContractError):
    pass


class WrongPhase(ContractError):
    pass


class NoBets(ContractError):
    pass


# experiments
class ConfigError(CSCError, ValueError):
    pass
