"""Exception hierarchy shared by the runtime, the contracts and the CLI.

Every exception carries its class name as a stable, machine-readable error
code (``exc.code``), which is what the CLI prints and what the transaction
log records for failed transactions.
"""


class AbacChainError(Exception):
    @property
    def code(self) -> str:
        return type(self).__name__


# runtime-level

class ChainError(AbacChainError):
    pass


class UnknownContract(ChainError):
    pass


class UnknownAbi(ChainError):
    pass


class Unauthorized(ChainError):
    pass


class AlreadyDeployed(ChainError):
    pass


class ClockRegression(ChainError):
    pass


class BadSequence(ChainError):
    """Transaction ``seq`` does not equal the current log length."""


class CorruptLog(ChainError):
    pass


# contract-level

class ContractError(AbacChainError):
    pass


class AttributeBoundsExceeded(ContractError):
    pass


class NoSuchSubject(ContractError):
    pass


class NoSuchObject(ContractError):
    pass


class NoSuchAttribute(ContractError):
    pass


class DuplicatePolicy(ContractError):
    pass


class PolicyNotFound(ContractError):
    pass


class IndexOutOfRange(ContractError):
    pass


class InvalidArgument(ContractError):
    pass


# gas-model

class UnsupportedBound(AbacChainError):
    """No code-cost calibration exists for the requested attribute-count bound."""
