"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` so the CLI can map failures to the
documented process status without a lookup table.
"""

from __future__ import annotations


class WeaveError(Exception):
    exit_code = 1

    def __init__(self, message: str = "", **details):
        super().__init__(message)
        self.details = details


class PreconditionViolated(WeaveError):
    exit_code = 4


class InfeasibleParams(PreconditionViolated):
    pass


class SizeLimitExceeded(PreconditionViolated):
    pass


class BudgetExceeded(PreconditionViolated):
    pass


class InternalInvariantBroken(WeaveError):
    exit_code = 3


class SelectionFailed(WeaveError):
    exit_code = 3


class ExtensionStuck(WeaveError):
    exit_code = 3


class PipelineFailed(WeaveError):
    exit_code = 3


class PartitionRejected(WeaveError):
    exit_code = 3


class BackboneNotFound(WeaveError):
    exit_code = 3


class BalancingFailed(WeaveError):
    exit_code = 3


class RetryExhausted(WeaveError):
    exit_code = 3


class DegenerateDenominator(WeaveError):
    exit_code = 2
