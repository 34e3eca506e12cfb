"""Exception taxonomy shared by the library, the service, and the CLI.

Each error carries a short machine-readable ``kind`` and the process exit
code the CLI maps it to (2 = bad parameters, 3 = I/O or parse failure,
4 = capacity / conditioning limits).
"""

from __future__ import annotations


class DpseedError(Exception):
    kind = "error"
    exit_code = 1


class ParameterError(DpseedError):
    kind = "parameter"
    exit_code = 2


class UndefinedEstimatorError(ParameterError):
    """Raised when an estimator is evaluated on an empty sample collection (m=0).

    Callers that can degrade gracefully (the seeders) must branch to the
    uniform-random path instead of letting this propagate.
    """

    kind = "undefined_estimator"


class ParseError(DpseedError):
    kind = "parse"
    exit_code = 3


class CapacityError(DpseedError):
    kind = "capacity"
    exit_code = 4


class ConditioningError(DpseedError):
    """Numerical singularity detected while solving the debias system."""

    kind = "conditioning"
    exit_code = 4


class SingularityError(DpseedError):
    """Flip probability at or beyond 1/2: the perturbation channel is not invertible."""

    kind = "singularity"
    exit_code = 4


class CapabilityError(DpseedError):
    """Operation requested from a mechanism that cannot support it."""

    kind = "capability"
    exit_code = 4
