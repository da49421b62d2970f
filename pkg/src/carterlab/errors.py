"""Exception types shared across the package.

The CLI maps them onto exit codes: :class:`InputError` subclasses give 2,
:class:`SolverError` subclasses give 3, :class:`CheckFailure` gives 1.
"""

from __future__ import annotations


class CarterLabError(Exception):
    pass


class InputError(CarterLabError, ValueError):
    """Invalid input or violated precondition."""


class SolverError(CarterLabError, RuntimeError):
    """A numerical routine did not converge or hit a singularity."""


class CheckFailure(CarterLabError):
    """A mathematical check came out false."""


# metric_core
class DegeneratePoint(InputError):
    pass


class StabilityRequiresK0(InputError):
    pass


# curvature_cert
class CertificateFailure(CheckFailure):
    def __init__(self, component: str, monomial: dict, coefficient):
        self.component = component
        self.monomial = monomial
        self.coefficient = coefficient
        super().__init__(f"{component}: nonzero coefficient {coefficient} at {monomial}")


class EvaluationAtPole(SolverError):
    pass


class TermLimitExceeded(SolverError):
    def __init__(self, terms: int, limit: int):
        super().__init__(
            f"polynomial grew to {terms} terms (limit {limit}); "
            "use spot_check_random for a seeded exact fallback"
        )


# slab modules
class NotStrictSlab(InputError):
    pass


class NearResonance(InputError):
    pass


class WrongMode(InputError):
    pass


class DimensionMismatch(InputError):
    pass


class LinearSolveFailure(SolverError):
    pass


# separated_modes
class NotSimpleZero(InputError):
    pass


class StepFailure(SolverError):
    pass


class BracketFailure(SolverError):
    pass


class ParameterDomain(InputError):
    pass


# kn_diagnostics
class Superextremal(InputError):
    pass


class WallRange(InputError):
    pass


class IntegratorFailure(SolverError):
    pass


# horizon_extremal
class NotExtremal(InputError):
    pass


class DomainOfDependenceExceeded(InputError):
    pass


class InsufficientHistory(InputError):
    pass


# cli
class SchemaError(InputError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class RangeError(InputError):
    pass
