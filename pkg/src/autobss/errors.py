"""Exception types shared across the package."""


class AutoBssError(Exception):
    """Base class for all package errors."""


class CodeValidationError(AutoBssError):
    """A code failed validation against its search space.

    Carries ``violations``: a list of (dimension index, offending value)
    pairs; a length mismatch is reported as (-1, actual_length).
    """

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(f"invalid code: {self.violations}")


class InfeasibleSpace(AutoBssError):
    """No code in the space satisfies the constraint."""


class DiversityExhausted(AutoBssError):
    """Could not collect the requested number of distinct candidates."""


class DegenerateQuadruplet(AutoBssError):
    """Quadruplet denominator below the configured floor."""


class TooFewObservations(AutoBssError):
    """Refiner training needs at least four observations."""


class InvalidK(AutoBssError):
    """Cluster count outside [1, number of points]."""


class AllEvaluated(AutoBssError):
    """Every candidate in a cluster has already been evaluated."""


class DuplicateInput(AutoBssError):
    """Two identical codes passed as surrogate training inputs."""


class NonPositiveDefinite(AutoBssError):
    """Gram matrix factorization failed even at maximum jitter."""


class InsufficientCenters(AutoBssError):
    """Fewer acquisition candidates than the requested batch size."""


class EvaluatorFailure(AutoBssError):
    """External evaluation command failed; diagnostics attached."""


class EvaluationTimeout(EvaluatorFailure):
    """External evaluation did not produce a response in time."""


class MalformedResponse(EvaluatorFailure):
    """External evaluation response missing ids, duplicated ids, or
    carrying non-finite accuracies."""


class ConfigError(AutoBssError):
    """Bad key or value in a configuration file."""
