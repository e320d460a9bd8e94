"""Exception hierarchy shared across the pipeline.

Input-side problems (bad data, bad flags) carry exit code 1; violations of
internal invariants carry exit code 2. The CLI maps exceptions to process
exit codes through `exit_code`.
"""


class EigenmineError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class InvalidInput(EigenmineError):
    pass


class DuplicateId(EigenmineError):
    pass


class TooFewPoints(EigenmineError):
    pass


class DegenerateCloud(EigenmineError):
    pass


class UndefinedBearing(EigenmineError):
    pass


class MissingHeading(EigenmineError):
    pass


class InvalidLabel(EigenmineError):
    pass


class NotNormalized(EigenmineError):
    pass


class ShapeError(EigenmineError):
    pass


class NotEnoughClasses(EigenmineError):
    pass


class MissingGroundTruth(EigenmineError):
    pass


class MissingId(EigenmineError):
    pass


class ManifestParseError(EigenmineError):
    pass


class DescriptorFormatError(EigenmineError):
    pass


class InternalInvariantError(EigenmineError):
    """Self-check failed; indicates a bug, not bad input."""

    exit_code = 2
