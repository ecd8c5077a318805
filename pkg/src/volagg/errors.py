"""Exception types raised across the package."""


class VolAggError(Exception):
    """Base class for all package errors."""


class NonSquareError(VolAggError, ValueError):
    pass


class AsymmetryError(VolAggError, ValueError):
    pass


class NotPositiveDefinite(VolAggError, ValueError):
    pass


class DimensionMismatch(VolAggError, ValueError):
    pass


class EmptyPanel(VolAggError, ValueError):
    pass


class ParseError(VolAggError, ValueError):
    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class NonMonotoneDates(VolAggError, ValueError):
    pass


class MissingFactorColumn(VolAggError, KeyError):
    pass


class InsufficientHistory(VolAggError, ValueError):
    pass


class DegenerateDesign(VolAggError, ValueError):
    """Local-linear design has too little mass near the evaluation point."""


class AllCandidatesDegenerate(VolAggError, ValueError):
    pass


class DensityZeroWithPositiveOmega(VolAggError, ValueError):
    pass


class StepTooLarge(VolAggError, ValueError):
    pass


class MaturityOutOfRange(VolAggError, ValueError):
    pass


class NonPositiveState(VolAggError, ValueError):
    pass


class NoisePSDViolation(VolAggError, ValueError):
    pass


class TruthNotPD(VolAggError, ValueError):
    pass


class Misalignment(VolAggError, ValueError):
    pass


class WindowOutOfRange(VolAggError, ValueError):
    pass


class InsufficientReplications(VolAggError, ValueError):
    pass


class InsufficientData(VolAggError, ValueError):
    def __init__(self, message, required=None):
        super().__init__(message)
        self.required = required
