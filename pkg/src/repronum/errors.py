"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` so the command line
front end can record failures in a report without parsing messages.
"""


class ReproNumError(Exception):
    code = "Error"


# epidata
class MissingRegionError(ReproNumError):
    code = "MissingRegion"


class MalformedRowError(ReproNumError):
    code = "MalformedRow"


class NonMonotonicDatesError(ReproNumError):
    code = "NonMonotonicDates"


class TooShortError(ReproNumError):
    code = "TooShort"


class BadWindowError(ReproNumError):
    code = "BadWindow"


# gentime
class InvalidMomentError(ReproNumError):
    code = "InvalidMoment"


class TruncationLossError(ReproNumError):
    code = "TruncationLoss"


class InvalidLagError(ReproNumError):
    code = "InvalidLag"


# sir
class BadStepError(ReproNumError):
    code = "BadStep"


class BadHorizonError(ReproNumError):
    code = "BadHorizon"


class FitDivergedError(ReproNumError):
    code = "FitDiverged"


class NoPeakError(ReproNumError):
    code = "NoPeak"


# restimators
class DegenerateError(ReproNumError):
    code = "Degenerate"


class NoConvergeError(ReproNumError):
    code = "NoConverge"


class NoSecondaryMassError(ReproNumError):
    code = "NoSecondaryMass"


class BadGridError(ReproNumError):
    code = "BadGrid"


class NoAncestorsError(ReproNumError):
    code = "NoAncestors"


# simoracle
class ExplodedError(ReproNumError):
    code = "Exploded"
