"""Exception taxonomy shared by the library and the CLI.

Every error carries a coarse ``category`` used by the CLI exit-code mapping:
usage errors exit 1, data/format errors exit 2, numeric failures exit 3.
"""

USAGE = 1
DATA = 2
NUMERIC = 3


class StyleBasisError(Exception):
    category = DATA


class UsageError(StyleBasisError):
    category = USAGE


# --- tensor files and images -------------------------------------------------

class BadMagic(StyleBasisError):
    pass


class TruncatedPayload(StyleBasisError):
    pass


class UnsupportedDtype(StyleBasisError):
    pass


class IoFailure(StyleBasisError):
    pass


class UnsupportedFormat(StyleBasisError):
    pass


class DecodeError(StyleBasisError):
    pass


class RangeViolation(StyleBasisError):
    pass


# --- shapes, indexing, lookups ----------------------------------------------

class ShapeMismatch(StyleBasisError):
    pass


class IndexOutOfRange(StyleBasisError):
    pass


class MethodMismatch(StyleBasisError):
    pass


class UnknownStyleId(StyleBasisError):
    pass


class UnknownLayer(StyleBasisError):
    pass


class BadWeights(StyleBasisError):
    pass


class DisconnectedGraph(StyleBasisError):
    pass


# --- numeric failures ---------------------------------------------------------

class NonNegligibleImaginary(StyleBasisError):
    category = NUMERIC


class ConvergenceFailure(StyleBasisError):
    category = NUMERIC


class DegenerateInput(StyleBasisError):
    category = NUMERIC


class NonFiniteLoss(StyleBasisError):
    category = NUMERIC


class NotFound(StyleBasisError):
    category = NUMERIC
