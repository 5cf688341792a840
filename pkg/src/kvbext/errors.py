"""Exception hierarchy.

Every error raised on purpose by the package derives from :class:`KVBError`.
Input-validation failures derive from :class:`ValidationError` so the CLI
can map them to a dedicated exit code.
"""


class KVBError(Exception):
    """Base class for all package errors."""


class MixedDimensions(KVBError):
    pass


class NotHermitian(KVBError):
    pass


class Singular(KVBError):
    pass


class NotSelfAdjoint(KVBError):
    pass


class ValidationError(KVBError):
    """An extension problem violates one of its invariants."""


class NotSymmetric(ValidationError):
    pass


class NotExtension(ValidationError):
    pass


class NotInvertibleSD(ValidationError):
    pass


class GapExcludesZero(ValidationError):
    pass


class ParseError(KVBError):
    """Malformed input file."""


class DecompositionMismatch(KVBError):
    pass


class NotInAdjointDomain(KVBError):
    pass


class NotInGap(KVBError):
    pass


class ParameterNotInKernel(KVBError):
    pass


class NotUnital(KVBError):
    pass


class DeficiencyExhausted(KVBError):
    pass


class IllConditionedGram(KVBError):
    pass


class FormNotHermitian(KVBError):
    pass


class GapMismatch(KVBError):
    pass


class EmptyIntersection(KVBError):
    pass
