"""Exception types shared across the package."""


class HmilexError(Exception):
    """Base class for all package-specific errors."""


class ParseError(HmilexError):
    """A document could not be parsed as a supported JSON value."""


class MixedTypeError(HmilexError):
    """Conflicting node variants at the same schema position."""


class SchemaMismatch(HmilexError):
    """A sample does not conform to the schema a model was built for."""


class KindMismatch(HmilexError):
    """An atomic value does not match the kind its encoder expects."""


class InconsistentInput(HmilexError):
    """The full sample does not reach the confidence threshold."""


class UnreachableThreshold(HmilexError):
    """Addition exhausted all candidates without reaching the threshold."""


class InsufficientPaths(HmilexError):
    """The schema has too few atomic paths for the requested concept kind."""


class GenerationStall(HmilexError):
    """Negative-sample repair exceeded its retry bound."""


class EmptyStats(HmilexError):
    """A schema histogram required for generation is empty."""
