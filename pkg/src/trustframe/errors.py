"""Exception hierarchy shared by every trustframe module."""


class TrustFrameError(Exception):
    """Base class for all library errors."""


class TaxonomyError(TrustFrameError, ValueError):
    """Unknown source, facet or linguistic term, or a kind mismatch."""


class ObservationError(TrustFrameError, ValueError):
    """An observation payload violates its invariants."""


class FuzzyInputError(TrustFrameError, ValueError):
    pass


class RuleBaseError(TrustFrameError, ValueError):
    pass


class EmptyInferenceError(TrustFrameError):
    """No rule fired, or the aggregate has zero area."""


class InsufficientDataError(TrustFrameError, ValueError):
    pass


class NoEvidenceError(TrustFrameError, ValueError):
    """Raised when a trust value is requested without any evidence behind it."""


class ContractError(TrustFrameError, ValueError):
    """A caller broke an operation's precondition."""


class RoutingError(ContractError):
    pass


class ConfigError(TrustFrameError, ValueError):
    pass
