"""Exception types shared across the protocol modules."""


class DecwfError(Exception):
    pass


class PolicyError(DecwfError, ValueError):
    """A threshold policy or its parameters are inconsistent."""


class InsufficientShares(DecwfError):
    """Fewer than the threshold number of valid shares were supplied."""


class DealingMismatch(DecwfError, ValueError):
    pass


class PublishRejected(DecwfError):
    pass


class NotFound(DecwfError, KeyError):
    pass


class IntegrityError(DecwfError):
    """Authenticated data failed verification."""


class SessionAborted(DecwfError):
    pass


class ConfigError(DecwfError, ValueError):
    """A scenario, adversary or definition document failed validation."""


class ProtocolError(DecwfError):
    pass


class IllegalTransition(ProtocolError):
    pass


class NotPresent(DecwfError):
    """A data element was read where it no longer (or never) existed."""


class TraceFormatError(DecwfError, ValueError):
    pass


class UntranslatableError(DecwfError, ValueError):
    pass
