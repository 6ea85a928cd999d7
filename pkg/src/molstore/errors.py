"""Exception hierarchy shared by the simulator modules."""


class MolstoreError(Exception):
    pass


class MalformedSequenceError(MolstoreError, ValueError):
    pass


class InvalidLayoutError(MolstoreError, ValueError):
    pass


class AddressingError(MolstoreError, IndexError):
    pass


class ConfigError(MolstoreError, ValueError):
    pass


class DomainError(MolstoreError, ValueError):
    pass


class SchedulingError(MolstoreError, ValueError):
    pass


class BaselineError(MolstoreError):
    """No open-pore baseline could be estimated from a trace."""


class ProtocolViolation(MolstoreError):
    """An action broke the write-station protocol; station state is left untouched."""


class AdjacencyError(MolstoreError):
    """Spacer too short: the activator would expose more than one active site."""


class CapabilityError(MolstoreError):
    pass


class ExtrapolationWarning(UserWarning):
    pass


class RegimeWarning(UserWarning):
    """Parameters fall outside the regime a closed-form model assumes."""


class IncompleteWriteError(MolstoreError):
    pass
