"""Exception hierarchy shared by every bootmatch module."""


class BootMatchError(Exception):
    """Base class for all errors raised by bootmatch."""


class DegenerateSample(BootMatchError):
    """A test statistic is undefined because the sample has no spread.

    ``p_value`` carries the conventional limiting value (0.0 when the
    means differ with zero variance) so callers may record it.
    """

    def __init__(self, message, p_value=None):
        super().__init__(message)
        self.p_value = p_value


class InsufficientData(BootMatchError):
    pass


class ValidationError(BootMatchError):
    """A PanelDataset violates one of its invariants."""


class RowCountMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    def __init__(self, message, row=None, col=None):
        super().__init__(message)
        self.row = row
        self.col = col


class DegeneratePeriods(ValidationError):
    pass


class SingleArmOnly(ValidationError):
    pass


class IndexOutOfBounds(BootMatchError, IndexError):
    pass


class EmptyDesign(BootMatchError):
    pass


class SingleClass(BootMatchError):
    pass


class DimensionMismatch(BootMatchError):
    pass


class NoControls(BootMatchError):
    pass


class NoTreated(BootMatchError):
    pass


class EmptyMatch(BootMatchError):
    pass


class EmptyGroup(BootMatchError):
    pass


class OutOfRangeP(BootMatchError):
    pass


class SampleTooSmall(BootMatchError):
    pass


class TooManyFailures(BootMatchError):
    def __init__(self, message, replicates=()):
        super().__init__(message)
        self.replicates = tuple(replicates)


class ConfigInvalid(BootMatchError):
    pass


class ParseError(BootMatchError):
    def __init__(self, reason, line=None, column=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + reason)
        self.line = line
        self.column = column
        self.reason = reason


class DegeneratePi0Warning(UserWarning):
    """No p-value exceeded the Storey tuning parameter; pi0 was floored."""
