"""Exception hierarchy shared by every module."""


class CardExtError(Exception):
    """Base class for all package errors."""


class ValidationError(CardExtError):
    """A query or schema references something that does not exist."""


class SchemaMismatch(CardExtError):
    pass


class CsvParseError(CardExtError):
    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyColumn(CardExtError):
    pass


class UnsupportedQuery(CardExtError):
    """Raised when a conjunctive-only entry point receives OR/NOT."""


class NotConjunctive(UnsupportedQuery):
    pass


class MismatchedFromOrSelect(CardExtError):
    pass


class SqlSyntaxError(CardExtError):
    def __init__(self, message, span=None):
        if span is not None:
            message = f"{message} at {span.start}:{span.end}"
        super().__init__(message)
        self.span = span


class UnsupportedNegation(CardExtError):
    pass


class DnfBlowup(CardExtError):
    pass


class UnsupportedJoin(CardExtError):
    pass


class EstimatorError(CardExtError):
    pass


class CapabilityError(EstimatorError):
    pass


class FeaturizationError(CardExtError):
    pass


class DomainError(CardExtError, ValueError):
    pass


class EmptyDataset(CardExtError):
    pass


class NonFiniteLoss(CardExtError):
    pass


class ModelIOError(CardExtError):
    pass


class VersionMismatch(ModelIOError):
    pass


class DimMismatch(ModelIOError):
    pass


class ConfigError(CardExtError):
    pass


class GenError(CardExtError):
    pass
