"""Exception hierarchy."""


class FinMktError(Exception):
    """Base class for all library errors."""


class ValidationError(FinMktError, ValueError):
    pass


class NotAdapted(FinMktError):
    pass


class NonTrivialStart(FinMktError):
    pass


class NotSubfiltration(FinMktError):
    pass


class NotSelfFinancing(FinMktError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class NotPredictable(FinMktError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class Degenerate(FinMktError):
    pass


class NotEquivalent(FinMktError):
    pass


class NotEmm(FinMktError):
    pass


class NotMeasurable(FinMktError):
    pass


class NotReplicable(FinMktError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ArbitrageUnboundedGrowth(FinMktError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class ParseError(FinMktError):
    def __init__(self, message, line=None, column=None):
        loc = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(message + loc)
        self.line = line
        self.column = column


class BadParams(FinMktError, ValueError):
    pass


class UnknownCommand(FinMktError):
    pass
