"""Exception hierarchy shared by the library and the CLI."""


class AgcError(Exception):
    pass


class ValidationError(AgcError, ValueError):
    """Input does not satisfy a precondition (shapes, ranges, formats)."""


class ParseError(ValidationError):
    def __init__(self, message, lineno=None, source=None):
        self.lineno = lineno
        self.source = source
        where = ""
        if source is not None:
            where += f"{source}:"
        if lineno is not None:
            where += f"{lineno}:"
        super().__init__(f"{where} {message}" if where else message)


class DomainError(AgcError, ValueError):
    """Quantity is undefined for the given arguments."""
