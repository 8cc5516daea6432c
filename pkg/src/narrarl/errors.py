"""Exception hierarchy shared across the package.

Errors split into two families so the command line can map them onto exit
codes: ``InputError`` covers bad configuration, files, and arguments (exit 1);
everything else under ``NarrarlError`` is a runtime failure (exit 2).
"""
from __future__ import annotations


class NarrarlError(Exception):
    """Base class for every error raised by narrarl."""


class InputError(NarrarlError):
    """Invalid user input: config values, files, identifiers."""


class ConfigError(InputError):
    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field


class ParseError(InputError):
    def __init__(self, message: str, *, path: str | None = None, line: int | None = None) -> None:
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ValidationError(InputError):
    pass


class UnknownNarrative(InputError, KeyError):
    def __str__(self) -> str:  # KeyError would repr() the message
        return str(self.args[0]) if self.args else ""


class TemplateError(InputError):
    pass


class OutOfBounds(InputError):
    pass


class Unsatisfiable(NarrarlError):
    """No grid layout satisfies the requested size, density and solvability."""


class InvariantViolation(NarrarlError):
    def __init__(self, message: str, *, record: int | None = None, field: str | None = None) -> None:
        prefix = ""
        if record is not None:
            prefix = f"record {record}"
            if field is not None:
                prefix += f", field {field!r}"
            prefix += ": "
        super().__init__(prefix + message)
        self.record = record
        self.field = field


class EmptyInput(NarrarlError, ValueError):
    pass


class MalformedResponse(NarrarlError):
    """Model output did not contain a parseable ``ACTION: <dir>`` line."""


class LlmError(NarrarlError):
    """Base for chat transport problems."""


class AuthMissing(LlmError):
    pass


class TransportFailure(LlmError):
    pass


class HttpError(LlmError):
    def __init__(self, status: int, body: str = "") -> None:
        super().__init__(f"HTTP {status}: {body[:200]}")
        self.status = status


class MalformedBody(LlmError):
    pass


class ScriptExhausted(LlmError):
    pass
