from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True, order=True)
class SourceSpan:
    """1-based, inclusive start; end column points one past the last character."""

    file: str
    line: int
    col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if (self.end_line, self.end_col) < (self.line, self.col):
            raise ValueError("span end precedes start")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}"


NO_SPAN = SourceSpan("<model>", 1, 1, 1, 1)


@dataclass(frozen=True, order=True)
class Diagnostic:
    span: SourceSpan
    severity: Severity
    message: str

    def __str__(self) -> str:
        return f"{self.span}: {self.severity.value}: {self.message}"

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def to_json(self) -> dict:
        return {
            "file": self.span.file,
            "line": self.span.line,
            "col": self.span.col,
            "severity": self.severity.value,
            "message": self.message,
        }


def error(span: SourceSpan, message: str) -> Diagnostic:
    return Diagnostic(span, Severity.ERROR, message)


def warning(span: SourceSpan, message: str) -> Diagnostic:
    return Diagnostic(span, Severity.WARNING, message)


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)
