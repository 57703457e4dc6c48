"""Diagnostics with source spans, rendered one per line."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .source import SourceFile, Span


class Severity(Enum):
    ERROR = "error"
    WARNING = "warning"
    NOTE = "note"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    message: str
    span: Span
    path: str = "<memory>"
    line: int = 0
    col: int = 0

    @classmethod
    def at(cls, source: SourceFile, span: Span, severity: Severity, message: str) -> "Diagnostic":
        line, col = source.position(span.start)
        return cls(severity=severity, message=message, span=span,
                   path=source.path, line=line, col=col)

    def render(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: {self.severity.value}: {self.message}"


def has_errors(diagnostics: list[Diagnostic]) -> bool:
    return any(d.severity is Severity.ERROR for d in diagnostics)


class ScaffoldError(Exception):
    """Base for errors raised by the toolchain."""


class LexError(ScaffoldError):
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.message = message
        self.span = span


class ParseError(ScaffoldError):
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.message = message
        self.span = span
