"""Source file handling and offset-to-position mapping."""
from __future__ import annotations

import bisect
import hashlib
from dataclasses import dataclass, field


@dataclass(frozen=True)
class SourceFile:
    """A loaded source file with a line index for diagnostics."""

    path: str
    content: str
    _line_starts: tuple[int, ...] = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        starts = [0]
        for i, ch in enumerate(self.content):
            if ch == "\n":
                starts.append(i + 1)
        object.__setattr__(self, "_line_starts", tuple(starts))

    @classmethod
    def from_path(cls, path: str) -> "SourceFile":
        with open(path, "r", encoding="utf-8") as fh:
            return cls(path=path, content=fh.read())

    def position(self, offset: int) -> tuple[int, int]:
        """1-based (line, column) of a byte offset."""
        offset = max(0, min(offset, len(self.content)))
        line = bisect.bisect_right(self._line_starts, offset) - 1
        return line + 1, offset - self._line_starts[line] + 1

    def sha256(self) -> str:
        return hashlib.sha256(self.content.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class Span:
    """Half-open [start, end) offset range into a source file."""

    start: int
    end: int

    @staticmethod
    def point(offset: int) -> "Span":
        return Span(offset, offset)

    def merge(self, other: "Span") -> "Span":
        return Span(min(self.start, other.start), max(self.end, other.end))


NO_SPAN = Span(0, 0)
