"""Source positions, spans, diagnostics and text edits.

Byte offsets are the source of truth; line/column positions (1-based,
columns in codepoints) are derived so spans survive slicing and editing.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass


class LineIndex:
    """Maps byte offsets in a text to 1-based (line, column) positions."""

    def __init__(self, text: str) -> None:
        self.text = text
        self._starts = [0]
        for i, ch in enumerate(text):
            if ch == "\n":
                self._starts.append(i + 1)

    def position(self, offset: int) -> tuple[int, int]:
        offset = max(0, min(offset, len(self.text)))
        line = bisect.bisect_right(self._starts, offset) - 1
        return line + 1, offset - self._starts[line] + 1

    def line_text(self, line: int) -> str:
        start = self._starts[line - 1]
        end = self._starts[line] - 1 if line < len(self._starts) else len(self.text)
        return self.text[start:end]


@dataclass(frozen=True)
class SourceSpan:
    """A contiguous region of one source file."""

    file_id: str
    start_byte: int
    end_byte: int
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __post_init__(self) -> None:
        if self.start_byte > self.end_byte:
            raise ValueError(f"inverted span: {self.start_byte}..{self.end_byte}")

    @staticmethod
    def of(file_id: str, index: LineIndex, start: int, end: int) -> SourceSpan:
        sl, sc = index.position(start)
        el, ec = index.position(end)
        return SourceSpan(file_id, start, end, sl, sc, el, ec)

    def cover(self, other: SourceSpan) -> SourceSpan:
        """Smallest span containing both self and other."""
        lo, hi = self, other
        if other.start_byte < self.start_byte:
            lo, hi = other, self
        if hi.end_byte < lo.end_byte:
            hi = lo
        return SourceSpan(
            self.file_id,
            lo.start_byte, hi.end_byte,
            lo.start_line, lo.start_col,
            hi.end_line, hi.end_col,
        )

    def slice(self, text: str) -> str:
        return text[self.start_byte:self.end_byte]

    def to_json(self) -> dict:
        return {
            "file": self.file_id,
            "start_byte": self.start_byte,
            "end_byte": self.end_byte,
            "start_line": self.start_line,
            "start_col": self.start_col,
            "end_line": self.end_line,
            "end_col": self.end_col,
        }


@dataclass(frozen=True)
class Diagnostic:
    """A recoverable problem tied to a span (syntax error, scope error, ...)."""

    span: SourceSpan
    message: str
    code: str = "syntax"
    severity: str = "error"

    def to_json(self) -> dict:
        return {
            "span": self.span.to_json(),
            "message": self.message,
            "code": self.code,
            "severity": self.severity,
        }


@dataclass(frozen=True)
class TextEdit:
    """Replace the bytes [start_byte, end_byte) with new_text."""

    start_byte: int
    end_byte: int
    new_text: str

    def to_json(self) -> dict:
        return {
            "start_byte": self.start_byte,
            "end_byte": self.end_byte,
            "new_text": self.new_text,
        }


class OverlappingEditsError(ValueError):
    pass


def apply_edits(source: str, edits: list[TextEdit]) -> str:
    """Apply non-overlapping edits to source, rightmost first.

    Raises OverlappingEditsError if any two edits overlap.
    """
    ordered = sorted(edits, key=lambda e: (e.start_byte, e.end_byte))
    for a, b in zip(ordered, ordered[1:]):
        if a.end_byte > b.start_byte:
            raise OverlappingEditsError(f"edits overlap: {a} / {b}")
    out = source
    for e in reversed(ordered):
        if not (0 <= e.start_byte <= e.end_byte <= len(source)):
            raise ValueError(f"edit out of range for source of length {len(source)}: {e}")
        out = out[:e.start_byte] + e.new_text + out[e.end_byte:]
    return out


@dataclass
class Trivia:
    """Whitespace or comment text preceding a token."""

    kind: str  # "space" | "line_comment" | "block_comment"
    start: int
    end: int


def caret_frame(source: str, span: SourceSpan) -> str:
    """Render file:line:col plus the offending line with caret underlining."""
    index = LineIndex(source)
    line = index.line_text(span.start_line)
    width = max(1, (span.end_col - span.start_col) if span.end_line == span.start_line
                else len(line) - span.start_col + 1)
    pointer = " " * (span.start_col - 1) + "^" * width
    return f"{span.file_id}:{span.start_line}:{span.start_col}\n  {line}\n  {pointer}"
