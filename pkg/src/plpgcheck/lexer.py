"""Lexer for the supported PL/pgSQL subset.

Total over arbitrary input: unknown characters become ERROR tokens, never
exceptions. Comments and whitespace are attached to the following token as
leading trivia so that token spans plus trivia cover the input exactly.
Keywords are lexed as WORD; the parser decides keyword-ness from the
case-folded text.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .source import Trivia


class TokenKind(enum.Enum):
    WORD = "word"              # identifier or keyword, norm = lowercased
    QUOTED_IDENT = "qident"    # "Mixed Case", norm = unquoted value
    INT_LIT = "int"
    NUM_LIT = "num"            # any numeric literal with . or exponent
    STRING = "string"          # 'literal', value = decoded text
    DOLLAR_STRING = "dollar"   # $tag$ ... $tag$, value = inner text
    PARAM = "param"            # $1, $2, ...
    SEMI = ";"
    COMMA = ","
    LPAREN = "("
    RPAREN = ")"
    LBRACKET = "["
    RBRACKET = "]"
    DOT = "."
    DOTDOT = ".."
    ASSIGN = ":="
    TYPECAST = "::"
    COLON = ":"
    CONCAT = "||"
    EQ = "="
    NEQ = "<>"
    LT = "<"
    GT = ">"
    LE = "<="
    GE = ">="
    PLUS = "+"
    MINUS = "-"
    STAR = "*"
    SLASH = "/"
    PERCENT = "%"
    CARET = "^"
    LABEL_OPEN = "<<"
    LABEL_CLOSE = ">>"
    OP = "op"                  # any other operator-ish character run
    ERROR = "error"
    EOF = "eof"


@dataclass
class Token:
    kind: TokenKind
    start: int
    end: int
    text: str
    norm: str = ""              # case-folded text for WORD, decoded for literals
    value: str | None = None    # decoded payload for STRING / DOLLAR_STRING
    trivia: list[Trivia] = field(default_factory=list)

    def is_kw(self, *words: str) -> bool:
        return self.kind is TokenKind.WORD and self.norm in words


_PUNCT = {
    "<<": TokenKind.LABEL_OPEN,
    ">>": TokenKind.LABEL_CLOSE,
    ":=": TokenKind.ASSIGN,
    "::": TokenKind.TYPECAST,
    "..": TokenKind.DOTDOT,
    "||": TokenKind.CONCAT,
    "<>": TokenKind.NEQ,
    "!=": TokenKind.NEQ,
    "<=": TokenKind.LE,
    ">=": TokenKind.GE,
    ";": TokenKind.SEMI,
    ",": TokenKind.COMMA,
    "(": TokenKind.LPAREN,
    ")": TokenKind.RPAREN,
    "[": TokenKind.LBRACKET,
    "]": TokenKind.RBRACKET,
    ".": TokenKind.DOT,
    ":": TokenKind.COLON,
    "=": TokenKind.EQ,
    "<": TokenKind.LT,
    ">": TokenKind.GT,
    "+": TokenKind.PLUS,
    "-": TokenKind.MINUS,
    "*": TokenKind.STAR,
    "/": TokenKind.SLASH,
    "%": TokenKind.PERCENT,
    "^": TokenKind.CARET,
}

# Keywords the parser treats as reserved statement markers. Kept small on
# purpose: SQL expression keywords (AND, OR, NOT, ...) stay ordinary words
# because expressions are captured verbatim.
KEYWORDS = frozenset({
    "create", "or", "replace", "function", "returns", "language",
    "declare", "begin", "end", "as", "default",
    "if", "then", "elsif", "elseif", "else",
    "case", "when", "loop", "while", "for", "foreach", "in", "reverse",
    "by", "array", "exit", "continue", "assert", "raise",
    "execute", "into", "perform", "return", "not", "null",
    "select", "insert", "update", "delete", "with",
})


def _ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _ident_cont(ch: str) -> bool:
    return ch.isalnum() or ch in "_$"


class Lexer:
    """Single-pass lexer over text[start:end]; offsets stay file-absolute."""

    def __init__(self, text: str, start: int = 0, end: int | None = None) -> None:
        self.text = text
        self.pos = start
        self.end = len(text) if end is None else end

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        while True:
            tok = self._next()
            out.append(tok)
            if tok.kind is TokenKind.EOF:
                return out

    # ── scanning ────────────────────────────────────────────────

    def _next(self) -> Token:
        trivia = self._skip_trivia()
        start = self.pos
        if start >= self.end:
            return Token(TokenKind.EOF, start, start, "", trivia=trivia)
        ch = self.text[start]

        if ch in "eE" and start + 1 < self.end and self.text[start + 1] == "'":
            return self._string(start, trivia, escapes=True)
        if _ident_start(ch):
            return self._word(start, trivia)
        if ch.isdigit() or (ch == "." and self._peek_digit(start + 1)):
            return self._number(start, trivia)
        if ch == "'":
            return self._string(start, trivia, escapes=False)
        if ch == '"':
            return self._quoted_ident(start, trivia)
        if ch == "$":
            return self._dollar(start, trivia)

        two = self.text[start:start + 2]
        if two in _PUNCT:
            self.pos = start + 2
            return Token(_PUNCT[two], start, self.pos, two, trivia=trivia)
        if ch in _PUNCT:
            self.pos = start + 1
            return Token(_PUNCT[ch], start, self.pos, ch, trivia=trivia)
        if ch in "@#&~!?":
            # other SQL operator characters: expressions are verbatim, so the
            # engine judges them, not the lexer
            i = start
            while i < self.end and self.text[i] in "@#&~!?<>=+-*/%^|":
                i += 1
            self.pos = i
            return Token(TokenKind.OP, start, i, self.text[start:i], trivia=trivia)

        self.pos = start + 1
        return Token(TokenKind.ERROR, start, self.pos, ch, trivia=trivia)

    def _peek_digit(self, i: int) -> bool:
        return i < self.end and self.text[i].isdigit()

    def _skip_trivia(self) -> list[Trivia]:
        out: list[Trivia] = []
        t = self.text
        while self.pos < self.end:
            ch = t[self.pos]
            if ch.isspace():
                s = self.pos
                while self.pos < self.end and t[self.pos].isspace():
                    self.pos += 1
                out.append(Trivia("space", s, self.pos))
            elif t.startswith("--", self.pos):
                s = self.pos
                nl = t.find("\n", self.pos, self.end)
                self.pos = self.end if nl < 0 else nl
                out.append(Trivia("line_comment", s, self.pos))
            elif t.startswith("/*", self.pos):
                s = self.pos
                depth = 1
                self.pos += 2
                while self.pos < self.end and depth:
                    if t.startswith("/*", self.pos):
                        depth += 1
                        self.pos += 2
                    elif t.startswith("*/", self.pos):
                        depth -= 1
                        self.pos += 2
                    else:
                        self.pos += 1
                out.append(Trivia("block_comment", s, self.pos))
            else:
                break
        return out

    def _word(self, start: int, trivia: list[Trivia]) -> Token:
        t = self.text
        i = start + 1
        while i < self.end and _ident_cont(t[i]):
            i += 1
        self.pos = i
        text = t[start:i]
        return Token(TokenKind.WORD, start, i, text, norm=text.lower(), trivia=trivia)

    def _number(self, start: int, trivia: list[Trivia]) -> Token:
        t = self.text
        i = start
        is_int = True
        while i < self.end and t[i].isdigit():
            i += 1
        # Not a decimal point if part of the '..' range operator.
        if i < self.end and t[i] == "." and not t.startswith("..", i):
            is_int = False
            i += 1
            while i < self.end and t[i].isdigit():
                i += 1
        if i < self.end and t[i] in "eE":
            j = i + 1
            if j < self.end and t[j] in "+-":
                j += 1
            if j < self.end and t[j].isdigit():
                is_int = False
                i = j
                while i < self.end and t[i].isdigit():
                    i += 1
        self.pos = i
        kind = TokenKind.INT_LIT if is_int else TokenKind.NUM_LIT
        return Token(kind, start, i, t[start:i], norm=t[start:i], trivia=trivia)

    def _string(self, start: int, trivia: list[Trivia], escapes: bool) -> Token:
        t = self.text
        i = start + (2 if escapes else 1)
        buf: list[str] = []
        while i < self.end:
            ch = t[i]
            if escapes and ch == "\\" and i + 1 < self.end:
                nxt = t[i + 1]
                buf.append({"n": "\n", "t": "\t", "r": "\r"}.get(nxt, nxt))
                i += 2
                continue
            if ch == "'":
                if i + 1 < self.end and t[i + 1] == "'":
                    buf.append("'")
                    i += 2
                    continue
                self.pos = i + 1
                return Token(TokenKind.STRING, start, self.pos, t[start:self.pos],
                             value="".join(buf), trivia=trivia)
            buf.append(ch)
            i += 1
        # Unterminated: consume the rest as an error token.
        self.pos = self.end
        return Token(TokenKind.ERROR, start, self.end, t[start:self.end],
                     value="".join(buf), trivia=trivia)

    def _quoted_ident(self, start: int, trivia: list[Trivia]) -> Token:
        t = self.text
        i = start + 1
        buf: list[str] = []
        while i < self.end:
            if t[i] == '"':
                if i + 1 < self.end and t[i + 1] == '"':
                    buf.append('"')
                    i += 2
                    continue
                self.pos = i + 1
                return Token(TokenKind.QUOTED_IDENT, start, self.pos, t[start:self.pos],
                             norm="".join(buf), trivia=trivia)
            buf.append(t[i])
            i += 1
        self.pos = self.end
        return Token(TokenKind.ERROR, start, self.end, t[start:self.end], trivia=trivia)

    def _dollar(self, start: int, trivia: list[Trivia]) -> Token:
        t = self.text
        i = start + 1
        if i < self.end and t[i].isdigit():
            while i < self.end and t[i].isdigit():
                i += 1
            self.pos = i
            return Token(TokenKind.PARAM, start, i, t[start:i], norm=t[start:i], trivia=trivia)
        # $tag$ ... $tag$ (tag may be empty)
        j = i
        while j < self.end and (_ident_start(t[j]) or t[j].isdigit()):
            j += 1
        if j < self.end and t[j] == "$":
            opener = t[start:j + 1]
            close = t.find(opener, j + 1, self.end)
            if close < 0:
                self.pos = self.end
                return Token(TokenKind.ERROR, start, self.end, t[start:self.end], trivia=trivia)
            self.pos = close + len(opener)
            return Token(TokenKind.DOLLAR_STRING, start, self.pos, t[start:self.pos],
                         value=t[j + 1:close], trivia=trivia)
        self.pos = start + 1
        return Token(TokenKind.ERROR, start, self.pos, "$", trivia=trivia)


def lex(source: str, start: int = 0, end: int | None = None) -> list[Token]:
    """Tokenize source[start:end]; always ends with an EOF token."""
    return Lexer(source, start, end).tokens()
