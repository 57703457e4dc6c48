"""Lexer for the Scaffold subset and for ScaffML annotation text.

Program mode turns `/*@ ... */` blocks and `//@ ...` lines into single
ANNOTATION tokens carrying their inner text (with its file offset, so
diagnostics inside annotations map to real positions). Ordinary comments
are trivia. Spec mode adds kets (`|0>`, `|1>`), backslash keywords
(`\\old`, `\\valid`, `\\nothing`), `:`, `^`, and logical operators.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, auto

from ..diagnostics import LexError
from ..source import Span


class TokKind(Enum):
    IDENT = auto()
    INT = auto()
    FLOAT = auto()
    ANNOTATION = auto()      # program mode only; value = inner text
    EMIT_LINE = auto()       # spec mode only: `//ensures ...` line, value = inner text
    KET0 = auto()
    KET1 = auto()
    LPAREN = auto()
    RPAREN = auto()
    LBRACE = auto()
    RBRACE = auto()
    LBRACK = auto()
    RBRACK = auto()
    SEMI = auto()
    COMMA = auto()
    COLON = auto()
    DOT = auto()
    DOTDOT = auto()
    PLUS = auto()
    MINUS = auto()
    STAR = auto()
    SLASH = auto()
    PERCENT = auto()
    CARET = auto()
    ASSIGN = auto()
    PLUSPLUS = auto()
    MINUSMINUS = auto()
    PLUSEQ = auto()
    MINUSEQ = auto()
    EQ = auto()
    NE = auto()
    LE = auto()
    GE = auto()
    LT = auto()
    GT = auto()
    ANDAND = auto()
    OROR = auto()
    BANG = auto()
    BACKSLASH_KW = auto()    # \old \valid \nothing; value = keyword without backslash
    EOF = auto()


# Reserved words of the Scaffold subset; everything else is an identifier.
# while/do/switch are reserved so they produce "outside supported subset"
# instead of parsing as calls.
KEYWORDS = {
    "qreg", "qbit", "qstruct", "gate", "module", "if", "else", "for",
    "return", "int", "float", "void", "const", "while", "do", "switch",
}


@dataclass(frozen=True)
class Token:
    kind: TokKind
    lexeme: str
    span: Span
    value: object = None  # int/float for numbers, inner text for annotations

    @property
    def is_keyword(self) -> bool:
        return self.kind is TokKind.IDENT and self.lexeme in KEYWORDS

    def is_kw(self, word: str) -> bool:
        return self.kind is TokKind.IDENT and self.lexeme == word


_PUNCT2 = {
    "==": TokKind.EQ, "!=": TokKind.NE, "<=": TokKind.LE, ">=": TokKind.GE,
    "&&": TokKind.ANDAND, "||": TokKind.OROR, "++": TokKind.PLUSPLUS,
    "--": TokKind.MINUSMINUS, "+=": TokKind.PLUSEQ, "-=": TokKind.MINUSEQ,
    "..": TokKind.DOTDOT,
}
_PUNCT1 = {
    "(": TokKind.LPAREN, ")": TokKind.RPAREN, "{": TokKind.LBRACE,
    "}": TokKind.RBRACE, "[": TokKind.LBRACK, "]": TokKind.RBRACK,
    ";": TokKind.SEMI, ",": TokKind.COMMA, ":": TokKind.COLON,
    ".": TokKind.DOT, "+": TokKind.PLUS, "-": TokKind.MINUS,
    "*": TokKind.STAR, "/": TokKind.SLASH, "%": TokKind.PERCENT,
    "^": TokKind.CARET, "=": TokKind.ASSIGN, "<": TokKind.LT,
    ">": TokKind.GT, "!": TokKind.BANG,
}


def _is_ident_start(ch: str) -> bool:
    return ch.isalpha() or ch == "_"


def _is_ident_char(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


class Lexer:
    def __init__(self, text: str, base_offset: int = 0, spec_mode: bool = False):
        self.text = text
        self.base = base_offset
        self.spec_mode = spec_mode
        self.pos = 0

    def _span(self, start: int, end: int) -> Span:
        return Span(self.base + start, self.base + end)

    def error(self, message: str, start: int) -> LexError:
        return LexError(message, self._span(start, self.pos))

    def tokens(self) -> list[Token]:
        out: list[Token] = []
        while True:
            tok = self.next_token()
            out.append(tok)
            if tok.kind is TokKind.EOF:
                return out

    def _skip_trivia(self) -> Token | None:
        """Advance over whitespace and comments; may return an ANNOTATION or
        EMIT_LINE token encountered along the way."""
        text, n = self.text, len(self.text)
        while self.pos < n:
            ch = text[self.pos]
            if ch in " \t\r\n":
                self.pos += 1
                continue
            if ch == "/" and self.pos + 1 < n:
                nxt = text[self.pos + 1]
                if nxt == "/":
                    start = self.pos
                    line_end = text.find("\n", self.pos)
                    if line_end == -1:
                        line_end = n
                    body = text[self.pos + 2:line_end]
                    self.pos = line_end
                    if not self.spec_mode and body.startswith("@"):
                        inner_off = start + 3
                        return Token(TokKind.ANNOTATION, text[start:line_end],
                                     self._span(start, line_end),
                                     value=(body[1:], self.base + inner_off))
                    if self.spec_mode and body.lstrip().startswith("ensures"):
                        stripped = body.lstrip()
                        inner_off = start + 2 + (len(body) - len(stripped)) + len("ensures")
                        return Token(TokKind.EMIT_LINE, text[start:line_end],
                                     self._span(start, line_end),
                                     value=(stripped[len("ensures"):], self.base + inner_off))
                    continue  # ordinary line comment: trivia
                if nxt == "*":
                    start = self.pos
                    is_ann = (not self.spec_mode
                              and self.pos + 2 < n and text[self.pos + 2] == "@")
                    close = text.find("*/", self.pos + 2)
                    if close == -1:
                        self.pos = n
                        raise self.error("unterminated block comment", start)
                    self.pos = close + 2
                    if is_ann:
                        inner_off = start + 3
                        return Token(TokKind.ANNOTATION, text[start:close + 2],
                                     self._span(start, close + 2),
                                     value=(text[inner_off:close], self.base + inner_off))
                    continue  # ordinary block comment: trivia
            break
        return None

    def next_token(self) -> Token:
        special = self._skip_trivia()
        if special is not None:
            return special
        text, n = self.text, len(self.text)
        if self.pos >= n:
            return Token(TokKind.EOF, "", self._span(n, n))
        start = self.pos
        ch = text[start]

        if _is_ident_start(ch):
            while self.pos < n and _is_ident_char(text[self.pos]):
                self.pos += 1
            lex = text[start:self.pos]
            return Token(TokKind.IDENT, lex, self._span(start, self.pos))

        if ch.isdigit():
            while self.pos < n and text[self.pos].isdigit():
                self.pos += 1
            is_float = False
            if (self.pos < n and text[self.pos] == "."
                    and not text.startswith("..", self.pos)):
                is_float = True
                self.pos += 1
                while self.pos < n and text[self.pos].isdigit():
                    self.pos += 1
            if self.pos < n and text[self.pos] in "eE":
                mark = self.pos
                self.pos += 1
                if self.pos < n and text[self.pos] in "+-":
                    self.pos += 1
                if self.pos < n and text[self.pos].isdigit():
                    is_float = True
                    while self.pos < n and text[self.pos].isdigit():
                        self.pos += 1
                else:
                    self.pos = mark  # not an exponent (e.g. `2e`): back off
            lex = text[start:self.pos]
            if is_float:
                return Token(TokKind.FLOAT, lex, self._span(start, self.pos), value=float(lex))
            return Token(TokKind.INT, lex, self._span(start, self.pos), value=int(lex))

        if ch == "\\" and self.spec_mode:
            self.pos += 1
            kw_start = self.pos
            while self.pos < n and _is_ident_char(text[self.pos]):
                self.pos += 1
            word = text[kw_start:self.pos]
            if word not in ("old", "valid", "nothing"):
                raise self.error(f"unknown specification keyword '\\{word}'", start)
            return Token(TokKind.BACKSLASH_KW, text[start:self.pos],
                         self._span(start, self.pos), value=word)

        if ch == "|" and self.spec_mode:
            if text.startswith("||", start):
                self.pos += 2
                return Token(TokKind.OROR, "||", self._span(start, self.pos))
            if start + 2 < n and text[start + 1] in "01" and text[start + 2] == ">":
                self.pos += 3
                kind = TokKind.KET0 if text[start + 1] == "0" else TokKind.KET1
                return Token(kind, text[start:self.pos], self._span(start, self.pos))
            self.pos += 1
            raise self.error("stray '|' (expected '|0>', '|1>' or '||')", start)

        two = text[start:start + 2]
        if two in _PUNCT2:
            self.pos += 2
            return Token(_PUNCT2[two], two, self._span(start, self.pos))
        if ch in _PUNCT1:
            self.pos += 1
            return Token(_PUNCT1[ch], ch, self._span(start, self.pos))

        self.pos += 1
        raise self.error(f"unexpected character {ch!r}", start)


def tokenize_program(content: str) -> list[Token]:
    """Tokenize a Scaffold-subset source; annotations become single tokens."""
    return Lexer(content, spec_mode=False).tokens()


def tokenize_spec(inner_text: str, base_offset: int) -> list[Token]:
    """Tokenize ScaffML annotation text with spec-mode extensions."""
    return Lexer(inner_text, base_offset=base_offset, spec_mode=True).tokens()
