"""Frontend: lexing, parsing, annotation binding, and linting."""
from __future__ import annotations

from ..diagnostics import Diagnostic, LexError, ParseError, Severity
from ..source import SourceFile
from .annotations import parse_annotation, parse_spec_expr
from .ast_nodes import ProgramAst
from .attach import AnnotatedProgram, attach_contracts
from .lexer import tokenize_program, tokenize_spec
from .linting import lint
from .parser import parse_program


def load_program(source: SourceFile) -> AnnotatedProgram:
    """Lex, parse and attach; raises LexError/ParseError on malformed input."""
    tokens = tokenize_program(source.content)
    ast = parse_program(tokens)
    return attach_contracts(source, ast)


def load_program_checked(source: SourceFile) -> tuple[AnnotatedProgram | None,
                                                      list[Diagnostic]]:
    """Like load_program but converts front-end exceptions to diagnostics."""
    try:
        program = load_program(source)
    except (LexError, ParseError) as exc:
        return None, [Diagnostic.at(source, exc.span, Severity.ERROR, exc.message)]
    return program, list(program.diagnostics)
