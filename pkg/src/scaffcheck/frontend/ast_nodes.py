"""AST for the supported Scaffold subset."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from ..source import NO_SPAN, Span
from ..spec_ast import Contract, Expr, QubitRef


class ParamKind(Enum):
    QREG = "qreg"
    INT = "int"
    FLOAT = "float"


@dataclass(frozen=True)
class Param:
    name: str
    kind: ParamKind
    # Register width: an int literal, a symbolic name (`qreg qbits[width]`),
    # or None for classical parameters.
    width: int | str | None = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class StructDef:
    name: str
    fields: tuple[tuple[str, int], ...]  # (register name, width)
    span: Span = field(default=NO_SPAN, compare=False)


class Stmt:
    span: Span


@dataclass(frozen=True)
class CallArg:
    """Argument of a gate/module call: a qubit ref (element, register, slice)
    or a classical expression."""

    qubit: QubitRef | None = None
    expr: Expr | None = None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class CallStmt(Stmt):
    name: str
    args: tuple[CallArg, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class LocalQreg(Stmt):
    name: str
    width: int
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class StructVar(Stmt):
    """Local quantum structure variable: `struct1 qst;`."""

    type_name: str
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class VarDecl(Stmt):
    type_name: str  # int | float
    name: str
    init: Expr | None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Assign(Stmt):
    name: str
    expr: Expr
    op: str = "="  # = += -=
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class IncDec(Stmt):
    name: str
    delta: int  # +1 or -1
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ForStmt(Stmt):
    init: Stmt  # VarDecl or Assign
    cond: Expr
    step: Stmt  # IncDec or Assign
    body: tuple[Stmt, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class IfStmt(Stmt):
    """if / else-if chain; quantum or classical is decided during attachment."""

    branches: tuple[tuple[Expr, tuple[Stmt, ...]], ...]
    else_body: tuple[Stmt, ...] | None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class QuantumCondition:
    qubit: QubitRef
    bit: int
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class QuantumIf(Stmt):
    """Quantum-controlled conditional: conjunction conditions, call-only bodies.

    Produced from IfStmt by the attachment pass when conditions test qubits.
    """

    branches: tuple[tuple[tuple[QuantumCondition, ...], tuple[CallStmt, ...]], ...]
    else_body: tuple[CallStmt, ...] | None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ReturnStmt(Stmt):
    value: Expr | None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class AssertPoint(Stmt):
    """Inline `//@ assert ...;` annotation between statements."""

    exprs: tuple[Expr, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RawAnnotation(Stmt):
    """Unparsed annotation token captured by the program parser; resolved to
    contracts or assert points during attachment."""

    inner: str
    inner_offset: int
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class GateDecl:
    name: str
    params: tuple[Param, ...]
    contract: Contract | None = None
    raw_annotation: RawAnnotation | None = field(default=None, compare=False)
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ModuleDef:
    name: str
    params: tuple[Param, ...]
    body: tuple[Stmt, ...] | None  # None: prototype (declaration only)
    return_type: str | None = None
    contract: Contract | None = None
    raw_annotation: RawAnnotation | None = field(default=None, compare=False)
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ProgramAst:
    gates: tuple[GateDecl, ...] = ()
    modules: tuple[ModuleDef, ...] = ()
    structs: tuple[StructDef, ...] = ()
    # Top-level item order for pretty-printing: ("gate"|"module"|"struct", name)
    order: tuple[tuple[str, str], ...] = field(default=(), compare=False)

    def gate(self, name: str) -> GateDecl | None:
        for g in self.gates:
            if g.name == name:
                return g
        return None

    def module(self, name: str) -> ModuleDef | None:
        for m in self.modules:
            if m.name == name:
                return m
        return None

    def struct(self, name: str) -> StructDef | None:
        for s in self.structs:
            if s.name == name:
                return s
        return None
