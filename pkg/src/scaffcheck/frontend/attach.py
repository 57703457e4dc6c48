"""Attachment pass: bind annotations to declarations, parse assertion
points, classify quantum-controlled conditionals, and register user-defined
spec predicates."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..diagnostics import Diagnostic, ParseError, Severity
from ..source import SourceFile, Span
from ..spec_ast import (
    BinOp, Contract, Expr, Num, QubitRef, RefExpr, SpecPredicateDef,
)
from .annotations import parse_assertion_text, parse_contract_text
from .ast_nodes import (
    AssertPoint, CallStmt, ForStmt, GateDecl, IfStmt, LocalQreg, ModuleDef,
    ProgramAst, QuantumCondition, QuantumIf, RawAnnotation, Stmt, StructVar,
    VarDecl,
)


@dataclass
class AnnotatedProgram:
    source: SourceFile
    ast: ProgramAst
    predicates: dict[str, SpecPredicateDef] = field(default_factory=dict)
    diagnostics: list[Diagnostic] = field(default_factory=list)

    def declaration(self, name: str):
        return self.ast.module(name) or self.ast.gate(name)


def _register_names(program: ProgramAst, decl) -> set[str]:
    """Names usable as register references inside a declaration's body."""
    names = {p.name for p in decl.params}
    if isinstance(decl, ModuleDef) and decl.body:
        for stmt in decl.body:
            if isinstance(stmt, LocalQreg):
                names.add(stmt.name)
            elif isinstance(stmt, StructVar):
                names.add(stmt.name)
    return names


def _is_quantum_cond(expr: Expr, registers: set[str]) -> bool:
    if isinstance(expr, BinOp):
        if expr.op == "&&":
            return (_is_quantum_cond(expr.lhs, registers)
                    and _is_quantum_cond(expr.rhs, registers))
        if expr.op == "==":
            return (isinstance(expr.lhs, RefExpr)
                    and expr.lhs.ref.reg.name in registers
                    and expr.lhs.ref.index is not None
                    and isinstance(expr.rhs, Num))
    return False


def _flatten_quantum_cond(expr: Expr) -> list[QuantumCondition]:
    if isinstance(expr, BinOp) and expr.op == "&&":
        return _flatten_quantum_cond(expr.lhs) + _flatten_quantum_cond(expr.rhs)
    assert isinstance(expr, BinOp) and expr.op == "=="
    ref: QubitRef = expr.lhs.ref
    bit = int(expr.rhs.value)
    return [QuantumCondition(qubit=ref, bit=bit, span=expr.span)]


class _Attacher:
    def __init__(self, source: SourceFile, ast: ProgramAst):
        self.source = source
        self.ast = ast
        self.diags: list[Diagnostic] = []
        self.predicates: dict[str, SpecPredicateDef] = {}

    def error(self, span: Span, message: str):
        self.diags.append(Diagnostic.at(self.source, span, Severity.ERROR, message))

    def warn(self, span: Span, message: str):
        self.diags.append(Diagnostic.at(self.source, span, Severity.WARNING, message))

    def run(self) -> AnnotatedProgram:
        gates = tuple(self._attach_gate(g) for g in self.ast.gates)
        modules = tuple(self._attach_module(m) for m in self.ast.modules)
        ast = replace(self.ast, gates=gates, modules=modules)
        return AnnotatedProgram(source=self.source, ast=ast,
                                predicates=self.predicates, diagnostics=self.diags)

    def _parse_contract(self, raw: RawAnnotation) -> Contract | None:
        try:
            contract = parse_contract_text(raw.inner, raw.inner_offset)
        except ParseError as exc:
            self.error(exc.span, exc.message)
            return None
        for pdef in contract.predicate_defs:
            if pdef.name in self.predicates:
                self.warn(pdef.span, f"spec predicate '{pdef.name}' redefined")
            self.predicates[pdef.name] = pdef
        self._check_flags(contract)
        return contract

    def _check_flags(self, contract: Contract):
        if (contract.complete or contract.disjoint) and not contract.behaviors:
            self.error(contract.span,
                       "'complete/disjoint behaviors' requires at least one behavior")
        seen: set[str] = set()
        for b in contract.behaviors:
            if b.name in seen:
                self.error(b.span, f"duplicate behavior name '{b.name}'")
            seen.add(b.name)
        labels = [c.label for c in contract.ensures if c.label]
        for lbl in sorted({l for l in labels if labels.count(l) > 1}):
            self.warn(contract.span, f"duplicate clause label '{lbl}'")

    def _attach_gate(self, gate: GateDecl) -> GateDecl:
        if gate.raw_annotation is None:
            return gate
        contract = self._parse_contract(gate.raw_annotation)
        return replace(gate, contract=contract, raw_annotation=None)

    def _attach_module(self, mod: ModuleDef) -> ModuleDef:
        contract = None
        if mod.raw_annotation is not None:
            contract = self._parse_contract(mod.raw_annotation)
        body = mod.body
        if body is not None:
            registers = _register_names(self.ast, mod)
            body = tuple(self._attach_stmts(body, registers))
        return replace(mod, contract=contract, raw_annotation=None, body=body)

    def _attach_stmts(self, stmts: tuple[Stmt, ...], registers: set[str]) -> list[Stmt]:
        out: list[Stmt] = []
        for stmt in stmts:
            if isinstance(stmt, RawAnnotation):
                try:
                    exprs = parse_assertion_text(stmt.inner, stmt.inner_offset)
                except ParseError as exc:
                    self.error(exc.span, exc.message)
                    continue
                out.append(AssertPoint(exprs=tuple(exprs), span=stmt.span))
            elif isinstance(stmt, IfStmt):
                out.append(self._attach_if(stmt, registers))
            elif isinstance(stmt, ForStmt):
                body = tuple(self._attach_stmts(stmt.body, registers))
                out.append(replace(stmt, body=body))
            else:
                out.append(stmt)
        return out

    def _attach_if(self, stmt: IfStmt, registers: set[str]) -> Stmt:
        quantum = [_is_quantum_cond(cond, registers) for cond, _ in stmt.branches]
        if not any(quantum):
            branches = tuple((cond, tuple(self._attach_stmts(body, registers)))
                             for cond, body in stmt.branches)
            else_body = None
            if stmt.else_body is not None:
                else_body = tuple(self._attach_stmts(stmt.else_body, registers))
            return replace(stmt, branches=branches, else_body=else_body)
        if not all(quantum):
            self.error(stmt.span, "conditional mixes quantum and classical "
                                  "conditions across branches")
            return stmt
        branches = []
        for cond, body in stmt.branches:
            conds = tuple(_flatten_quantum_cond(cond))
            calls = self._calls_only(body, stmt.span)
            branches.append((conds, calls))
        else_calls = None
        if stmt.else_body is not None:
            else_calls = self._calls_only(stmt.else_body, stmt.span)
        return QuantumIf(branches=tuple(branches), else_body=else_calls,
                         span=stmt.span)

    def _calls_only(self, body: tuple[Stmt, ...], span: Span) -> tuple[CallStmt, ...]:
        calls: list[CallStmt] = []
        for s in body:
            if isinstance(s, CallStmt):
                calls.append(s)
            else:
                self.error(s.span if hasattr(s, "span") else span,
                           "quantum-controlled branch may contain only "
                           "gate/module calls")
        return tuple(calls)


def attach_contracts(source: SourceFile, ast: ProgramAst) -> AnnotatedProgram:
    return _Attacher(source, ast).run()
