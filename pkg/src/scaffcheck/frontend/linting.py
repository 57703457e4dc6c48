"""Static checks over an attached program: identifier resolution, index
bounds, frame-clause sanity, quantum-control reuse, and contract hygiene."""
from __future__ import annotations

import difflib
from dataclasses import dataclass, field

from ..diagnostics import Diagnostic, Severity
from ..simcore import BUILTIN_GATES
from ..source import SourceFile, Span
from ..spec_ast import (
    Amp, BinOp, Call, Clause, Contract, Epoch, ExpI, Expr, Imag, MeasZ, Num,
    Old, PredCall, QubitRef, RefExpr, SpecAssign, SpecEmit, SpecFor, SpecIf,
    SpecPredicateDef, SpecStmt, SpecVarDecl, UnOp, Valid, Var,
)
from .ast_nodes import (
    AssertPoint, Assign, CallArg, CallStmt, ForStmt, GateDecl, IfStmt, IncDec,
    LocalQreg, ModuleDef, Param, ParamKind, QuantumIf, ReturnStmt, Stmt,
    StructVar, VarDecl,
)
from .attach import AnnotatedProgram

BUILTIN_CONSTANTS = {"PI", "pi", "M_PI"}
BUILTIN_FUNCS = {"sqrt", "pow", "power", "cos", "sin", "isin", "length", "exp"}
PREDEFINED_PREDICATES = {
    "Unchanged": 2, "Reverse": 2, "EqualRanges": 3, "HadamardCheck": 2,
    "PhaseCheck": 2, "PhaseCheck_Rx": 2, "qbitselfCheck": 1,
}


@dataclass
class Scope:
    """Visible names while resolving one declaration."""

    registers: dict[str, int | str | None] = field(default_factory=dict)
    structs: dict[str, str] = field(default_factory=dict)  # var -> struct type
    classicals: set[str] = field(default_factory=set)

    def child(self) -> "Scope":
        return Scope(registers=dict(self.registers), structs=dict(self.structs),
                     classicals=set(self.classicals))

    def known_names(self) -> set[str]:
        return (set(self.registers) | set(self.structs) | self.classicals
                | BUILTIN_CONSTANTS)


class Linter:
    def __init__(self, program: AnnotatedProgram):
        self.program = program
        self.source = program.source
        self.diags: list[Diagnostic] = []

    def error(self, span: Span, message: str):
        self.diags.append(Diagnostic.at(self.source, span, Severity.ERROR, message))

    def warn(self, span: Span, message: str):
        self.diags.append(Diagnostic.at(self.source, span, Severity.WARNING, message))

    def _unknown(self, span: Span, name: str, scope: Scope):
        candidates = difflib.get_close_matches(name, sorted(scope.known_names()), n=2)
        hint = f" (did you mean {' or '.join(repr(c) for c in candidates)}?)" if candidates else ""
        self.error(span, f"unknown identifier '{name}'{hint}")

    # -- entry ------------------------------------------------------------
    def run(self) -> list[Diagnostic]:
        ast = self.program.ast
        seen: set[str] = set()
        for kind, name in ast.order:
            if name in seen and kind != "struct":
                decl = ast.gate(name) or ast.module(name)
                self.error(decl.span, f"duplicate declaration of '{name}'")
            seen.add(name)
        for struct in ast.structs:
            for fname, width in struct.fields:
                if width <= 0:
                    self.error(struct.span,
                               f"register width must be positive: {fname}[{width}]")
        for gate in ast.gates:
            self._lint_decl(gate)
        for mod in ast.modules:
            self._lint_decl(mod)
            if mod.body is not None:
                self._lint_body(mod)
        return self.diags

    # -- declarations -------------------------------------------------------
    def _decl_scope(self, decl) -> Scope:
        scope = Scope()
        for p in decl.params:
            if p.kind is ParamKind.QREG:
                if isinstance(p.width, int) and p.width <= 0:
                    self.error(p.span,
                               f"register width must be positive: {p.name}[{p.width}]")
                scope.registers[p.name] = p.width
                if isinstance(p.width, str):
                    scope.classicals.add(p.width)  # symbolic width is readable
            else:
                scope.classicals.add(p.name)
        return scope

    def _lint_decl(self, decl):
        scope = self._decl_scope(decl)
        contract = decl.contract
        if contract is None:
            return
        if contract.behaviors and not (contract.complete or contract.disjoint):
            self.warn(contract.span,
                      "behaviors declared without 'complete behaviors' or "
                      "'disjoint behaviors'")
        for clause in contract.requires:
            self._lint_expr(clause.expr, scope, old_ok=False)
        if contract.assigns is not None:
            for target in contract.assigns:
                if target.qubit is not None:
                    self._resolve_qubit(target.qubit, scope)
        for clause in contract.ensures:
            self._lint_expr(clause.expr, scope, old_ok=True)
        for behavior in contract.behaviors:
            for expr in behavior.assumes:
                self._lint_expr(expr, scope, old_ok=True)
            for clause in behavior.ensures:
                self._lint_expr(clause.expr, scope, old_ok=True)
        for pdef in contract.predicate_defs:
            self._lint_predicate_def(pdef)

    def _lint_predicate_def(self, pdef: SpecPredicateDef):
        scope = Scope()
        for p in pdef.params:
            if p.is_array:
                scope.registers[p.name] = None
            else:
                scope.classicals.add(p.name)
        self._lint_spec_stmts(pdef.body, scope)

    def _lint_spec_stmts(self, stmts: tuple[SpecStmt, ...], scope: Scope):
        for stmt in stmts:
            if isinstance(stmt, SpecVarDecl):
                if stmt.init is not None:
                    self._lint_expr(stmt.init, scope, old_ok=False)
                scope.classicals.add(stmt.name)
            elif isinstance(stmt, SpecAssign):
                if stmt.name not in scope.classicals:
                    self._unknown(stmt.span, stmt.name, scope)
                self._lint_expr(stmt.expr, scope, old_ok=False)
            elif isinstance(stmt, SpecFor):
                inner = scope.child()
                self._lint_spec_stmts((stmt.init,), inner)
                self._lint_expr(stmt.cond, inner, old_ok=False)
                self._lint_spec_stmts(stmt.body + (stmt.step,), inner)
            elif isinstance(stmt, SpecIf):
                self._lint_expr(stmt.cond, scope, old_ok=False)
                self._lint_spec_stmts(stmt.then_body, scope.child())
                self._lint_spec_stmts(stmt.else_body, scope.child())
            elif isinstance(stmt, SpecEmit):
                self._lint_expr(stmt.expr, scope, old_ok=True)

    # -- spec expressions -----------------------------------------------------
    def _resolve_qubit(self, ref: QubitRef, scope: Scope):
        name = ref.reg.name
        if ref.reg.member is not None:
            struct_type = scope.structs.get(name)
            if struct_type is None:
                self._unknown(ref.reg.span, name, scope)
                return
            struct = self.program.ast.struct(struct_type)
            fields = dict(struct.fields) if struct else {}
            if ref.reg.member not in fields:
                self.error(ref.reg.span,
                           f"struct '{struct_type}' has no member '{ref.reg.member}'")
                return
            width: int | str | None = fields[ref.reg.member]
        elif name in scope.registers:
            width = scope.registers[name]
        else:
            self._unknown(ref.span, name, scope)
            return
        if ref.index is not None and isinstance(ref.index, Num) \
                and isinstance(width, int):
            idx = int(ref.index.value)
            if not 0 <= idx < width:
                self.error(ref.span,
                           f"index {idx} out of range for {ref.reg.display()}[{width}]")
        if ref.index is not None and not isinstance(ref.index, Num):
            self._lint_expr(ref.index, scope, old_ok=False)
        if ref.slice_hi is not None and not isinstance(ref.slice_hi, Num):
            self._lint_expr(ref.slice_hi, scope, old_ok=False)

    def _resolve_amp(self, amp: Amp, scope: Scope):
        ref = amp.qubit
        if ref.index is None and not ref.explicit_brackets:
            # width-1 shorthand q[|b>]
            width = scope.registers.get(ref.reg.name)
            if ref.reg.name not in scope.registers:
                self._unknown(ref.span, ref.reg.name, scope)
                return
            if isinstance(width, int) and width != 1:
                self.error(ref.span,
                           f"amplitude shorthand needs a width-1 register; "
                           f"'{ref.reg.name}' has width {width}")
            return
        self._resolve_qubit(ref, scope)

    def _lint_expr(self, expr: Expr, scope: Scope, old_ok: bool):
        if isinstance(expr, Num) or isinstance(expr, Imag):
            return
        if isinstance(expr, Var):
            if expr.name not in scope.known_names():
                self._unknown(expr.span, expr.name, scope)
            return
        if isinstance(expr, RefExpr):
            self._resolve_qubit(expr.ref, scope)
            return
        if isinstance(expr, Amp):
            self._resolve_amp(expr, scope)
            return
        if isinstance(expr, MeasZ):
            self._resolve_qubit(expr.qubit, scope)
            return
        if isinstance(expr, Valid):
            self._resolve_qubit(expr.qubit, scope)
            return
        if isinstance(expr, Old):
            if not old_ok:
                self.error(expr.span, "\\old used outside a postcondition or "
                                      "assertion context")
            self._lint_expr(expr.operand, scope, old_ok=old_ok)
            return
        if isinstance(expr, ExpI):
            self._lint_expr(expr.exponent, scope, old_ok=old_ok)
            return
        if isinstance(expr, BinOp):
            self._lint_expr(expr.lhs, scope, old_ok=old_ok)
            self._lint_expr(expr.rhs, scope, old_ok=old_ok)
            return
        if isinstance(expr, UnOp):
            self._lint_expr(expr.operand, scope, old_ok=old_ok)
            return
        if isinstance(expr, Call):
            for arg in expr.args:
                self._lint_expr(arg, scope, old_ok=old_ok)
            return
        if isinstance(expr, PredCall):
            self._lint_pred_call(expr, scope, old_ok)
            return

    def _lint_pred_call(self, call: PredCall, scope: Scope, old_ok: bool):
        known_user = call.name in self.program.predicates
        if call.name not in PREDEFINED_PREDICATES and not known_user:
            candidates = difflib.get_close_matches(
                call.name,
                sorted(set(PREDEFINED_PREDICATES) | set(self.program.predicates)),
                n=1)
            hint = f" (did you mean '{candidates[0]}'?)" if candidates else ""
            self.error(call.span, f"unknown predicate '{call.name}'{hint}")
        for arg in call.args:
            if isinstance(arg, Var) and arg.name in scope.registers:
                continue  # bare register argument
            self._lint_expr(arg, scope, old_ok=old_ok)

    # -- module bodies -------------------------------------------------------
    def _lint_body(self, mod: ModuleDef):
        scope = self._decl_scope(mod)
        consumed_controls: dict[tuple[str, int | None], Span] = {}
        self._lint_stmts(mod.body, scope, consumed_controls, top_level=True)

    def _lint_stmts(self, stmts, scope: Scope, consumed: dict, top_level: bool):
        for stmt in stmts:
            self._lint_stmt(stmt, scope, consumed, top_level)

    def _check_not_consumed(self, ref: QubitRef, consumed: dict, span: Span):
        key_exact = (ref.reg.name, int(ref.index.value)
                     if isinstance(ref.index, Num) else None)
        for (name, idx), _ in consumed.items():
            if name != ref.reg.name:
                continue
            if key_exact[1] is None or idx is None or key_exact[1] == idx:
                self.error(span, f"control qubit '{name}"
                                 f"{f'[{idx}]' if idx is not None else ''}' of a "
                                 f"quantum conditional cannot be reused")
                return

    def _lint_stmt(self, stmt: Stmt, scope: Scope, consumed: dict, top_level: bool):
        if isinstance(stmt, LocalQreg):
            if stmt.width <= 0:
                self.error(stmt.span, f"register width must be positive: "
                                      f"{stmt.name}[{stmt.width}]")
            if not top_level:
                self.error(stmt.span, "local register declarations are only "
                                      "supported at module top level")
            scope.registers[stmt.name] = stmt.width
        elif isinstance(stmt, StructVar):
            if self.program.ast.struct(stmt.type_name) is None:
                self.error(stmt.span, f"unknown qstruct type '{stmt.type_name}'")
            else:
                scope.structs[stmt.name] = stmt.type_name
        elif isinstance(stmt, VarDecl):
            if stmt.init is not None:
                self._lint_expr(stmt.init, scope, old_ok=False)
            scope.classicals.add(stmt.name)
        elif isinstance(stmt, (Assign, IncDec)):
            if stmt.name not in scope.classicals:
                self._unknown(stmt.span, stmt.name, scope)
            if isinstance(stmt, Assign):
                self._lint_expr(stmt.expr, scope, old_ok=False)
        elif isinstance(stmt, CallStmt):
            self._lint_call(stmt, scope, consumed)
        elif isinstance(stmt, ForStmt):
            inner = scope.child()
            self._lint_stmt(stmt.init, inner, consumed, top_level=False)
            self._lint_expr(stmt.cond, inner, old_ok=False)
            self._lint_stmts(stmt.body, inner, consumed, top_level=False)
            self._lint_stmt(stmt.step, inner, consumed, top_level=False)
        elif isinstance(stmt, IfStmt):
            for cond, body in stmt.branches:
                self._lint_expr(cond, scope, old_ok=False)
                self._lint_stmts(body, scope.child(), consumed, top_level=False)
            if stmt.else_body is not None:
                self._lint_stmts(stmt.else_body, scope.child(), consumed,
                                 top_level=False)
        elif isinstance(stmt, QuantumIf):
            self._lint_quantum_if(stmt, scope, consumed)
        elif isinstance(stmt, AssertPoint):
            for expr in stmt.exprs:
                self._lint_expr(expr, scope, old_ok=True)
        elif isinstance(stmt, ReturnStmt):
            if stmt.value is not None:
                self._lint_expr(stmt.value, scope, old_ok=False)

    def _lint_call(self, call: CallStmt, scope: Scope, consumed: dict):
        target = (self.program.ast.module(call.name)
                  or self.program.ast.gate(call.name))
        if target is None and call.name not in BUILTIN_GATES:
            self._unknown(call.span, call.name,
                          Scope(classicals={g.name for g in self.program.ast.gates}
                                | {m.name for m in self.program.ast.modules}
                                | set(BUILTIN_GATES)))
        for arg in call.args:
            if arg.qubit is not None:
                ref = arg.qubit
                if ref.index is None and ref.reg.member is None \
                        and ref.reg.name not in scope.registers:
                    # bare name may be a classical variable argument
                    if ref.reg.name in scope.classicals | BUILTIN_CONSTANTS:
                        continue
                    self._unknown(ref.span, ref.reg.name, scope)
                    continue
                self._resolve_qubit(ref, scope)
                self._check_not_consumed(ref, consumed, arg.span)
            else:
                self._lint_expr(arg.expr, scope, old_ok=False)

    def _lint_quantum_if(self, stmt: QuantumIf, scope: Scope, consumed: dict):
        controls: set[tuple[str, int | None]] = set()
        for conds, _body in stmt.branches:
            for cond in conds:
                self._resolve_qubit(cond.qubit, scope)
                if cond.bit not in (0, 1):
                    self.error(cond.span, "quantum condition must compare "
                                          "against 0 or 1")
                idx = (int(cond.qubit.index.value)
                       if isinstance(cond.qubit.index, Num) else None)
                controls.add((cond.qubit.reg.name, idx))
        bodies = [body for _, body in stmt.branches]
        if stmt.else_body:
            bodies.append(stmt.else_body)
        for body in bodies:
            for call in body:
                self._lint_call(call, scope, consumed)
                for arg in call.args:
                    if arg.qubit is None:
                        continue
                    key = (arg.qubit.reg.name,
                           int(arg.qubit.index.value)
                           if isinstance(arg.qubit.index, Num) else None)
                    for cname, cidx in controls:
                        if key[0] == cname and (key[1] is None or cidx is None
                                                or key[1] == cidx):
                            self.error(arg.span,
                                       f"quantum-controlled branch uses control "
                                       f"qubit '{cname}'")
        for key in controls:
            consumed[key] = stmt.span


def lint(program: AnnotatedProgram) -> list[Diagnostic]:
    return Linter(program).run()
