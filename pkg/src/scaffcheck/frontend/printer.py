"""Pretty-printer producing parseable source from an attached program.

print -> reparse -> attach yields a structurally identical program (spans
excluded from equality), which the round-trip tests rely on.
"""
from __future__ import annotations

from ..spec_ast import (
    Amp, AssignsTarget, Behavior, BinOp, Call, Clause, Contract, Epoch, ExpI,
    Expr, Imag, MeasZ, Num, Old, PredCall, QubitRef, RefExpr, SpecAssign,
    SpecEmit, SpecFor, SpecIf, SpecPredicateDef, SpecStmt, SpecVarDecl, UnOp,
    Valid, Var,
)
from .ast_nodes import (
    AssertPoint, Assign, CallArg, CallStmt, ForStmt, GateDecl, IfStmt, IncDec,
    LocalQreg, ModuleDef, Param, ParamKind, ProgramAst, QuantumIf, ReturnStmt,
    Stmt, StructDef, StructVar, VarDecl,
)
from .attach import AnnotatedProgram

_PREC = {"||": 1, "&&": 2, "==": 3, "!=": 3, "<=": 3, "<": 3, ">=": 3, ">": 3,
         "+": 4, "-": 4, "*": 5, "/": 5, "%": 5}
_ASSOCIATIVE = {"+", "*", "&&", "||"}


def print_expr(expr: Expr, parent_prec: int = 0, right: bool = False) -> str:
    if isinstance(expr, Num):
        v = expr.value
        return str(v) if isinstance(v, int) else repr(v)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Imag):
        return "i"
    if isinstance(expr, RefExpr):
        return print_qubit_ref(expr.ref)
    if isinstance(expr, Amp):
        ref = expr.qubit
        if ref.index is None and not ref.explicit_brackets:
            return f"{ref.reg.display()}[{expr.basis.ket()}]"
        return f"{print_qubit_ref(ref)}[{expr.basis.ket()}]"
    if isinstance(expr, Old):
        return f"\\old({print_expr(expr.operand)})"
    if isinstance(expr, Valid):
        return f"\\valid({print_qubit_ref(expr.qubit)}+(|0>..|1>))"
    if isinstance(expr, MeasZ):
        return f"measZ({print_qubit_ref(expr.qubit)})"
    if isinstance(expr, ExpI):
        return f"e^({print_expr(expr.exponent)})"
    if isinstance(expr, Call):
        args = ", ".join(print_expr(a) for a in expr.args)
        return f"{expr.func}({args})"
    if isinstance(expr, PredCall):
        epochs = ""
        if expr.epochs is not None:
            epochs = "{" + ",".join(e.value for e in expr.epochs) + "}"
        args = ", ".join(print_expr(a) for a in expr.args)
        return f"{expr.name}{epochs}({args})"
    if isinstance(expr, UnOp):
        inner = print_expr(expr.operand, parent_prec=6)
        return f"{expr.op}{inner}"
    if isinstance(expr, BinOp):
        prec = _PREC[expr.op]
        lhs = print_expr(expr.lhs, parent_prec=prec)
        rhs = print_expr(expr.rhs, parent_prec=prec, right=True)
        text = f"{lhs} {expr.op} {rhs}"
        if prec < parent_prec or (prec == parent_prec and right
                                  and expr.op not in _ASSOCIATIVE):
            return f"({text})"
        if parent_prec == 6:
            return f"({text})"
        return text
    raise TypeError(f"cannot print {type(expr).__name__}")


def print_qubit_ref(ref: QubitRef) -> str:
    base = ref.reg.display()
    if ref.is_slice:
        return f"{base}[{print_expr(ref.index)}..{print_expr(ref.slice_hi)}]"
    if ref.index is not None:
        return f"{base}[{print_expr(ref.index)}]"
    if ref.explicit_brackets:
        return f"{base}[]"
    return base


def _print_clause(keyword: str, clause: Clause) -> str:
    label = f"{clause.label}: " if clause.label else ""
    return f"{keyword} {label}{print_expr(clause.expr)};"


def _print_spec_stmt(stmt: SpecStmt, indent: str) -> list[str]:
    if isinstance(stmt, SpecVarDecl):
        init = f" = {print_expr(stmt.init)}" if stmt.init is not None else ""
        return [f"{indent}int {stmt.name}{init};"]
    if isinstance(stmt, SpecAssign):
        return [f"{indent}{stmt.name} {stmt.op} {print_expr(stmt.expr)};"]
    if isinstance(stmt, SpecEmit):
        return [f"{indent}//ensures {print_expr(stmt.expr)};"]
    if isinstance(stmt, SpecFor):
        init = _print_spec_stmt(stmt.init, "")[0].rstrip(";") + ";"
        step = _print_step(stmt.step)
        lines = [f"{indent}for ({init} {print_expr(stmt.cond)}; {step}) {{"]
        for s in stmt.body:
            lines.extend(_print_spec_stmt(s, indent + "  "))
        lines.append(f"{indent}}}")
        return lines
    if isinstance(stmt, SpecIf):
        lines = [f"{indent}if ({print_expr(stmt.cond)}) {{"]
        for s in stmt.then_body:
            lines.extend(_print_spec_stmt(s, indent + "  "))
        if stmt.else_body:
            lines.append(f"{indent}}} else {{")
            for s in stmt.else_body:
                lines.extend(_print_spec_stmt(s, indent + "  "))
        lines.append(f"{indent}}}")
        return lines
    raise TypeError(f"cannot print {type(stmt).__name__}")


def _print_step(step: SpecStmt) -> str:
    assert isinstance(step, SpecAssign)
    if step.op == "+=" and step.expr == Num(1):
        return f"{step.name}++"
    if step.op == "-=" and step.expr == Num(1):
        return f"{step.name}--"
    return f"{step.name} {step.op} {print_expr(step.expr)}"


def print_contract(contract: Contract) -> list[str]:
    lines = ["/*@"]
    for clause in contract.requires:
        lines.append(f"  {_print_clause('requires', clause)}")
    if contract.assigns is not None:
        for target in contract.assigns:
            if target.qubit is None:
                lines.append("  assigns \\nothing;")
            else:
                lines.append(f"  assigns {print_qubit_ref(target.qubit)}"
                             f"[|0>..|1>];")
    for pdef in contract.predicate_defs:
        params = ", ".join(f"{p.name}[]" if p.is_array else p.name
                           for p in pdef.params)
        lines.append(f"  module {pdef.name}({params}) {{")
        for stmt in pdef.body:
            lines.extend(_print_spec_stmt(stmt, "    "))
        lines.append("  }")
    for clause in contract.ensures:
        lines.append(f"  {_print_clause('ensures', clause)}")
    for behavior in contract.behaviors:
        lines.append(f"  behavior {behavior.name}:")
        for expr in behavior.assumes:
            lines.append(f"    assumes {print_expr(expr)};")
        for clause in behavior.ensures:
            lines.append(f"    {_print_clause('ensures', clause)}")
    if contract.complete:
        lines.append("  complete behaviors;")
    if contract.disjoint:
        lines.append("  disjoint behaviors;")
    lines.append("*/")
    return lines


def _print_param(param: Param) -> str:
    if param.kind is ParamKind.QREG:
        width = "" if param.width is None else f"[{param.width}]"
        return f"qreg {param.name}{width}"
    return f"{param.kind.value} {param.name}"


def _print_call_arg(arg: CallArg) -> str:
    if arg.qubit is not None:
        return print_qubit_ref(arg.qubit)
    return print_expr(arg.expr)


def print_stmt(stmt: Stmt, indent: str) -> list[str]:
    if isinstance(stmt, CallStmt):
        args = ", ".join(_print_call_arg(a) for a in stmt.args)
        return [f"{indent}{stmt.name}({args});"]
    if isinstance(stmt, LocalQreg):
        return [f"{indent}qreg {stmt.name}[{stmt.width}];"]
    if isinstance(stmt, StructVar):
        return [f"{indent}{stmt.type_name} {stmt.name};"]
    if isinstance(stmt, VarDecl):
        init = f" = {print_expr(stmt.init)}" if stmt.init is not None else ""
        return [f"{indent}{stmt.type_name} {stmt.name}{init};"]
    if isinstance(stmt, Assign):
        return [f"{indent}{stmt.name} {stmt.op} {print_expr(stmt.expr)};"]
    if isinstance(stmt, IncDec):
        op = "++" if stmt.delta > 0 else "--"
        return [f"{indent}{stmt.name}{op};"]
    if isinstance(stmt, ReturnStmt):
        if stmt.value is None:
            return [f"{indent}return;"]
        return [f"{indent}return {print_expr(stmt.value)};"]
    if isinstance(stmt, AssertPoint):
        return [f"{indent}//@ assert {print_expr(e)};" for e in stmt.exprs]
    if isinstance(stmt, ForStmt):
        init = print_stmt(stmt.init, "")[0].rstrip(";") + ";"
        if isinstance(stmt.step, IncDec):
            step = f"{stmt.step.name}{'++' if stmt.step.delta > 0 else '--'}"
        else:
            step = f"{stmt.step.name} {stmt.step.op} {print_expr(stmt.step.expr)}"
        lines = [f"{indent}for ({init} {print_expr(stmt.cond)}; {step}) {{"]
        for s in stmt.body:
            lines.extend(print_stmt(s, indent + "  "))
        lines.append(f"{indent}}}")
        return lines
    if isinstance(stmt, IfStmt):
        lines = []
        for k, (cond, body) in enumerate(stmt.branches):
            head = "if" if k == 0 else "} else if"
            lines.append(f"{indent}{head} ({print_expr(cond)}) {{")
            for s in body:
                lines.extend(print_stmt(s, indent + "  "))
        if stmt.else_body is not None:
            lines.append(f"{indent}}} else {{")
            for s in stmt.else_body:
                lines.extend(print_stmt(s, indent + "  "))
        lines.append(f"{indent}}}")
        return lines
    if isinstance(stmt, QuantumIf):
        lines = []
        for k, (conds, body) in enumerate(stmt.branches):
            cond = " && ".join(f"{print_qubit_ref(c.qubit)}=={c.bit}"
                               for c in conds)
            head = "if" if k == 0 else "} else if"
            lines.append(f"{indent}{head} ({cond}) {{")
            for s in body:
                lines.extend(print_stmt(s, indent + "  "))
        if stmt.else_body is not None:
            lines.append(f"{indent}}} else {{")
            for s in stmt.else_body:
                lines.extend(print_stmt(s, indent + "  "))
        lines.append(f"{indent}}}")
        return lines
    raise TypeError(f"cannot print {type(stmt).__name__}")


def print_program(program: AnnotatedProgram) -> str:
    ast = program.ast
    blocks: list[str] = []
    for kind, name in ast.order:
        lines: list[str] = []
        if kind == "struct":
            struct = ast.struct(name)
            lines.append(f"qstruct {name} {{")
            for fname, width in struct.fields:
                lines.append(f"  qreg {fname}[{width}];")
            lines.append("};")
        elif kind == "gate":
            gate = ast.gate(name)
            if gate.contract is not None:
                lines.extend(print_contract(gate.contract))
            params = ", ".join(_print_param(p) for p in gate.params)
            lines.append(f"gate {gate.name}({params});")
        else:
            mod = ast.module(name)
            if mod.contract is not None:
                lines.extend(print_contract(mod.contract))
            params = ", ".join(_print_param(p) for p in mod.params)
            ret = f"{mod.return_type} " if mod.return_type else ""
            if mod.body is None:
                lines.append(f"{ret}module {mod.name}({params});")
            else:
                lines.append(f"{ret}module {mod.name}({params}) {{")
                for stmt in mod.body:
                    lines.extend(print_stmt(stmt, "  "))
                lines.append("}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n"
