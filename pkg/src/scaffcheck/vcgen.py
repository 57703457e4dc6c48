"""Symbolic execution of straight-line non-entangling modules and emission
of verification conditions in SMT-LIB 2 text.

Complex amplitudes are encoded as pairs of Real constants. Irrational
coefficients stay symbolic: the Hadamard coefficient is a constant c with
2c^2 = 1 and c >= 0; trigonometric factors become uninterpreted constants
tied by Pythagorean side constraints. A solver reporting `unsat` on the
emitted document certifies the contract.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from . import __version__
from .frontend.ast_nodes import (
    Assign, CallStmt, GateDecl, ModuleDef, ParamKind, ReturnStmt, Stmt, VarDecl,
)
from .frontend.attach import AnnotatedProgram
from .spec_ast import (
    Amp, BinOp, Call, Clause, Contract, EquationSet, ExpI, Expr, Imag, MeasZ,
    Num, Old, PredCall, QubitRef, RefExpr, UnOp, Valid, Var,
)
from .specmodel import (
    ExpansionError, ExpansionScope, NeedsRuntime, expand_predicate,
    normalize_contract,
)


class Unsupported(Exception):
    """The declaration is outside the symbolic fragment."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


# -- lightweight SMT term strings ---------------------------------------------

def _fold(op: str, a: str, b: str) -> str:
    return f"({op} {a} {b})"


def s_add(a: str, b: str) -> str:
    if a == "0":
        return b
    if b == "0":
        return a
    return _fold("+", a, b)


def s_sub(a: str, b: str) -> str:
    if b == "0":
        return a
    if a == "0":
        return s_neg(b)
    return _fold("-", a, b)


def s_neg(a: str) -> str:
    if a == "0":
        return "0"
    return f"(- {a})"


def s_mul(a: str, b: str) -> str:
    if a == "0" or b == "0":
        return "0"
    if a == "1":
        return b
    if b == "1":
        return a
    return _fold("*", a, b)


def s_eq(a: str, b: str) -> str:
    return _fold("=", a, b)


@dataclass(frozen=True)
class SymComplex:
    re: str
    im: str

    def __add__(self, other: "SymComplex") -> "SymComplex":
        return SymComplex(s_add(self.re, other.re), s_add(self.im, other.im))

    def __sub__(self, other: "SymComplex") -> "SymComplex":
        return SymComplex(s_sub(self.re, other.re), s_sub(self.im, other.im))

    def __mul__(self, other: "SymComplex") -> "SymComplex":
        re = s_sub(s_mul(self.re, other.re), s_mul(self.im, other.im))
        im = s_add(s_mul(self.re, other.im), s_mul(self.im, other.re))
        return SymComplex(re, im)

    def scale(self, k: str) -> "SymComplex":
        return SymComplex(s_mul(k, self.re), s_mul(k, self.im))

    def neg(self) -> "SymComplex":
        return SymComplex(s_neg(self.re), s_neg(self.im))

    def times_i(self) -> "SymComplex":
        return SymComplex(s_neg(self.im), self.re)

    def times_minus_i(self) -> "SymComplex":
        return SymComplex(self.im, s_neg(self.re))

    def sq_magnitude(self) -> str:
        return s_add(s_mul(self.re, self.re), s_mul(self.im, self.im))

    def is_const(self) -> bool:
        return _is_literal(self.re) and _is_literal(self.im)


def _is_literal(term: str) -> bool:
    try:
        float(term)
        return True
    except ValueError:
        return False


ZERO = SymComplex("0", "0")
ONE = SymComplex("1", "0")


@dataclass
class SymbolicState:
    """Per-qubit symbolic amplitude pairs plus accumulated side constraints."""

    pairs: dict[tuple[str, int], tuple[SymComplex, SymComplex]]
    decls: list[str] = field(default_factory=list)
    constraints: list[tuple[str, str]] = field(default_factory=list)  # (term, comment)
    trig: dict[str, tuple[str, str]] = field(default_factory=dict)
    sqrts: dict[str, str] = field(default_factory=dict)
    counters: dict[str, int] = field(default_factory=dict)
    uses_c: bool = False

    def declare(self, name: str):
        if name not in self.decls:
            self.decls.append(name)

    def fresh(self, prefix: str) -> str:
        n = self.counters.get(prefix, 0)
        self.counters[prefix] = n + 1
        return f"{prefix}{n}" if n else prefix

    def hadamard_coefficient(self) -> str:
        if not self.uses_c:
            self.uses_c = True
            self.declare("c")
            self.constraints.append(("(= (* 2 (* c c)) 1)",
                                     "2*c^2 = 1 (c is the Hadamard coefficient)"))
            self.constraints.append(("(>= c 0)", "c is non-negative"))
        return "c"

    def trig_pair(self, key: str) -> tuple[str, str]:
        """Uninterpreted cos/sin constants for one angle expression."""
        if key not in self.trig:
            n = len(self.trig)
            ct, st = f"ct{n}", f"st{n}"
            self.declare(ct)
            self.declare(st)
            self.constraints.append(
                (f"(= (+ (* {ct} {ct}) (* {st} {st})) 1)",
                 f"cos^2 + sin^2 = 1 for angle {key}"))
            self.trig[key] = (ct, st)
        return self.trig[key]


def _angle_key(expr: Expr) -> str:
    """Canonical text for an angle expression, used to share trig symbols."""
    if isinstance(expr, Num):
        v = expr.value
        return str(int(v)) if float(v).is_integer() else repr(float(v))
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, BinOp):
        return f"({_angle_key(expr.lhs)}{expr.op}{_angle_key(expr.rhs)})"
    if isinstance(expr, UnOp):
        return f"({expr.op}{_angle_key(expr.operand)})"
    if isinstance(expr, Call):
        args = ",".join(_angle_key(a) for a in expr.args)
        return f"{expr.func}({args})"
    raise Unsupported("angle expression outside the symbolic fragment")


# -- symbolic gate semantics -----------------------------------------------------

def _apply_1q(state: SymbolicState, gate: str, key: tuple[str, int],
              angle: Expr | None):
    a, b = state.pairs[key]
    if gate == "X":
        state.pairs[key] = (b, a)
    elif gate == "Y":
        state.pairs[key] = (b.times_minus_i(), a.times_i())
    elif gate == "Z":
        state.pairs[key] = (a, b.neg())
    elif gate == "S":
        state.pairs[key] = (a, b.times_i())
    elif gate == "T":
        c = state.hadamard_coefficient()  # e^{i pi/4} = c + i c
        state.pairs[key] = (a, b * SymComplex(c, c))
    elif gate == "H":
        c = state.hadamard_coefficient()
        state.pairs[key] = ((a + b).scale(c), (a - b).scale(c))
    elif gate in ("Rx", "Ry", "Rz"):
        half = BinOp("/", angle, Num(2))
        ct, st = state.trig_pair(_angle_key(half))
        cos_c = SymComplex(ct, "0")
        sin_c = SymComplex(st, "0")
        if gate == "Rx":
            minus_i_sin = SymComplex("0", s_neg(st))
            state.pairs[key] = (a * cos_c + b * minus_i_sin,
                                a * minus_i_sin + b * cos_c)
        elif gate == "Ry":
            state.pairs[key] = (a * cos_c - b * sin_c, a * sin_c + b * cos_c)
        else:
            e_minus = SymComplex(ct, s_neg(st))
            e_plus = SymComplex(ct, st)
            state.pairs[key] = (a * e_minus, b * e_plus)
    elif gate == "Phase":
        ct, st = state.trig_pair(_angle_key(angle))
        state.pairs[key] = (a, b * SymComplex(ct, st))
    else:
        raise Unsupported(f"gate '{gate}' outside the symbolic fragment")


def _classical_bit(pair: tuple[SymComplex, SymComplex]) -> int | None:
    a, b = pair
    if a.re == "1" and a.im == "0" and b.re == "0" and b.im == "0":
        return 0
    if a.re == "0" and a.im == "0" and b.re == "1" and b.im == "0":
        return 1
    return None


def symbolic_exec(decl, program: AnnotatedProgram) -> SymbolicState:
    """Symbolically execute a gate declaration or a straight-line module."""
    params = decl.params
    state = SymbolicState(pairs={})
    classicals: set[str] = set()
    for p in params:
        if p.kind is ParamKind.QREG:
            width = p.width if isinstance(p.width, int) else None
            if width is None:
                raise Unsupported(f"register '{p.name}' has symbolic width")
            for i in range(width):
                base = f"{p.name}{i}" if width > 1 else p.name
                a = SymComplex(f"{base}_a_re", f"{base}_a_im")
                b = SymComplex(f"{base}_b_re", f"{base}_b_im")
                for t in (a.re, a.im, b.re, b.im):
                    state.declare(t)
                state.pairs[(p.name, i)] = (a, b)
        else:
            classicals.add(p.name)

    if isinstance(decl, GateDecl):
        _exec_builtin_gate(decl, state, classicals)
        return state

    if decl.body is None:
        raise Unsupported(f"module '{decl.name}' has no body")
    for stmt in decl.body:
        _exec_stmt_symbolic(stmt, decl, state, classicals, program)
    return state


def _exec_builtin_gate(decl: GateDecl, state: SymbolicState, classicals: set[str]):
    from .simcore import BUILTIN_GATES
    name = decl.name
    if name not in BUILTIN_GATES:
        raise Unsupported(f"gate '{name}' is not in the standard library")
    info = BUILTIN_GATES[name]
    qregs = [p for p in decl.params if p.kind is ParamKind.QREG]
    angles = [p for p in decl.params if p.kind is not ParamKind.QREG]
    if info.n_qubits == 1:
        key = (qregs[0].name, 0)
        angle = Var(name=angles[0].name) if angles else None
        _apply_1q(state, name, key, angle)
        return
    raise Unsupported("entangling gate")


def _exec_stmt_symbolic(stmt: Stmt, decl, state: SymbolicState,
                        classicals: set[str], program: AnnotatedProgram):
    from .simcore import BUILTIN_GATES
    if isinstance(stmt, (VarDecl, Assign)):
        raise Unsupported("classical state in the body is outside the "
                          "symbolic fragment")
    if isinstance(stmt, ReturnStmt):
        return
    if not isinstance(stmt, CallStmt):
        raise Unsupported(f"{type(stmt).__name__} is outside the straight-line "
                          f"fragment")
    info = BUILTIN_GATES.get(stmt.name)
    if info is None:
        raise Unsupported(f"call to '{stmt.name}' (only library gates are "
                          f"supported symbolically)")
    qubit_args: list[tuple[str, int]] = []
    angle_arg: Expr | None = None
    for arg in stmt.args:
        if arg.qubit is not None and len(qubit_args) < info.n_qubits:
            ref = arg.qubit
            idx = 0
            if ref.index is not None:
                if not isinstance(ref.index, Num):
                    raise Unsupported("computed qubit index")
                idx = int(ref.index.value)
            key = (ref.reg.name, idx)
            if key not in state.pairs:
                raise Unsupported(f"unknown qubit '{ref.reg.display()}[{idx}]'")
            qubit_args.append(key)
        else:
            angle_arg = arg.expr if arg.expr is not None else \
                Var(name=arg.qubit.reg.name)
    if info.n_qubits == 1:
        _apply_1q(state, stmt.name, qubit_args[0], angle_arg)
        return
    if stmt.name == "CNOT":
        target, control = qubit_args
        bit = _classical_bit(state.pairs[control])
        if bit is None:
            raise Unsupported("entangling gate")
        if bit == 1:
            _apply_1q(state, "X", target, None)
        return
    raise Unsupported("entangling gate")


# -- VC document -----------------------------------------------------------------

@dataclass
class VcDocument:
    module: str
    text: str

    def filename(self) -> str:
        return f"{self.module}.vc.smt2"


class _Translator:
    """Spec expression -> SMT terms over input/post symbolic pairs."""

    def __init__(self, state: SymbolicState, inputs: dict):
        self.state = state
        self.inputs = inputs  # (reg, idx) -> (SymComplex, SymComplex)

    def _pair_for(self, amp: Amp, old: bool) -> SymComplex:
        ref = amp.qubit
        idx = 0
        if ref.index is not None:
            if not isinstance(ref.index, Num):
                raise Unsupported("computed qubit index in a contract")
            idx = int(ref.index.value)
        key = (ref.reg.name, idx)
        table = self.inputs if old else self.state.pairs
        if key not in table:
            raise Unsupported(f"unknown qubit '{ref.reg.display()}[{idx}]' in "
                              f"a contract")
        a, b = table[key]
        return a if amp.basis.value == 0 else b

    def complex_term(self, expr: Expr, old: bool = False) -> SymComplex:
        if isinstance(expr, Num):
            v = expr.value
            lit = str(int(v)) if float(v).is_integer() else repr(float(v))
            return SymComplex(lit, "0")
        if isinstance(expr, Imag):
            return SymComplex("0", "1")
        if isinstance(expr, Amp):
            return self._pair_for(expr, old)
        if isinstance(expr, Old):
            return self.complex_term(expr.operand, old=True)
        if isinstance(expr, Var):
            raise Unsupported(f"free classical variable '{expr.name}' in an "
                              f"equation")
        if isinstance(expr, UnOp) and expr.op == "-":
            return self.complex_term(expr.operand, old).neg()
        if isinstance(expr, BinOp):
            lhs = self.complex_term(expr.lhs, old)
            rhs = self.complex_term(expr.rhs, old)
            if expr.op == "+":
                return lhs + rhs
            if expr.op == "-":
                return lhs - rhs
            if expr.op == "*":
                return lhs * rhs
            if expr.op == "/":
                if isinstance(expr.rhs, Num) and rhs.im == "0":
                    re = "0" if lhs.re == "0" else f"(/ {lhs.re} {rhs.re})"
                    im = "0" if lhs.im == "0" else f"(/ {lhs.im} {rhs.re})"
                    return SymComplex(re, im)
                raise Unsupported("division by a non-literal in an equation")
        if isinstance(expr, Call):
            return self._call_term(expr, old)
        if isinstance(expr, ExpI):
            return self._expi_term(expr)
        raise Unsupported(f"{type(expr).__name__} in an equation")

    def _call_term(self, expr: Call, old: bool) -> SymComplex:
        if expr.func == "sqrt":
            (arg,) = expr.args
            inner = self.complex_term(arg, old)
            if inner.im != "0":
                raise Unsupported("sqrt of a complex term")
            if inner.re not in self.state.sqrts:
                name = self.state.fresh("sq")
                self.state.declare(name)
                self.state.constraints.append(
                    (f"(= (* {name} {name}) {inner.re})",
                     f"{name} = sqrt({inner.re})"))
                self.state.constraints.append((f"(>= {name} 0)",
                                               f"{name} is non-negative"))
                self.state.sqrts[inner.re] = name
            return SymComplex(self.state.sqrts[inner.re], "0")
        if expr.func in ("pow", "power"):
            base, exponent = expr.args
            if isinstance(exponent, Num) and int(exponent.value) == 2:
                inner = self.complex_term(base, old)
                return SymComplex(inner.sq_magnitude(), "0")
            raise Unsupported("pow with a non-2 exponent in an equation")
        if expr.func == "cos":
            ct, _st = self.state.trig_pair(_angle_key(expr.args[0]))
            return SymComplex(ct, "0")
        if expr.func == "sin":
            _ct, st = self.state.trig_pair(_angle_key(expr.args[0]))
            return SymComplex(st, "0")
        if expr.func == "isin":
            _ct, st = self.state.trig_pair(_angle_key(expr.args[0]))
            return SymComplex("0", st)
        raise Unsupported(f"function '{expr.func}' in an equation")

    def _expi_term(self, expr: ExpI) -> SymComplex:
        # e^(i*x): cos(x) + i sin(x) with shared uninterpreted trig constants
        exponent = expr.exponent
        if isinstance(exponent, BinOp) and exponent.op == "*" and \
                isinstance(exponent.lhs, Imag):
            ct, st = self.state.trig_pair(_angle_key(exponent.rhs))
            return SymComplex(ct, st)
        raise Unsupported("exponential must have the form e^(i*angle)")

    def bool_term(self, expr: Expr) -> str:
        if isinstance(expr, BinOp):
            if expr.op == "==":
                lhs = self.complex_term(expr.lhs)
                rhs = self.complex_term(expr.rhs)
                conj = [s_eq(lhs.re, rhs.re)]
                if not (lhs.im == "0" and rhs.im == "0"):
                    conj.append(s_eq(lhs.im, rhs.im))
                return conj[0] if len(conj) == 1 else \
                    "(and " + " ".join(conj) + ")"
            if expr.op in ("&&", "||"):
                op = "and" if expr.op == "&&" else "or"
                return f"({op} {self.bool_term(expr.lhs)} " \
                       f"{self.bool_term(expr.rhs)})"
        if isinstance(expr, UnOp) and expr.op == "!":
            return f"(not {self.bool_term(expr.operand)})"
        if isinstance(expr, Valid):
            return "true"  # declaration-shape predicate: holds by layout
        if isinstance(expr, MeasZ) or _contains_measz_expr(expr):
            raise Unsupported("measurement predicates are outside the "
                              "symbolic fragment")
        raise Unsupported(f"{type(expr).__name__} in a requires/ensures clause")


def _contains_measz_expr(expr: Expr) -> bool:
    if isinstance(expr, MeasZ):
        return True
    for attr in ("lhs", "rhs", "operand", "exponent"):
        child = getattr(expr, attr, None)
        if isinstance(child, Expr) and _contains_measz_expr(child):
            return True
    if isinstance(expr, Call):
        return any(_contains_measz_expr(a) for a in expr.args)
    return False


def generate_vc(decl, program: AnnotatedProgram) -> VcDocument:
    """Emit the SMT-LIB verification condition for one declaration."""
    contract = decl.contract
    if contract is None or not contract.ensures:
        raise Unsupported(f"'{decl.name}' has no ensures clauses to verify")
    state = symbolic_exec(decl, program)
    inputs = {}
    for p in decl.params:
        if p.kind is ParamKind.QREG:
            width = p.width if isinstance(p.width, int) else 1
            for i in range(width):
                base = f"{p.name}{i}" if width > 1 else p.name
                inputs[(p.name, i)] = (
                    SymComplex(f"{base}_a_re", f"{base}_a_im"),
                    SymComplex(f"{base}_b_re", f"{base}_b_im"))
    tr = _Translator(state, inputs)

    widths = {p.name: p.width for p in decl.params if p.kind is ParamKind.QREG}
    classicals = {p.name for p in decl.params if p.kind is not ParamKind.QREG}
    scope = ExpansionScope(register_widths=widths, classical_names=classicals,
                           classical_values={}, predicates=program.predicates)
    try:
        norm = normalize_contract(contract, scope)
    except ExpansionError as exc:
        raise Unsupported(f"contract expansion failed: {exc.message}")

    goal_parts: list[tuple[str, str]] = []  # (label, smt bool term)
    for clause in norm.ensures:
        label = clause.label or "ensures"
        if clause.kind == "deferred":
            raise Unsupported(f"clause '{label}' needs runtime expansion")
        if clause.kind == "snapshot":
            raise Unsupported(f"clause '{label}' constrains the pre-state "
                              f"snapshot")
        if clause.kind == "equations":
            for eq in clause.equations.equations:
                lhs = tr.complex_term(eq.lhs)
                rhs = tr.complex_term(eq.rhs)
                term = f"(and {s_eq(lhs.re, rhs.re)} {s_eq(lhs.im, rhs.im)})"
                goal_parts.append((label, term))
        else:
            goal_parts.append((label, tr.bool_term(clause.expr)))

    assumption_parts: list[tuple[str, str]] = []
    for clause in contract.requires:
        label = clause.label or "requires"
        term = tr.bool_term(clause.expr)
        if term != "true":
            assumption_parts.append((label, term))
    for (reg, idx), (a, b) in inputs.items():
        norm_term = s_eq(s_add(a.sq_magnitude(), b.sq_magnitude()), "1")
        assumption_parts.append((f"normalization {reg}[{idx}]", norm_term))

    lines: list[str] = []
    lines.append(f"; verification condition emitted by scaffcheck {__version__}")
    lines.append(f"; module: {decl.name}")
    for clause in norm.ensures:
        lines.append(f"; ensures clause: {clause.label or '(unlabelled)'}")
    for behavior in contract.behaviors:
        lines.append(f"; skipped behavior: {behavior.name} (behaviors are "
                     f"checked at runtime)")
    lines.append("; a solver reporting unsat certifies the contract")
    lines.append("(set-logic QF_NRA)")
    for name in state.decls:
        lines.append(f"(declare-const {name} Real)")
    for term, comment in state.constraints:
        lines.append(f"; side constraint: {comment}")
        lines.append(f"(assert {term})")
    for label, term in assumption_parts:
        lines.append(f"; assumption: {label}")
        lines.append(f"(assert {term})")
    if len(goal_parts) == 1:
        goal = goal_parts[0][1]
    else:
        goal = "(and " + " ".join(t for _, t in goal_parts) + ")"
    lines.append("; goal: negation of the conjoined ensures clauses")
    lines.append(f"(assert (not {goal}))")
    lines.append("(check-sat)")
    return VcDocument(module=decl.name, text="\n".join(lines) + "\n")


def generate_all(program: AnnotatedProgram) -> tuple[list[VcDocument],
                                                     list[tuple[str, str]]]:
    """VC documents for every declaration with a contract; returns the
    documents plus (name, reason) pairs for the ones outside the fragment."""
    docs: list[VcDocument] = []
    skipped: list[tuple[str, str]] = []
    decls = list(program.ast.gates) + list(program.ast.modules)
    for decl in decls:
        if decl.contract is None:
            continue
        try:
            docs.append(generate_vc(decl, program))
        except Unsupported as exc:
            skipped.append((decl.name, exc.reason))
    return docs, skipped
