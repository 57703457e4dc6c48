"""Predicate expansion and user-defined spec-predicate interpretation.

Predefined predicates expand to the primitive amplitude equations they
abbreviate. User-defined predicates (QFTCheck style) are restricted
classical programs whose `//ensures` lines emit one equation per reached
point, with loop variables substituted by their current values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .spec_ast import (
    Amp, Basis, BinOp, Call, Clause, Contract, Epoch, Equation, EquationSet,
    ExpI, Expr, Imag, MeasZ, Num, Old, PredCall, QubitRef, RefExpr, RegRef,
    SpecAssign, SpecEmit, SpecFor, SpecIf, SpecPredicateDef, SpecStmt,
    SpecVarDecl, UnOp, Var,
)

PREDEFINED = ("Unchanged", "Reverse", "EqualRanges", "HadamardCheck",
              "PhaseCheck", "PhaseCheck_Rx", "qbitselfCheck")

CONSTANTS = {"PI": math.pi, "pi": math.pi, "M_PI": math.pi}

_LOOP_LIMIT = 100_000


class ExpansionError(Exception):
    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span


class NeedsRuntime(Exception):
    """Expansion requires runtime information (register widths, classical
    argument values); retried by the checker with a full scope."""


@dataclass
class ExpansionScope:
    """What expansion may know about the enclosing declaration."""

    register_widths: dict[str, int | str | None]
    classical_names: set[str]
    classical_values: dict[str, float]
    predicates: dict[str, SpecPredicateDef]

    def width_of(self, name: str) -> int:
        w = self.register_widths.get(name)
        if isinstance(w, int):
            return w
        raise NeedsRuntime(name)

    def is_register(self, name: str) -> bool:
        return name in self.register_widths

    def value_of(self, name: str) -> float:
        if name in self.classical_values:
            return self.classical_values[name]
        if name in CONSTANTS and name not in self.classical_names:
            return CONSTANTS[name]
        raise NeedsRuntime(name)


def _amp(reg: RegRef, index: int, basis: Basis, epoch: Epoch) -> Expr:
    acc = Amp(qubit=QubitRef(reg=reg, index=Num(index)), basis=basis)
    return Old(acc) if epoch is Epoch.OLD else acc


def _qubit_targets(arg: Expr, scope: ExpansionScope, pred: str) -> list[tuple[RegRef, int]]:
    """Resolve a predicate's qubit argument to concrete (register, index) pairs."""
    if isinstance(arg, RefExpr):
        ref = arg.ref
        if ref.is_slice:
            raise ExpansionError(f"{pred}: slice arguments are not supported",
                                 ref.span)
        if ref.index is not None:
            if not isinstance(ref.index, Num):
                raise NeedsRuntime(ref.reg.name)
            return [(ref.reg, int(ref.index.value))]
        # whole register (`q[]` or struct member)
        width = scope.width_of(ref.reg.name)
        return [(ref.reg, i) for i in range(width)]
    if isinstance(arg, Var):
        if not scope.is_register(arg.name):
            raise ExpansionError(f"{pred}: '{arg.name}' is not a register in "
                                 f"scope", arg.span)
        reg = RegRef(name=arg.name)
        width = scope.width_of(arg.name)
        return [(reg, i) for i in range(width)]
    raise ExpansionError(f"{pred}: expected a qubit argument", getattr(arg, "span", None))


def _single_qubit(arg: Expr, scope: ExpansionScope, pred: str) -> tuple[RegRef, int]:
    targets = _qubit_targets(arg, scope, pred)
    if len(targets) != 1:
        raise ExpansionError(f"{pred}: expected a single qubit, got a "
                             f"{len(targets)}-qubit register", getattr(arg, "span", None))
    return targets[0]


def _check_length_two(args: tuple[Expr, ...], at: int, pred: str):
    arg = args[at]
    if not (isinstance(arg, Num) and int(arg.value) == 2):
        raise ExpansionError(f"{pred}: the length argument denotes the two "
                             f"amplitudes of one qubit and must be 2", arg.span)


def _require_angle(scope: ExpansionScope, pred: str, span) -> Var:
    if "angle" not in scope.classical_names:
        raise ExpansionError(f"{pred}: no classical parameter 'angle' in the "
                             f"specified declaration", span)
    return Var(name="angle")


def expand_predicate(call: PredCall, scope: ExpansionScope) -> EquationSet | Expr:
    """Expand a predefined or registered predicate call.

    Returns an EquationSet of primitive amplitude equations, or for the
    normalization predicate a boolean expression over squared magnitudes.
    Raises ExpansionError for bad calls and NeedsRuntime when widths or
    classical values are not yet known.
    """
    name = call.name
    epochs = call.epochs or (Epoch.HERE, Epoch.OLD)
    e1, e2 = epochs

    def arity(n: int):
        if len(call.args) != n:
            raise ExpansionError(f"{name}: expected {n} argument(s), got "
                                 f"{len(call.args)}", call.span)

    if name in ("Unchanged", "Reverse"):
        arity(2)
        _check_length_two(call.args, 1, name)
        reg, idx = _single_qubit(call.args[0], scope, name)
        if {e1, e2} != {Epoch.HERE, Epoch.OLD}:
            raise ExpansionError(f"{name}: epoch pair must relate Here and Old",
                                 call.span)
        flip = name == "Reverse"
        eqs = []
        for b in (Basis.ZERO, Basis.ONE):
            rb = (Basis.ONE if b is Basis.ZERO else Basis.ZERO) if flip else b
            lhs = Amp(qubit=QubitRef(reg=reg, index=Num(idx)), basis=b)
            eqs.append(Equation(lhs=lhs, rhs=_amp(reg, idx, rb, Epoch.OLD)))
        return EquationSet(equations=tuple(eqs), source_name=name)

    if name == "EqualRanges":
        arity(3)
        _check_length_two(call.args, 1, name)
        reg_a, idx_a = _single_qubit(call.args[0], scope, name)
        reg_b, idx_b = _single_qubit(call.args[2], scope, name)
        # {Here,Old}: here(first) == old(second); {Old,Here} is the flip
        if (e1, e2) == (Epoch.HERE, Epoch.OLD):
            here_reg, here_idx, old_reg, old_idx = reg_a, idx_a, reg_b, idx_b
        elif (e1, e2) == (Epoch.OLD, Epoch.HERE):
            here_reg, here_idx, old_reg, old_idx = reg_b, idx_b, reg_a, idx_a
        else:
            raise ExpansionError("EqualRanges: epoch pair must relate Here and "
                                 "Old", call.span)
        eqs = []
        for b in (Basis.ZERO, Basis.ONE):
            lhs = Amp(qubit=QubitRef(reg=here_reg, index=Num(here_idx)), basis=b)
            eqs.append(Equation(lhs=lhs, rhs=_amp(old_reg, old_idx, b, Epoch.OLD)))
        return EquationSet(equations=tuple(eqs), source_name=name)

    if name == "HadamardCheck":
        arity(2)
        _check_length_two(call.args, 1, name)
        if (e1, e2) != (Epoch.HERE, Epoch.OLD):
            raise ExpansionError("HadamardCheck: epoch pair must be {Here,Old}",
                                 call.span)
        reg, idx = _single_qubit(call.args[0], scope, name)
        sq = Call(func="sqrt", args=(BinOp("/", Num(1), Num(2)),))
        old0 = _amp(reg, idx, Basis.ZERO, Epoch.OLD)
        old1 = _amp(reg, idx, Basis.ONE, Epoch.OLD)
        eqs = (
            Equation(lhs=Amp(qubit=QubitRef(reg=reg, index=Num(idx)),
                             basis=Basis.ZERO),
                     rhs=BinOp("*", BinOp("+", old0, old1), sq)),
            Equation(lhs=Amp(qubit=QubitRef(reg=reg, index=Num(idx)),
                             basis=Basis.ONE),
                     rhs=BinOp("*", BinOp("-", old0, old1), sq)),
        )
        return EquationSet(equations=eqs, source_name=name)

    if name == "PhaseCheck":
        arity(2)
        _check_length_two(call.args, 1, name)
        if (e1, e2) != (Epoch.HERE, Epoch.OLD):
            raise ExpansionError("PhaseCheck: epoch pair must be {Here,Old}",
                                 call.span)
        reg, idx = _single_qubit(call.args[0], scope, name)
        angle = _require_angle(scope, name, call.span)
        phase = ExpI(exponent=BinOp("*", Imag(), angle))
        eqs = (
            Equation(lhs=Amp(qubit=QubitRef(reg=reg, index=Num(idx)),
                             basis=Basis.ZERO),
                     rhs=_amp(reg, idx, Basis.ZERO, Epoch.OLD)),
            Equation(lhs=Amp(qubit=QubitRef(reg=reg, index=Num(idx)),
                             basis=Basis.ONE),
                     rhs=BinOp("*", _amp(reg, idx, Basis.ONE, Epoch.OLD), phase)),
        )
        return EquationSet(equations=eqs, source_name=name)

    if name == "PhaseCheck_Rx":
        arity(2)
        _check_length_two(call.args, 1, name)
        if (e1, e2) != (Epoch.HERE, Epoch.OLD):
            raise ExpansionError("PhaseCheck_Rx: epoch pair must be {Here,Old}",
                                 call.span)
        reg, idx = _single_qubit(call.args[0], scope, name)
        angle = _require_angle(scope, name, call.span)
        half = BinOp("/", angle, Num(2))
        cos_t = Call(func="cos", args=(half,))
        isin_t = Call(func="isin", args=(half,))
        old0 = _amp(reg, idx, Basis.ZERO, Epoch.OLD)
        old1 = _amp(reg, idx, Basis.ONE, Epoch.OLD)
        eqs = (
            Equation(lhs=Amp(qubit=QubitRef(reg=reg, index=Num(idx)),
                             basis=Basis.ZERO),
                     rhs=BinOp("-", BinOp("*", old0, cos_t),
                               BinOp("*", old1, isin_t))),
            Equation(lhs=Amp(qubit=QubitRef(reg=reg, index=Num(idx)),
                             basis=Basis.ONE),
                     rhs=BinOp("-", BinOp("*", old1, cos_t),
                               BinOp("*", old0, isin_t))),
        )
        return EquationSet(equations=eqs, source_name=name)

    if name == "qbitselfCheck":
        arity(1)
        targets = _qubit_targets(call.args[0], scope, name)
        terms: list[Expr] = []
        for reg, idx in targets:
            a0 = Amp(qubit=QubitRef(reg=reg, index=Num(idx)), basis=Basis.ZERO)
            a1 = Amp(qubit=QubitRef(reg=reg, index=Num(idx)), basis=Basis.ONE)
            total = BinOp("+", Call(func="pow", args=(a0, Num(2))),
                          Call(func="pow", args=(a1, Num(2))))
            terms.append(BinOp("==", total, Num(1)))
        expr = terms[0]
        for t in terms[1:]:
            expr = BinOp("&&", expr, t)
        return expr

    pdef = scope.predicates.get(name)
    if pdef is None:
        raise ExpansionError(f"unknown predicate '{name}'", call.span)
    return _expand_user_predicate(pdef, call, scope)


def _expand_user_predicate(pdef: SpecPredicateDef, call: PredCall,
                           scope: ExpansionScope) -> EquationSet:
    if len(call.args) != len(pdef.params):
        raise ExpansionError(f"{pdef.name}: expected {len(pdef.params)} "
                             f"argument(s), got {len(call.args)}", call.span)
    array_args: dict[str, RegRef] = {}
    classical_args: dict[str, float] = {}
    for param, arg in zip(pdef.params, call.args):
        if param.is_array:
            targets = _qubit_targets(arg, scope, pdef.name)
            array_args[param.name] = targets[0][0]
        else:
            classical_args[param.name] = _eval_static(arg, scope)
    return interpret_spec_predicate(pdef, array_args, classical_args)


def _eval_static(expr: Expr, scope: ExpansionScope) -> float:
    """Evaluate a classical argument expression with the scope's bindings."""
    if isinstance(expr, Num):
        return float(expr.value)
    if isinstance(expr, Var):
        return float(scope.value_of(expr.name))
    if isinstance(expr, UnOp) and expr.op == "-":
        return -_eval_static(expr.operand, scope)
    if isinstance(expr, BinOp):
        a = _eval_static(expr.lhs, scope)
        b = _eval_static(expr.rhs, scope)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            if b == 0:
                raise ExpansionError("division by zero in predicate argument",
                                     expr.span)
            return a / b
    if isinstance(expr, Call) and expr.func in ("pow", "power"):
        return math.pow(_eval_static(expr.args[0], scope),
                        _eval_static(expr.args[1], scope))
    if isinstance(expr, Call) and expr.func == "sqrt":
        return math.sqrt(_eval_static(expr.args[0], scope))
    raise ExpansionError("classical predicate argument is not evaluable",
                         getattr(expr, "span", None))


# -- user-defined predicate interpretation ------------------------------------

class _PredEnv:
    def __init__(self, pdef: SpecPredicateDef, arrays: dict[str, RegRef],
                 classicals: dict[str, float]):
        self.pdef = pdef
        self.arrays = arrays
        self.vars: dict[str, float] = dict(classicals)
        self.int_vars: set[str] = set()
        self.equations: list[Equation] = []
        self.seen_lhs: set[tuple[str, str | None, int, Basis]] = set()
        self.steps = 0

    def value(self, name: str) -> float:
        if name in self.vars:
            return self.vars[name]
        if name in CONSTANTS:
            return CONSTANTS[name]
        raise ExpansionError(f"{self.pdef.name}: unbound variable '{name}'")


def interpret_spec_predicate(pdef: SpecPredicateDef, arrays: dict[str, RegRef],
                             classicals: dict[str, float]) -> EquationSet:
    """Run the predicate body; each `//ensures` line reached emits one
    equation with current variable values substituted."""
    for p in pdef.params:
        if p.is_array and p.name not in arrays:
            raise ExpansionError(f"{pdef.name}: array parameter '{p.name}' "
                                 f"unbound")
        if not p.is_array and p.name not in classicals:
            raise ExpansionError(f"{pdef.name}: classical parameter '{p.name}' "
                                 f"unbound")
    env = _PredEnv(pdef, arrays, classicals)
    _run_stmts(pdef.body, env)
    return EquationSet(equations=tuple(env.equations), source_name=pdef.name)


def _run_stmts(stmts: tuple[SpecStmt, ...], env: _PredEnv):
    for stmt in stmts:
        _run_stmt(stmt, env)


def _run_stmt(stmt: SpecStmt, env: _PredEnv):
    env.steps += 1
    if env.steps > _LOOP_LIMIT:
        raise ExpansionError(f"{env.pdef.name}: loop limit exceeded (body does "
                             f"not terminate?)")
    if isinstance(stmt, SpecVarDecl):
        value = _eval_body(stmt.init, env) if stmt.init is not None else 0.0
        env.vars[stmt.name] = float(int(value))  # int local: C truncation
        env.int_vars.add(stmt.name)
    elif isinstance(stmt, SpecAssign):
        value = _eval_body(stmt.expr, env)
        if stmt.op == "+=":
            value = env.value(stmt.name) + value
        elif stmt.op == "-=":
            value = env.value(stmt.name) - value
        if stmt.name in env.int_vars:
            value = float(int(value))
        env.vars[stmt.name] = value
    elif isinstance(stmt, SpecFor):
        _run_stmt(stmt.init, env)
        while _truthy(_eval_body(stmt.cond, env)):
            _run_stmts(stmt.body, env)
            _run_stmt(stmt.step, env)
            env.steps += 1
            if env.steps > _LOOP_LIMIT:
                raise ExpansionError(f"{env.pdef.name}: loop limit exceeded")
    elif isinstance(stmt, SpecIf):
        if _truthy(_eval_body(stmt.cond, env)):
            _run_stmts(stmt.then_body, env)
        else:
            _run_stmts(stmt.else_body, env)
    elif isinstance(stmt, SpecEmit):
        _emit(stmt, env)
    else:
        raise ExpansionError(f"{env.pdef.name}: unsupported statement")


def _truthy(value) -> bool:
    if isinstance(value, bool):
        return value
    return value != 0


def _eval_body(expr: Expr, env: _PredEnv):
    if isinstance(expr, Num):
        return float(expr.value)
    if isinstance(expr, Var):
        return env.value(expr.name)
    if isinstance(expr, UnOp):
        v = _eval_body(expr.operand, env)
        return -v if expr.op == "-" else (not _truthy(v))
    if isinstance(expr, BinOp):
        if expr.op == "&&":
            return _truthy(_eval_body(expr.lhs, env)) and \
                _truthy(_eval_body(expr.rhs, env))
        if expr.op == "||":
            return _truthy(_eval_body(expr.lhs, env)) or \
                _truthy(_eval_body(expr.rhs, env))
        a = _eval_body(expr.lhs, env)
        b = _eval_body(expr.rhs, env)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            if b == 0:
                raise ExpansionError(f"{env.pdef.name}: division by zero")
            return a / b
        if expr.op == "%":
            return math.fmod(a, b)
        if expr.op == "==":
            return a == b
        if expr.op == "!=":
            return a != b
        if expr.op == "<=":
            return a <= b
        if expr.op == "<":
            return a < b
        if expr.op == ">=":
            return a >= b
        if expr.op == ">":
            return a > b
    if isinstance(expr, Call):
        if expr.func in ("pow", "power"):
            return math.pow(_eval_body(expr.args[0], env),
                            _eval_body(expr.args[1], env))
        if expr.func == "sqrt":
            return math.sqrt(_eval_body(expr.args[0], env))
        if expr.func == "length":
            raise ExpansionError(f"{env.pdef.name}: length() is not available "
                                 f"inside predicate bodies")
    raise ExpansionError(f"{env.pdef.name}: expression not supported in "
                         f"predicate body")


def _emit(stmt: SpecEmit, env: _PredEnv):
    expr = stmt.expr
    if not (isinstance(expr, BinOp) and expr.op == "=="):
        raise ExpansionError(f"{env.pdef.name}: emitted line must be an "
                             f"equation", stmt.span)
    lhs = _substitute_amp(expr.lhs, env)
    if lhs is None:
        raise ExpansionError(f"{env.pdef.name}: equation left side must be a "
                             f"single amplitude accessor", stmt.span)
    rhs = _substitute_values(expr.rhs, env)
    key = (lhs.qubit.reg.name, lhs.qubit.reg.member,
           int(lhs.qubit.index.value), lhs.basis)
    if key in env.seen_lhs:
        raise ExpansionError(f"{env.pdef.name}: two equations emitted for the "
                             f"same amplitude "
                             f"{lhs.qubit.reg.display()}[{key[2]}]"
                             f"[{lhs.basis.ket()}]", stmt.span)
    env.seen_lhs.add(key)
    env.equations.append(Equation(lhs=lhs, rhs=rhs))


def _substitute_amp(expr: Expr, env: _PredEnv) -> Amp | None:
    if not isinstance(expr, Amp):
        return None
    ref = expr.qubit
    if ref.reg.name not in env.arrays:
        raise ExpansionError(f"{env.pdef.name}: unknown identifier "
                             f"'{ref.reg.name}'", ref.span)
    actual = env.arrays[ref.reg.name]
    if ref.index is None:
        raise ExpansionError(f"{env.pdef.name}: emitted amplitude must index "
                             f"one qubit", ref.span)
    idx = int(_eval_body(ref.index, env))
    return Amp(qubit=QubitRef(reg=actual, index=Num(idx)), basis=expr.basis)


def _substitute_values(expr: Expr, env: _PredEnv) -> Expr:
    """Replace classical variables by literal values; keep structure otherwise."""
    if isinstance(expr, Var):
        return Num(env.value(expr.name))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, _substitute_values(expr.lhs, env),
                     _substitute_values(expr.rhs, env))
    if isinstance(expr, UnOp):
        return UnOp(expr.op, _substitute_values(expr.operand, env))
    if isinstance(expr, Call):
        return Call(func=expr.func,
                    args=tuple(_substitute_values(a, env) for a in expr.args))
    if isinstance(expr, Amp):
        sub = _substitute_amp(expr, env)
        if sub is None:
            raise ExpansionError(f"{env.pdef.name}: bad amplitude accessor")
        return sub
    if isinstance(expr, Old):
        return Old(_substitute_values(expr.operand, env))
    return expr


# -- contract normalization ----------------------------------------------------

@dataclass(frozen=True)
class NormalizedClause:
    """A contract clause ready for checking.

    kind: 'expr' (boolean expression), 'equations' (EquationSet with a shared
    phase), 'snapshot' (an `\\old(e) == c` clause checked against the entry
    snapshot), or 'deferred' (predicate call needing runtime expansion).
    """

    label: str | None
    kind: str
    expr: Expr | None = None
    equations: EquationSet | None = None
    call: PredCall | None = None
    span: object = None


@dataclass(frozen=True)
class NormalizedBehavior:
    name: str
    assumes: tuple[Expr, ...]
    ensures: tuple[NormalizedClause, ...]
    span: object = None


@dataclass(frozen=True)
class NormalizedContract:
    requires: tuple[Clause, ...]
    assigns: tuple | None
    ensures: tuple[NormalizedClause, ...]
    behaviors: tuple[NormalizedBehavior, ...]
    complete: bool
    disjoint: bool


def _is_snapshot_clause(expr: Expr) -> bool:
    """`\\old(e) == c` at the top: a stated precondition in ensures position."""
    if isinstance(expr, BinOp) and expr.op == "==":
        return isinstance(expr.lhs, Old) and not _mentions_here(expr.rhs)
    return False


def _mentions_here(expr: Expr) -> bool:
    if isinstance(expr, Amp):
        return expr.epoch is Epoch.HERE
    if isinstance(expr, (MeasZ, RefExpr)):
        return True
    if isinstance(expr, Old):
        return False
    if isinstance(expr, BinOp):
        return _mentions_here(expr.lhs) or _mentions_here(expr.rhs)
    if isinstance(expr, UnOp):
        return _mentions_here(expr.operand)
    if isinstance(expr, Call):
        return any(_mentions_here(a) for a in expr.args)
    if isinstance(expr, ExpI):
        return _mentions_here(expr.exponent)
    return False


def normalize_clause(clause: Clause, scope: ExpansionScope) -> NormalizedClause:
    expr = clause.expr
    if isinstance(expr, PredCall):
        try:
            expanded = expand_predicate(expr, scope)
        except NeedsRuntime:
            return NormalizedClause(label=clause.label, kind="deferred",
                                    call=expr, span=clause.span)
        if isinstance(expanded, EquationSet):
            return NormalizedClause(label=clause.label, kind="equations",
                                    equations=expanded, span=clause.span)
        return NormalizedClause(label=clause.label, kind="expr", expr=expanded,
                                span=clause.span)
    if _is_snapshot_clause(expr):
        return NormalizedClause(label=clause.label, kind="snapshot", expr=expr,
                                span=clause.span)
    return NormalizedClause(label=clause.label, kind="expr", expr=expr,
                            span=clause.span)


def normalize_contract(contract: Contract, scope: ExpansionScope) -> NormalizedContract:
    """Expand predicate calls and classify clauses. Clauses whose expansion
    needs runtime information come back kind='deferred'."""
    ensures = tuple(normalize_clause(c, scope) for c in contract.ensures)
    behaviors = []
    for b in contract.behaviors:
        behaviors.append(NormalizedBehavior(
            name=b.name, assumes=b.assumes,
            ensures=tuple(normalize_clause(c, scope) for c in b.ensures),
            span=b.span))
    return NormalizedContract(requires=contract.requires,
                              assigns=contract.assigns, ensures=ensures,
                              behaviors=tuple(behaviors),
                              complete=contract.complete,
                              disjoint=contract.disjoint)
