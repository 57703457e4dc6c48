"""Runtime contract checking: execute annotated programs on the statevector
engine and evaluate requires/ensures/assertions/frames/behaviors."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import simcore
from .conditional import (
    ConditionalCompileError, ControlledCall, FlipOp, compile_quantum_conditional,
)
from .diagnostics import ScaffoldError
from .frontend.ast_nodes import (
    AssertPoint, Assign, CallArg, CallStmt, ForStmt, GateDecl, IfStmt, IncDec,
    LocalQreg, ModuleDef, Param, ParamKind, QuantumIf, ReturnStmt, Stmt,
    StructVar, VarDecl,
)
from .frontend.attach import AnnotatedProgram
from .simcore import (
    EntangledQubitError, QuantumState, RegisterLayout, SimulationError,
    ZeroProbabilityError,
)
from .spec_ast import (
    Amp, BinOp, Call, Clause, Contract, Epoch, EquationSet, ExpI, Expr, Imag,
    MeasZ, Num, Old, PredCall, QubitRef, RefExpr, UnOp, Valid, Var,
)
from .specmodel import (
    CONSTANTS, ExpansionError, ExpansionScope, NeedsRuntime, NormalizedClause,
    expand_predicate, normalize_contract,
)

_LOOP_LIMIT = 1_000_000


class EvalError(ScaffoldError):
    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span


class Verdict(Enum):
    PASS = "pass"
    FAIL = "fail"
    VACUOUS = "vacuous"
    ERROR = "error"


@dataclass(frozen=True)
class ToleranceConfig:
    eps_eq: float = 1e-9
    eps_prob: float = 1e-9
    eps_pure: float = 1e-9
    phase_mode: str = "shared"  # "shared" (global phase factored out) or "exact"

    def __post_init__(self):
        for name in ("eps_eq", "eps_prob", "eps_pure"):
            v = getattr(self, name)
            if not 0 < v <= 1e-3:
                raise ValueError(f"{name} must lie in (0, 1e-3], got {v}")
        if self.phase_mode not in ("shared", "exact"):
            raise ValueError(f"phase_mode must be 'shared' or 'exact', got "
                             f"{self.phase_mode!r}")


@dataclass(frozen=True)
class ClauseVerdict:
    label: str
    kind: str    # requires | ensures | assert | assigns-frame | behavior-ensures
    #              | completeness | disjointness
    verdict: Verdict
    detail: str = ""
    module: str = ""
    line: int = 0
    col: int = 0
    input_index: int = 0


@dataclass
class Bindings:
    """Runtime name bindings for one declaration activation."""

    registers: dict[str, tuple[int, ...]] = field(default_factory=dict)
    structs: dict[str, dict[str, tuple[int, ...]]] = field(default_factory=dict)
    classicals: dict[str, float] = field(default_factory=dict)

    def child(self) -> "Bindings":
        return Bindings(registers=dict(self.registers),
                        structs=dict(self.structs),
                        classicals=dict(self.classicals))


@dataclass
class EvalEnv:
    here: QuantumState
    old: QuantumState | None
    bindings: Bindings
    config: ToleranceConfig

    def with_here(self, state: QuantumState) -> "EvalEnv":
        return EvalEnv(here=state, old=self.old, bindings=self.bindings,
                       config=self.config)


# -- expression evaluation ------------------------------------------------------

def resolve_positions(ref: QubitRef, bindings: Bindings,
                      env: "EvalEnv | None" = None) -> tuple[int, ...]:
    """Global qubit positions denoted by a reference."""
    name = ref.reg.name
    if ref.reg.member is not None:
        members = bindings.structs.get(name)
        if members is None:
            raise EvalError(f"unknown struct variable '{name}'", ref.span)
        positions = members.get(ref.reg.member)
        if positions is None:
            raise EvalError(f"struct '{name}' has no member "
                            f"'{ref.reg.member}'", ref.span)
    else:
        positions = bindings.registers.get(name)
        if positions is None:
            raise EvalError(f"unknown identifier '{name}'", ref.span)
    if ref.is_slice:
        lo = _as_int(eval_classical(ref.index, bindings), ref.span)
        hi = _as_int(eval_classical(ref.slice_hi, bindings), ref.span)
        if not (0 <= lo <= hi < len(positions)):
            raise EvalError(f"slice [{lo}..{hi}] out of range for "
                            f"{name}[{len(positions)}]", ref.span)
        return positions[lo:hi + 1]
    if ref.index is not None:
        idx = _as_int(eval_classical(ref.index, bindings), ref.span)
        if not 0 <= idx < len(positions):
            raise EvalError(f"index {idx} out of range for "
                            f"{name}[{len(positions)}]", ref.span)
        return (positions[idx],)
    return positions


def resolve_single_qubit(ref: QubitRef, bindings: Bindings) -> int:
    positions = resolve_positions(ref, bindings)
    if len(positions) != 1:
        raise EvalError(f"'{ref.reg.display()}' denotes {len(positions)} "
                        f"qubits where one is required", ref.span)
    return positions[0]


def _as_int(value, span) -> int:
    if isinstance(value, bool):
        raise EvalError("expected an integer, found a boolean", span)
    if isinstance(value, complex):
        if abs(value.imag) > 1e-12:
            raise EvalError("expected an integer, found a complex value", span)
        value = value.real
    if abs(value - round(value)) > 1e-9:
        raise EvalError(f"expected an integer, found {value}", span)
    return int(round(value))


def eval_classical(expr: Expr, bindings: Bindings):
    """Evaluate a classical expression over the activation's bindings."""
    env = EvalEnv(here=None, old=None, bindings=bindings,
                  config=ToleranceConfig())
    return eval_expr(expr, env, classical_only=True)


def eval_expr(expr: Expr, env: EvalEnv, classical_only: bool = False):
    """Evaluate a specification expression to complex/float/bool."""
    if isinstance(expr, Num):
        return float(expr.value)
    if isinstance(expr, Imag):
        return 1j
    if isinstance(expr, Var):
        b = env.bindings
        if expr.name in b.classicals:
            return b.classicals[expr.name]
        if expr.name in b.registers and not classical_only:
            raise EvalError(f"register '{expr.name}' used as a value",
                            expr.span)
        if expr.name in CONSTANTS:
            return CONSTANTS[expr.name]
        raise EvalError(f"unknown identifier '{expr.name}'", expr.span)
    if isinstance(expr, Amp):
        if classical_only:
            raise EvalError("amplitude accessor in a classical context",
                            expr.span)
        return _eval_amp(expr, env, env.here)
    if isinstance(expr, Old):
        if env.old is None:
            raise EvalError("\\old used where no pre-state snapshot exists",
                            expr.span)
        inner_env = EvalEnv(here=env.old, old=env.old, bindings=env.bindings,
                            config=env.config)
        return eval_expr(expr.operand, inner_env)
    if isinstance(expr, Valid):
        # declaration-shape predicate: the reference must resolve in scope
        resolve_positions(expr.qubit, env.bindings)
        return True
    if isinstance(expr, MeasZ):
        raise EvalError("measZ(...) may only be compared with 0 or 1",
                        expr.span)
    if isinstance(expr, RefExpr):
        raise EvalError(f"register reference "
                        f"'{expr.ref.reg.display()}' used as a value", expr.span)
    if isinstance(expr, ExpI):
        return cmath.exp(_numeric(eval_expr(expr.exponent, env), expr.span))
    if isinstance(expr, UnOp):
        v = eval_expr(expr.operand, env, classical_only)
        if expr.op == "-":
            return -_numeric(v, expr.span)
        if expr.op == "!":
            if not isinstance(v, bool):
                raise EvalError("'!' needs a boolean operand", expr.span)
            return not v
    if isinstance(expr, Call):
        return _eval_call(expr, env, classical_only)
    if isinstance(expr, BinOp):
        return _eval_binop(expr, env, classical_only)
    if isinstance(expr, PredCall):
        raise EvalError(f"predicate '{expr.name}' was not expanded", expr.span)
    raise EvalError(f"cannot evaluate {type(expr).__name__}", getattr(expr, "span", None))


def _eval_amp(expr: Amp, env: EvalEnv, state: QuantumState) -> complex:
    pos = _amp_position(expr, env.bindings)
    a, b = simcore.amplitude_pair(state, pos, eps_pure=env.config.eps_pure)
    return a if expr.basis.value == 0 else b


def _amp_position(expr: Amp, bindings: Bindings) -> int:
    ref = expr.qubit
    if ref.index is None and not ref.explicit_brackets:
        # width-1 shorthand
        positions = resolve_positions(ref, bindings)
        if len(positions) != 1:
            raise EvalError(f"amplitude shorthand '{ref.reg.display()}"
                            f"[{expr.basis.ket()}]' needs a width-1 register",
                            expr.span)
        return positions[0]
    return resolve_single_qubit(ref, bindings)


def _numeric(v, span):
    if isinstance(v, bool):
        raise EvalError("expected a number, found a boolean", span)
    return v


def _eval_call(expr: Call, env: EvalEnv, classical_only: bool):
    fn = expr.func
    if fn == "length":
        (arg,) = expr.args
        if isinstance(arg, Var):
            positions = env.bindings.registers.get(arg.name)
            if positions is None:
                raise EvalError(f"length(): unknown register '{arg.name}'",
                                expr.span)
            return float(len(positions))
        if isinstance(arg, RefExpr):
            return float(len(resolve_positions(arg.ref, env.bindings)))
        raise EvalError("length() expects a register", expr.span)
    if fn in ("pow", "power"):
        base_expr, exp_expr = expr.args
        # squared magnitude of an amplitude is its outcome probability;
        # well-defined even for entangled qubits via the reduced density
        if isinstance(exp_expr, Num) and int(exp_expr.value) == 2:
            prob = _try_probability(base_expr, env)
            if prob is not None:
                return prob
        base = _numeric(eval_expr(base_expr, env, classical_only), expr.span)
        exponent = _numeric(eval_expr(exp_expr, env, classical_only), expr.span)
        return base ** exponent
    args = [_numeric(eval_expr(a, env, classical_only), expr.span)
            for a in expr.args]
    if fn == "sqrt":
        (x,) = args
        if isinstance(x, complex) or x < 0:
            return cmath.sqrt(x)
        return math.sqrt(x)
    if fn == "cos":
        (x,) = args
        return math.cos(_real(x, expr.span))
    if fn == "sin":
        (x,) = args
        return math.sin(_real(x, expr.span))
    if fn == "isin":
        (x,) = args
        return 1j * math.sin(_real(x, expr.span))
    if fn == "exp":
        (x,) = args
        return cmath.exp(x) if isinstance(x, complex) else math.exp(x)
    raise EvalError(f"unknown function '{fn}'", expr.span)


def _try_probability(base: Expr, env: EvalEnv) -> float | None:
    """pow(q[i][|b>], 2) -> P(q[i]=b) on the relevant state, if base is an
    amplitude accessor (possibly under \\old)."""
    if isinstance(base, Amp):
        if env.here is None:
            return None
        pos = _amp_position(base, env.bindings)
        return simcore.measure_prob(env.here, pos, base.basis.value)
    if isinstance(base, Old) and isinstance(base.operand, Amp):
        if env.old is None:
            raise EvalError("\\old used where no pre-state snapshot exists",
                            base.span)
        pos = _amp_position(base.operand, env.bindings)
        return simcore.measure_prob(env.old, pos, base.operand.basis.value)
    return None


def _real(x, span) -> float:
    if isinstance(x, complex):
        if abs(x.imag) > 1e-12:
            raise EvalError("expected a real number", span)
        return x.real
    return float(x)


def _eval_binop(expr: BinOp, env: EvalEnv, classical_only: bool):
    op = expr.op
    if op in ("&&", "||"):
        lhs = eval_expr(expr.lhs, env, classical_only)
        if not isinstance(lhs, bool):
            raise EvalError(f"'{op}' needs boolean operands", expr.span)
        if op == "&&" and not lhs:
            return False
        if op == "||" and lhs:
            return True
        rhs = eval_expr(expr.rhs, env, classical_only)
        if not isinstance(rhs, bool):
            raise EvalError(f"'{op}' needs boolean operands", expr.span)
        return rhs
    if op in ("==", "!="):
        meas = _measurement_comparison(expr, env)
        if meas is not None:
            return meas if op == "==" else not meas
        lhs = eval_expr(expr.lhs, env, classical_only)
        rhs = eval_expr(expr.rhs, env, classical_only)
        if isinstance(lhs, bool) or isinstance(rhs, bool):
            if isinstance(lhs, bool) and isinstance(rhs, bool):
                return (lhs == rhs) if op == "==" else (lhs != rhs)
            raise EvalError("comparison mixes boolean and numeric values",
                            expr.span)
        eq = abs(complex(lhs) - complex(rhs)) <= env.config.eps_eq
        return eq if op == "==" else not eq
    lhs = _numeric(eval_expr(expr.lhs, env, classical_only), expr.span)
    rhs = _numeric(eval_expr(expr.rhs, env, classical_only), expr.span)
    if op in ("+", "-", "*", "/", "%"):
        if op == "+":
            return lhs + rhs
        if op == "-":
            return lhs - rhs
        if op == "*":
            return lhs * rhs
        if op == "/":
            if rhs == 0:
                raise EvalError("division by zero", expr.span)
            return lhs / rhs
        return math.fmod(_real(lhs, expr.span), _real(rhs, expr.span))
    a, b = _real(lhs, expr.span), _real(rhs, expr.span)
    if op == "<=":
        return a <= b
    if op == "<":
        return a < b
    if op == ">=":
        return a >= b
    if op == ">":
        return a > b
    raise EvalError(f"unknown operator '{op}'", expr.span)


def _measurement_comparison(expr: BinOp, env: EvalEnv) -> bool | None:
    """measZ(q) == b outside behaviors: the outcome has probability 1."""
    meas, other = None, None
    if isinstance(expr.lhs, MeasZ):
        meas, other = expr.lhs, expr.rhs
    elif isinstance(expr.rhs, MeasZ):
        meas, other = expr.rhs, expr.lhs
    if meas is None:
        return None
    if isinstance(other, MeasZ):
        raise EvalError("comparing two measurements is not supported", expr.span)
    bit = _as_int(eval_expr(other, env), expr.span)
    if bit not in (0, 1):
        raise EvalError("measZ(...) compares against 0 or 1", expr.span)
    pos = resolve_single_qubit(meas.qubit, env.bindings)
    p = simcore.measure_prob(env.here, pos, bit)
    return p >= 1 - env.config.eps_prob


# -- equation sets ----------------------------------------------------------------

def check_equation_set(eqset: EquationSet, env: EvalEnv) -> tuple[bool, str]:
    """Check an expanded predicate's equations, factoring out one shared
    global phase in 'shared' mode (solved from the largest-magnitude rhs)."""
    pairs: list[tuple[complex, complex, Amp]] = []
    for eq in eqset.equations:
        lhs = complex(_numeric(eval_expr(eq.lhs, env), eq.lhs.span))
        rhs = complex(_numeric(eval_expr(eq.rhs, env), eq.lhs.span))
        pairs.append((lhs, rhs, eq.lhs))
    phase = 1.0 + 0j
    if env.config.phase_mode == "shared" and pairs:
        best = max(pairs, key=lambda p: abs(p[1]))
        if abs(best[1]) > env.config.eps_eq and abs(best[0]) > env.config.eps_eq:
            ratio = best[0] / best[1]
            phase = ratio / abs(ratio)
    worst = 0.0
    worst_desc = ""
    for lhs, rhs, acc in pairs:
        dev = abs(lhs - phase * rhs)
        if dev > worst:
            worst = dev
            worst_desc = (f"{acc.qubit.reg.display()}"
                          f"[{int(acc.qubit.index.value)}][{acc.basis.ket()}]: "
                          f"measured {lhs:.12g}, expected {phase * rhs:.12g}")
    ok = worst <= env.config.eps_eq
    detail = (f"{len(pairs)} equation(s), max deviation {worst:.3e}"
              + (f"; worst at {worst_desc}" if not ok else ""))
    if env.config.phase_mode == "shared" and abs(phase - 1.0) > 1e-12:
        detail += f"; shared phase {cmath.phase(phase):+.6f} rad"
    return ok, detail


# -- execution ---------------------------------------------------------------------

class _ReturnSignal(Exception):
    pass


@dataclass
class RunOptions:
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)
    check_gates: bool = False
    params: dict[str, float] = field(default_factory=dict)
    reg_widths: dict[str, int] = field(default_factory=dict)


class Executor:
    """Interpret module bodies over a QuantumState, evaluating assertion
    points and optionally gate contracts at call sites."""

    def __init__(self, program: AnnotatedProgram, options: RunOptions,
                 sink, input_index: int):
        self.program = program
        self.options = options
        self.sink = sink  # callable(ClauseVerdict)
        self.input_index = input_index
        self.steps = 0

    def _tick(self, span=None):
        self.steps += 1
        if self.steps > _LOOP_LIMIT:
            raise EvalError("execution step limit exceeded", span)

    # -- body execution ------------------------------------------------------
    def exec_body(self, decl: ModuleDef, bindings: Bindings,
                  state: QuantumState, entry_snapshot: QuantumState,
                  module_name: str) -> QuantumState:
        try:
            return self._exec_stmts(decl.body, bindings, state, entry_snapshot,
                                    module_name)
        except _ReturnSignal:
            return self._return_state

    def _exec_stmts(self, stmts, bindings: Bindings, state: QuantumState,
                    snapshot: QuantumState, module_name: str) -> QuantumState:
        for stmt in stmts:
            state = self._exec_stmt(stmt, bindings, state, snapshot, module_name)
        return state

    def _exec_stmt(self, stmt: Stmt, bindings: Bindings, state: QuantumState,
                   snapshot: QuantumState, module_name: str) -> QuantumState:
        self._tick(getattr(stmt, "span", None))
        if isinstance(stmt, (LocalQreg, StructVar)):
            return state  # allocated with the entry layout
        if isinstance(stmt, VarDecl):
            value = eval_classical(stmt.init, bindings) if stmt.init is not None else 0
            if stmt.type_name == "int":
                value = float(int(_real(value, stmt.span)))
            bindings.classicals[stmt.name] = value
            return state
        if isinstance(stmt, Assign):
            value = eval_classical(stmt.expr, bindings)
            if stmt.op == "+=":
                value = bindings.classicals[stmt.name] + value
            elif stmt.op == "-=":
                value = bindings.classicals[stmt.name] - value
            bindings.classicals[stmt.name] = value
            return state
        if isinstance(stmt, IncDec):
            bindings.classicals[stmt.name] = \
                bindings.classicals.get(stmt.name, 0) + stmt.delta
            return state
        if isinstance(stmt, ForStmt):
            inner = bindings
            state = self._exec_stmt(stmt.init, inner, state, snapshot, module_name)
            while True:
                self._tick(stmt.span)
                cond = eval_classical(stmt.cond, inner)
                if not isinstance(cond, bool):
                    raise EvalError("loop condition must be boolean", stmt.span)
                if not cond:
                    break
                state = self._exec_stmts(stmt.body, inner, state, snapshot,
                                         module_name)
                state = self._exec_stmt(stmt.step, inner, state, snapshot,
                                        module_name)
            return state
        if isinstance(stmt, IfStmt):
            for cond, body in stmt.branches:
                value = eval_classical(cond, bindings)
                if not isinstance(value, bool):
                    raise EvalError("if condition must be boolean", stmt.span)
                if value:
                    return self._exec_stmts(body, bindings, state, snapshot,
                                            module_name)
            if stmt.else_body is not None:
                return self._exec_stmts(stmt.else_body, bindings, state,
                                        snapshot, module_name)
            return state
        if isinstance(stmt, QuantumIf):
            return self._exec_quantum_if(stmt, bindings, state)
        if isinstance(stmt, ReturnStmt):
            self._return_state = state
            raise _ReturnSignal()
        if isinstance(stmt, AssertPoint):
            self._eval_assert_point(stmt, bindings, state, snapshot, module_name)
            return state
        if isinstance(stmt, CallStmt):
            return self.run_call(stmt, bindings, state)
        raise EvalError(f"cannot execute {type(stmt).__name__}",
                        getattr(stmt, "span", None))

    def _eval_assert_point(self, stmt: AssertPoint, bindings: Bindings,
                           state: QuantumState, snapshot: QuantumState,
                           module_name: str):
        env = EvalEnv(here=state, old=snapshot, bindings=bindings,
                      config=self.options.tolerances)
        line, col = self.program.source.position(stmt.span.start)
        for expr in stmt.exprs:
            verdict = _evaluate_boolean_clause(expr, env)
            self.sink(replace(verdict, label="assert", kind="assert",
                              module=module_name, line=line, col=col,
                              input_index=self.input_index))

    # -- calls ------------------------------------------------------------------
    def run_call(self, call: CallStmt, bindings: Bindings, state: QuantumState,
                 controls: tuple[int, ...] = ()) -> QuantumState:
        target = self.program.ast.module(call.name)
        if target is not None and target.body is not None:
            return self._run_module_call(target, call, bindings, state, controls)
        gate_decl = self.program.ast.gate(call.name)
        if call.name in simcore.BUILTIN_GATES:
            return self._run_builtin(call, bindings, state, gate_decl, controls)
        if target is not None:
            raise EvalError(f"module '{call.name}' has no body to execute",
                            call.span)
        if gate_decl is not None:
            raise EvalError(f"gate '{call.name}' is not in the standard "
                            f"library and has no body", call.span)
        raise EvalError(f"unknown gate or module '{call.name}'", call.span)

    def _bind_args(self, decl, call: CallStmt, bindings: Bindings) -> Bindings:
        params: tuple[Param, ...] = decl.params
        if len(params) != len(call.args):
            raise EvalError(f"'{call.name}' expects {len(params)} argument(s), "
                            f"got {len(call.args)}", call.span)
        inner = Bindings()
        for param, arg in zip(params, call.args):
            if param.kind is ParamKind.QREG:
                if arg.qubit is None:
                    raise EvalError(f"argument for '{param.name}' must be a "
                                    f"register", arg.span)
                positions = resolve_positions(arg.qubit, bindings)
                if isinstance(param.width, int) and len(positions) != param.width:
                    raise EvalError(f"'{call.name}': register argument for "
                                    f"'{param.name}' has width "
                                    f"{len(positions)}, expected {param.width}",
                                    arg.span)
                inner.registers[param.name] = positions
                if isinstance(param.width, str):
                    inner.classicals[param.width] = float(len(positions))
            else:
                if arg.qubit is not None and arg.qubit.index is None \
                        and arg.qubit.reg.member is None:
                    value = eval_classical(Var(name=arg.qubit.reg.name),
                                           bindings)
                elif arg.expr is not None:
                    value = eval_classical(arg.expr, bindings)
                else:
                    raise EvalError(f"argument for '{param.name}' must be "
                                    f"classical", arg.span)
                if param.kind is ParamKind.INT:
                    value = float(int(_real(value, arg.span)))
                inner.classicals[param.name] = value
        return inner

    def _run_module_call(self, target: ModuleDef, call: CallStmt,
                         bindings: Bindings, state: QuantumState,
                         controls: tuple[int, ...]) -> QuantumState:
        inner = self._bind_args(target, call, bindings)
        pre = state if not self.options.check_gates else state.copy()
        if controls:
            post = self._exec_controlled_body(target, inner, state, controls)
        else:
            post = self.exec_body(target, inner, state, state, target.name)
        if self.options.check_gates and target.contract is not None \
                and not controls:
            self._check_call_site(target, call, inner, pre, post)
        return post

    def _exec_controlled_body(self, target: ModuleDef, bindings: Bindings,
                              state: QuantumState,
                              controls: tuple[int, ...]) -> QuantumState:
        for stmt in target.body:
            self._tick(getattr(stmt, "span", None))
            if isinstance(stmt, CallStmt):
                state = self.run_call(stmt, bindings, state, controls=controls)
            elif isinstance(stmt, ReturnStmt):
                break
            elif isinstance(stmt, (VarDecl, Assign, IncDec)):
                state = self._exec_stmt(stmt, bindings, state, state,
                                        target.name)
            else:
                raise EvalError("only straight-line call bodies can be "
                                "quantum-controlled", getattr(stmt, "span", None))
        return state

    def _run_builtin(self, call: CallStmt, bindings: Bindings,
                     state: QuantumState, gate_decl: GateDecl | None,
                     controls: tuple[int, ...]) -> QuantumState:
        info = simcore.BUILTIN_GATES[call.name]
        targets: list[int] = []
        params: list[float] = []
        for arg in call.args:
            if arg.qubit is not None and len(targets) < info.n_qubits:
                name = arg.qubit.reg.name
                if arg.qubit.index is None and arg.qubit.reg.member is None \
                        and name not in bindings.registers:
                    params.append(_real(eval_classical(Var(name=name), bindings),
                                        arg.span))
                    continue
                positions = resolve_positions(arg.qubit, bindings)
                if len(positions) != 1:
                    raise EvalError(f"gate '{call.name}' needs single-qubit "
                                    f"arguments; '{name}' has width "
                                    f"{len(positions)}", arg.span)
                targets.append(positions[0])
            elif arg.qubit is not None:
                name = arg.qubit.reg.name
                params.append(_real(eval_classical(Var(name=name), bindings),
                                    arg.span))
            else:
                params.append(_real(eval_classical(arg.expr, bindings), arg.span))
        if len(targets) != info.n_qubits or len(params) != info.n_params:
            raise EvalError(f"gate '{call.name}' expects {info.n_qubits} "
                            f"qubit(s) and {info.n_params} angle(s); got "
                            f"{len(targets)} and {len(params)}", call.span)
        pre = state.copy() if (self.options.check_gates and gate_decl is not None
                               and gate_decl.contract is not None) else None
        if controls:
            post = simcore.apply_controlled(state, call.name, targets,
                                            list(controls), tuple(params))
        else:
            post = simcore.apply_gate(state, call.name, targets, tuple(params))
        if pre is not None and not controls:
            inner = self._builtin_bindings(gate_decl, targets, params)
            self._check_call_site(gate_decl, call, inner, pre, post)
        return post

    def _builtin_bindings(self, decl: GateDecl, targets: list[int],
                          params: list[float]) -> Bindings:
        inner = Bindings()
        t = iter(targets)
        p = iter(params)
        for param in decl.params:
            if param.kind is ParamKind.QREG:
                inner.registers[param.name] = (next(t),)
            else:
                inner.classicals[param.name] = next(p)
        return inner

    def _check_call_site(self, decl, call: CallStmt, inner: Bindings,
                         pre: QuantumState, post: QuantumState):
        line, col = self.program.source.position(call.span.start)
        checker = ContractChecker(self.program, self.options, self.sink,
                                  self.input_index)
        checker.check_contract(decl, inner, pre, post,
                               module_label=f"{decl.name}@{line}:{col}")

    def _exec_quantum_if(self, stmt: QuantumIf, bindings: Bindings,
                         state: QuantumState) -> QuantumState:
        ops = compile_quantum_conditional(stmt)
        for op in ops:
            if isinstance(op, FlipOp):
                pos = resolve_single_qubit(op.qubit, bindings)
                state = simcore.apply_gate(state, "X", [pos])
            else:
                controls = tuple(resolve_single_qubit(q, bindings)
                                 for q in op.controls)
                state = self.run_call(op.call, bindings, state,
                                      controls=controls)
        return state


# -- clause evaluation helpers -------------------------------------------------------

def _evaluate_boolean_clause(expr: Expr, env: EvalEnv) -> ClauseVerdict:
    try:
        value = eval_expr(expr, env)
    except EntangledQubitError as exc:
        return ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                             detail=f"per-qubit amplitudes undefined: {exc} "
                                    f"(purity {exc.purity:.9f})")
    except (EvalError, ExpansionError, SimulationError) as exc:
        return ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                             detail=str(exc))
    if not isinstance(value, bool):
        return ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                             detail="clause does not evaluate to a boolean")
    if value:
        return ClauseVerdict(label="", kind="", verdict=Verdict.PASS)
    return ClauseVerdict(label="", kind="", verdict=Verdict.FAIL,
                         detail=_failure_witness(expr, env))


def _failure_witness(expr: Expr, env: EvalEnv) -> str:
    """For failed comparisons, show both sides."""
    if isinstance(expr, BinOp) and expr.op in ("==", "!=", "<=", "<", ">=", ">"):
        try:
            lhs = eval_expr(expr.lhs, env)
            rhs = eval_expr(expr.rhs, env)
            return f"lhs = {_fmt(lhs)}, rhs = {_fmt(rhs)}"
        except (EvalError, ScaffoldError, SimulationError):
            return "comparison failed"
    return "condition evaluated to false"


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, complex):
        if abs(v.imag) < 1e-12:
            return f"{v.real:.12g}"
        return f"{v.real:.12g}{v.imag:+.12g}i"
    return f"{v:.12g}"


# -- contract checking -----------------------------------------------------------

class _NotMeasurementExpr(Exception):
    pass


def _event_mask(expr: Expr, state: QuantumState, bindings: Bindings) -> np.ndarray:
    """Boolean mask over basis indices for a measZ boolean combination."""
    if isinstance(expr, BinOp):
        if expr.op == "&&":
            return _event_mask(expr.lhs, state, bindings) & \
                _event_mask(expr.rhs, state, bindings)
        if expr.op == "||":
            return _event_mask(expr.lhs, state, bindings) | \
                _event_mask(expr.rhs, state, bindings)
        if expr.op in ("==", "!="):
            meas, other = None, None
            if isinstance(expr.lhs, MeasZ):
                meas, other = expr.lhs, expr.rhs
            elif isinstance(expr.rhs, MeasZ):
                meas, other = expr.rhs, expr.lhs
            if meas is None:
                raise _NotMeasurementExpr()
            if not isinstance(other, Num) or int(other.value) not in (0, 1):
                raise EvalError("measZ(...) compares against 0 or 1", expr.span)
            bit = int(other.value)
            pos = resolve_single_qubit(meas.qubit, bindings)
            mask = simcore.qubit_bits(state, pos) == bit
            return mask if expr.op == "==" else ~mask
    if isinstance(expr, UnOp) and expr.op == "!":
        return ~_event_mask(expr.operand, state, bindings)
    if isinstance(expr, Old) and _contains_measz(expr.operand):
        raise EvalError("\\old(measZ(...)) is not supported", expr.span)
    raise _NotMeasurementExpr()


def _contains_measz(expr: Expr) -> bool:
    if isinstance(expr, MeasZ):
        return True
    for attr in ("lhs", "rhs", "operand", "exponent"):
        child = getattr(expr, attr, None)
        if child is not None and isinstance(child, Expr) and _contains_measz(child):
            return True
    if isinstance(expr, Call):
        return any(_contains_measz(a) for a in expr.args)
    return False


class ContractChecker:
    """Evaluates one declaration's contract against old/post states."""

    def __init__(self, program: AnnotatedProgram, options: RunOptions, sink,
                 input_index: int):
        self.program = program
        self.options = options
        self.sink = sink
        self.input_index = input_index

    # helpers -------------------------------------------------------------
    def _emit(self, verdict: ClauseVerdict):
        self.sink(verdict)

    def _verdict(self, label, kind, base: ClauseVerdict, module, span) -> ClauseVerdict:
        line, col = (0, 0)
        if span is not None:
            line, col = self.program.source.position(span.start)
        return replace(base, label=label or "", kind=kind, module=module,
                       line=line, col=col, input_index=self.input_index)

    def _scope(self, bindings: Bindings) -> ExpansionScope:
        widths = {name: len(pos) for name, pos in bindings.registers.items()}
        return ExpansionScope(register_widths=widths,
                              classical_names=set(bindings.classicals),
                              classical_values=dict(bindings.classicals),
                              predicates=self.program.predicates)

    # requires ------------------------------------------------------------
    def check_requires(self, contract: Contract, bindings: Bindings,
                       pre: QuantumState, module: str) -> list[ClauseVerdict]:
        out = []
        env = EvalEnv(here=pre, old=None, bindings=bindings,
                      config=self.options.tolerances)
        for clause in contract.requires:
            base = _evaluate_boolean_clause(clause.expr, env)
            out.append(self._verdict(clause.label, "requires", base, module,
                                     clause.span))
        for v in out:
            self._emit(v)
        return out

    # post-state ----------------------------------------------------------
    def check_post(self, contract: Contract, bindings: Bindings,
                   old: QuantumState, post: QuantumState, module: str):
        scope = self._scope(bindings)
        norm = normalize_contract(contract, scope)
        env = EvalEnv(here=post, old=old, bindings=bindings,
                      config=self.options.tolerances)
        for clause in norm.ensures:
            self._check_clause(clause, env, module, kind="ensures", scope=scope)
        if norm.behaviors:
            self.check_behaviors(norm, old, post, bindings, module, scope)
        if norm.assigns is not None:
            self.check_frame(norm.assigns, old, post, bindings, module)

    def _check_clause(self, clause: NormalizedClause, env: EvalEnv, module: str,
                      kind: str, scope: ExpansionScope):
        resolved = clause
        if clause.kind == "deferred":
            try:
                expanded = expand_predicate(clause.call, scope)
            except (ExpansionError, NeedsRuntime) as exc:
                message = getattr(exc, "message", None) or \
                    f"expansion needs unbound name '{exc}'"
                base = ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                                     detail=message)
                self._emit(self._verdict(clause.label, kind, base, module,
                                         clause.span))
                return
            if isinstance(expanded, EquationSet):
                resolved = NormalizedClause(label=clause.label, kind="equations",
                                            equations=expanded, span=clause.span)
            else:
                resolved = NormalizedClause(label=clause.label, kind="expr",
                                            expr=expanded, span=clause.span)
        if resolved.kind == "equations":
            try:
                ok, detail = check_equation_set(resolved.equations, env)
                base = ClauseVerdict(label="", kind="",
                                     verdict=Verdict.PASS if ok else Verdict.FAIL,
                                     detail=detail)
            except EntangledQubitError as exc:
                base = ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                                     detail=f"per-qubit amplitudes undefined: "
                                            f"{exc} (purity {exc.purity:.9f})")
            except (EvalError, ExpansionError, SimulationError) as exc:
                base = ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                                     detail=str(exc))
            self._emit(self._verdict(resolved.label, kind, base, module,
                                     resolved.span))
            return
        base = _evaluate_boolean_clause(resolved.expr, env)
        if resolved.kind == "snapshot" and base.detail == "":
            base = replace(base, detail="stated-precondition (checked against "
                                        "the entry snapshot)")
        elif resolved.kind == "snapshot":
            base = replace(base, detail="stated-precondition: " + base.detail)
        self._emit(self._verdict(resolved.label, kind, base, module,
                                 resolved.span))

    # behaviors -----------------------------------------------------------
    def check_behaviors(self, norm, old: QuantumState, post: QuantumState,
                        bindings: Bindings, module: str, scope: ExpansionScope):
        cfg = self.options.tolerances
        probs: list[float] = []
        masks: list[np.ndarray | None] = []
        actives: list[bool] = []
        for behavior in norm.behaviors:
            mask, classical_active, err = self._behavior_condition(
                behavior, old, post, bindings)
            if err is not None:
                base = ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                                     detail=err)
                self._emit(self._verdict(f"behavior {behavior.name}",
                                         "behavior-ensures", base, module,
                                         behavior.span))
                probs.append(0.0)
                masks.append(None)
                actives.append(False)
                continue
            if mask is not None:
                p = simcore.event_prob(post, mask)
                probs.append(p)
                masks.append(mask)
                actives.append(p >= cfg.eps_prob)
                if p < cfg.eps_prob:
                    self._emit_behavior_vacuous(behavior, module, p)
                    continue
                proj_post = simcore.project_event(post, mask, eps=cfg.eps_prob)
                old_used, note = self._old_for_condition(old, mask, behavior,
                                                         bindings)
                env = EvalEnv(here=proj_post, old=old_used, bindings=bindings,
                              config=cfg)
                self._emit_behavior_ensures(behavior, env, module, note,
                                            p_assumed=p)
            else:
                probs.append(1.0 if classical_active else 0.0)
                masks.append(None)
                actives.append(classical_active)
                if not classical_active:
                    self._emit_behavior_vacuous(behavior, module, 0.0)
                    continue
                env = EvalEnv(here=post, old=old, bindings=bindings, config=cfg)
                self._emit_behavior_ensures(behavior, env, module, "", 1.0)
        if norm.complete:
            total = sum(probs)
            ok = total >= 1 - cfg.eps_prob
            base = ClauseVerdict(
                label="", kind="", verdict=Verdict.PASS if ok else Verdict.FAIL,
                detail=f"assumed-event probabilities sum to {total:.12g}")
            self._emit(self._verdict("complete behaviors", "completeness",
                                     base, module, None))
        if norm.disjoint:
            worst = 0.0
            worst_pair = ""
            for i in range(len(norm.behaviors)):
                for j in range(i + 1, len(norm.behaviors)):
                    joint = self._joint_probability(
                        masks[i], actives[i], probs[i],
                        masks[j], actives[j], probs[j], post)
                    if joint > worst:
                        worst = joint
                        worst_pair = (f"{norm.behaviors[i].name} and "
                                      f"{norm.behaviors[j].name}")
            ok = worst <= cfg.eps_prob
            detail = f"max pairwise joint probability {worst:.3e}"
            if not ok:
                detail += f" ({worst_pair})"
            base = ClauseVerdict(label="", kind="",
                                 verdict=Verdict.PASS if ok else Verdict.FAIL,
                                 detail=detail)
            self._emit(self._verdict("disjoint behaviors", "disjointness",
                                     base, module, None))

    def _joint_probability(self, mask_i, active_i, p_i, mask_j, active_j, p_j,
                           post: QuantumState) -> float:
        if mask_i is not None and mask_j is not None:
            return simcore.event_prob(post, mask_i & mask_j)
        if mask_i is None and mask_j is None:
            return 1.0 if (active_i and active_j) else 0.0
        if mask_i is None:
            return p_j if active_i else 0.0
        return p_i if active_j else 0.0

    def _behavior_condition(self, behavior, old: QuantumState,
                            post: QuantumState, bindings: Bindings):
        """Returns (mask, classical_active, error)."""
        any_meas = any(_contains_measz(e) for e in behavior.assumes)
        if not behavior.assumes:
            return None, True, None
        if any_meas:
            if not all(_contains_measz(e) for e in behavior.assumes):
                return None, False, ("behavior mixes measurement and classical "
                                     "assumes clauses")
            mask = np.ones(post.amps.shape[0], dtype=bool)
            for e in behavior.assumes:
                try:
                    mask &= _event_mask(e, post, bindings)
                except _NotMeasurementExpr:
                    return None, False, ("behavior mixes measurement and "
                                         "classical assumes clauses")
                except EvalError as exc:
                    return None, False, str(exc)
            return mask, False, None
        env = EvalEnv(here=old, old=None, bindings=bindings,
                      config=self.options.tolerances)
        try:
            active = all(bool(eval_expr(e, env)) for e in behavior.assumes)
        except (EvalError, SimulationError) as exc:
            return None, False, str(exc)
        return None, active, None

    def _old_for_condition(self, old: QuantumState, mask: np.ndarray, behavior,
                           bindings: Bindings) -> tuple[QuantumState, str]:
        """Project the snapshot onto the assumed outcome only when the
        conditioned qubits were classical before the body ran."""
        cfg = self.options.tolerances
        positions = self._conditioned_positions(behavior, bindings)
        for pos in positions:
            p1 = simcore.measure_prob(old, pos, 1)
            if not (p1 <= cfg.eps_prob or p1 >= 1 - cfg.eps_prob):
                return old, ("old state not projected: pre-state marginal of a "
                             "conditioned qubit is not classical")
        old_p = simcore.event_prob(old, mask)
        if old_p < cfg.eps_prob:
            return old, ("old state not projected: assumed event has zero "
                         "probability in the pre-state")
        return simcore.project_event(old, mask, eps=cfg.eps_prob), ""

    def _conditioned_positions(self, behavior, bindings: Bindings) -> list[int]:
        positions = []

        def walk(e: Expr):
            if isinstance(e, MeasZ):
                positions.append(resolve_single_qubit(e.qubit, bindings))
                return
            for attr in ("lhs", "rhs", "operand", "exponent"):
                child = getattr(e, attr, None)
                if isinstance(child, Expr):
                    walk(child)
            if isinstance(e, Call):
                for a in e.args:
                    walk(a)

        for e in behavior.assumes:
            walk(e)
        return positions

    def _emit_behavior_vacuous(self, behavior, module: str, p: float):
        for clause in behavior.ensures:
            base = ClauseVerdict(label="", kind="", verdict=Verdict.VACUOUS,
                                 detail=f"assumed event probability {p:.3e}")
            self._emit(self._verdict(
                f"behavior {behavior.name}: {clause.label or 'ensures'}",
                "behavior-ensures", base, module, clause.span))

    def _emit_behavior_ensures(self, behavior, env: EvalEnv, module: str,
                               note: str, p_assumed: float):
        scope = self._scope(env.bindings)
        for clause in behavior.ensures:
            sink_orig = self.sink
            collected: list[ClauseVerdict] = []
            self.sink = collected.append
            try:
                self._check_clause(clause, env, module, kind="behavior-ensures",
                                   scope=scope)
            finally:
                self.sink = sink_orig
            for v in collected:
                label = f"behavior {behavior.name}: {v.label or 'ensures'}"
                detail = v.detail
                if note:
                    detail = f"{detail} [{note}]" if detail else f"[{note}]"
                self._emit(replace(v, label=label, detail=detail))

    # frame ------------------------------------------------------------------
    def check_frame(self, assigns, old: QuantumState, post: QuantumState,
                    bindings: Bindings, module: str):
        cfg = self.options.tolerances
        assigned: set[int] = set()
        try:
            for target in assigns:
                if target.qubit is None:
                    continue  # \nothing
                assigned.update(resolve_positions(target.qubit, bindings))
        except EvalError as exc:
            base = ClauseVerdict(label="", kind="", verdict=Verdict.ERROR,
                                 detail=str(exc))
            self._emit(self._verdict("assigns", "assigns-frame", base, module,
                                     None))
            return
        worst = 0.0
        worst_pos = None
        bystanders = [q for q in range(post.n_qubits) if q not in assigned]
        for q in bystanders:
            dev = float(np.max(np.abs(simcore.reduced_density(old, q)
                                      - simcore.reduced_density(post, q))))
            if dev > worst:
                worst = dev
                worst_pos = q
        ok = worst <= cfg.eps_eq
        if ok:
            detail = (f"{len(bystanders)} non-assigned qubit(s) unchanged "
                      f"(max deviation {worst:.3e})")
        else:
            detail = (f"non-assigned qubit {_position_name(post.layout, worst_pos)} "
                      f"changed (reduced-density deviation {worst:.3e})")
        base = ClauseVerdict(label="", kind="",
                             verdict=Verdict.PASS if ok else Verdict.FAIL,
                             detail=detail)
        self._emit(self._verdict("assigns", "assigns-frame", base, module, None))

    # whole-declaration check ---------------------------------------------------
    def check_contract(self, decl, bindings: Bindings, old: QuantumState,
                       post: QuantumState, module_label: str):
        contract = decl.contract
        if contract is None:
            return
        self.check_requires(contract, bindings, old, module_label)
        self.check_post(contract, bindings, old, post, module_label)


def _position_name(layout: RegisterLayout, pos: int) -> str:
    base = 0
    for name, width in layout.registers:
        if pos < base + width:
            return f"{name}[{pos - base}]"
        base += width
    return f"qubit {pos}"
