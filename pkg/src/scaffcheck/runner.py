"""Whole-program check orchestration: input handling, entry execution,
report assembly."""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import simcore
from .checker import (
    Bindings, ClauseVerdict, ContractChecker, EvalError, Executor, RunOptions,
    Verdict, _real, eval_classical,
)
from .conditional import ConditionalCompileError
from .diagnostics import ScaffoldError
from .frontend.ast_nodes import (
    GateDecl, LocalQreg, ModuleDef, ParamKind, StructVar,
)
from .frontend.attach import AnnotatedProgram
from .simcore import QuantumState, RegisterLayout, SimulationError
from .specmodel import ExpansionError


class RunSetupError(ScaffoldError):
    pass


@dataclass(frozen=True)
class BasisInput:
    """Initial basis-state assignment; unlisted qubits start in |0>."""

    bits: tuple[tuple[tuple[str, int], int], ...] = ()

    def describe(self) -> str:
        if not self.bits:
            return "|0...0>"
        return ",".join(f"{r}[{i}]={b}" for (r, i), b in self.bits)


@dataclass(frozen=True)
class StateInput:
    """Explicit amplitude vector (e.g. from a state dump file)."""

    amplitudes: tuple[complex, ...]
    label: str = "state"

    def describe(self) -> str:
        return self.label


@dataclass
class RunRequest:
    entry: str
    inputs: list = field(default_factory=list)   # BasisInput | StateInput
    # None: random inputs not requested; 0 is a request for an empty run
    random_count: int | None = None
    seed: int | None = None
    options: RunOptions = field(default_factory=RunOptions)
    jobs: int = 1


@dataclass
class CheckReport:
    program_path: str
    program_sha256: str
    entry: str
    config: dict
    inputs: list[str] = field(default_factory=list)
    verdicts: list[ClauseVerdict] = field(default_factory=list)

    @property
    def summary(self) -> dict[str, int]:
        counts = {"pass": 0, "fail": 0, "vacuous": 0, "error": 0}
        for v in self.verdicts:
            counts[v.verdict.value] += 1
        counts["total"] = len(self.verdicts)
        return counts

    @property
    def ok(self) -> bool:
        s = self.summary
        return s["fail"] == 0 and s["error"] == 0


def build_layout(program: AnnotatedProgram, decl,
                 reg_widths: dict[str, int]) -> tuple[RegisterLayout, Bindings]:
    """Layout and bindings for an entry declaration: parameters first, then
    top-level local registers and struct variables."""
    registers: list[tuple[str, int]] = []
    symbolic: list[tuple[str, str]] = []  # (width name, register name)
    for p in decl.params:
        if p.kind is not ParamKind.QREG:
            continue
        if isinstance(p.width, int):
            registers.append((p.name, p.width))
        elif isinstance(p.width, str):
            if p.name in reg_widths:
                registers.append((p.name, reg_widths[p.name]))
                symbolic.append((p.width, p.name))
            else:
                raise RunSetupError(
                    f"register '{p.name}' of entry '{decl.name}' has symbolic "
                    f"width '{p.width}'; supply it (e.g. --reg {p.name}=3)")
        else:
            registers.append((p.name, reg_widths.get(p.name, 1)))
    struct_members: dict[str, dict[str, tuple[int, ...]]] = {}
    if isinstance(decl, ModuleDef) and decl.body:
        for stmt in decl.body:
            if isinstance(stmt, LocalQreg):
                registers.append((stmt.name, stmt.width))
            elif isinstance(stmt, StructVar):
                struct = program.ast.struct(stmt.type_name)
                if struct is None:
                    raise RunSetupError(f"unknown qstruct '{stmt.type_name}'")
                for fname, width in struct.fields:
                    registers.append((f"{stmt.name}.{fname}", width))
    layout = RegisterLayout(tuple(registers))
    bindings = Bindings()
    for name, _w in registers:
        if "." in name:
            var, member = name.split(".", 1)
            struct_members.setdefault(var, {})[member] = layout.positions(name)
        else:
            bindings.registers[name] = layout.positions(name)
    bindings.structs = struct_members
    for wname, rname in symbolic:
        bindings.classicals[wname] = float(layout.width(rname))
    return layout, bindings


def _initial_state(layout: RegisterLayout, spec) -> QuantumState:
    if isinstance(spec, BasisInput):
        return simcore.init_state(layout, dict(spec.bits))
    if isinstance(spec, StateInput):
        return simcore.state_from_amplitudes(layout, np.array(spec.amplitudes))
    raise RunSetupError(f"unsupported input spec {spec!r}")


def _bind_entry_classicals(decl, bindings: Bindings, options: RunOptions):
    for p in decl.params:
        if p.kind is ParamKind.QREG:
            continue
        if p.name not in options.params:
            raise RunSetupError(
                f"entry '{decl.name}' needs classical argument '{p.name}' "
                f"(supply it with --param {p.name}=<value>)")
        value = float(options.params[p.name])
        if p.kind is ParamKind.INT:
            value = float(int(value))
        bindings.classicals[p.name] = value


def check_one_input(program: AnnotatedProgram, decl, layout: RegisterLayout,
                    base_bindings: Bindings, spec, input_index: int,
                    options: RunOptions) -> list[ClauseVerdict]:
    verdicts: list[ClauseVerdict] = []
    sink = verdicts.append
    checker = ContractChecker(program, options, sink, input_index)
    bindings = base_bindings.child()
    module_name = decl.name

    def error_verdict(message: str):
        sink(ClauseVerdict(label="run", kind="ensures", verdict=Verdict.ERROR,
                           detail=message, module=module_name,
                           input_index=input_index))

    try:
        pre = _initial_state(layout, spec)
    except (SimulationError, RunSetupError) as exc:
        error_verdict(str(exc))
        return verdicts

    contract = decl.contract
    if contract is not None and contract.requires:
        requires = checker.check_requires(contract, bindings, pre, module_name)
        if any(v.verdict in (Verdict.FAIL, Verdict.ERROR) for v in requires):
            return verdicts

    old = pre.copy()
    executor = Executor(program, options, sink, input_index)
    try:
        if isinstance(decl, ModuleDef):
            if decl.body is None:
                error_verdict(f"module '{decl.name}' has no body to execute")
                return verdicts
            post = executor.exec_body(decl, bindings, pre, old, module_name)
        else:
            post = _apply_gate_decl(decl, bindings, pre)
    except (EvalError, SimulationError, ExpansionError,
            ConditionalCompileError, RunSetupError) as exc:
        error_verdict(str(exc))
        return verdicts

    if contract is not None:
        checker.check_post(contract, bindings, old, post, module_name)
    return verdicts


def _apply_gate_decl(decl: GateDecl, bindings: Bindings,
                     state: QuantumState) -> QuantumState:
    """Checking a library gate's own contract: run the gate on its parameters."""
    if decl.name not in simcore.BUILTIN_GATES:
        raise RunSetupError(f"gate '{decl.name}' is not in the standard "
                            f"library; it cannot be executed directly")
    info = simcore.BUILTIN_GATES[decl.name]
    targets: list[int] = []
    params: list[float] = []
    for p in decl.params:
        if p.kind is ParamKind.QREG:
            positions = bindings.registers[p.name]
            if len(positions) != 1:
                raise RunSetupError(f"gate parameter '{p.name}' must have "
                                    f"width 1")
            targets.append(positions[0])
        else:
            params.append(bindings.classicals[p.name])
    if len(targets) != info.n_qubits or len(params) != info.n_params:
        raise RunSetupError(
            f"gate '{decl.name}' signature mismatch: declaration supplies "
            f"{len(targets)} qubit(s)/{len(params)} angle(s), the library "
            f"gate needs {info.n_qubits}/{info.n_params}")
    return simcore.apply_gate(state, decl.name, targets, tuple(params))


def run_program(program: AnnotatedProgram, request: RunRequest) -> CheckReport:
    decl = program.declaration(request.entry)
    if decl is None:
        raise RunSetupError(f"entry '{request.entry}' not found")
    layout, base_bindings = build_layout(program, decl,
                                         request.options.reg_widths)
    _bind_entry_classicals(decl, base_bindings, request.options)
    for name, value in request.options.params.items():
        base_bindings.classicals.setdefault(name, float(value))

    inputs = list(request.inputs)
    if request.random_count is not None:
        if request.random_count > 0 and request.seed is None:
            raise RunSetupError("random inputs need a seed")
        rng = np.random.default_rng(request.seed)
        for k in range(request.random_count):
            st = simcore.random_product_state(layout, rng)
            inputs.append(StateInput(amplitudes=tuple(st.amps),
                                     label=f"random[{k}] seed={request.seed}"))
    elif not inputs:
        inputs = [BasisInput()]

    tol = request.options.tolerances
    config = {
        "entry": request.entry,
        "epsilon_eq": tol.eps_eq,
        "epsilon_prob": tol.eps_prob,
        "epsilon_pure": tol.eps_pure,
        "phase_mode": tol.phase_mode,
        "check_gates": request.options.check_gates,
        "seed": request.seed,
        "random_count": request.random_count,
        "params": dict(sorted(request.options.params.items())),
        "reg_widths": dict(sorted(request.options.reg_widths.items())),
        "jobs": request.jobs,
    }
    report = CheckReport(program_path=program.source.path,
                         program_sha256=program.source.sha256(),
                         entry=request.entry, config=config,
                         inputs=[spec.describe() for spec in inputs])

    def work(pair):
        index, spec = pair
        return check_one_input(program, decl, layout, base_bindings, spec,
                               index, request.options)

    if request.jobs > 1 and len(inputs) > 1:
        with ThreadPoolExecutor(max_workers=request.jobs) as pool:
            results = list(pool.map(work, enumerate(inputs)))
    else:
        results = [work(pair) for pair in enumerate(inputs)]
    for verdicts in results:
        report.verdicts.extend(verdicts)
    return report
