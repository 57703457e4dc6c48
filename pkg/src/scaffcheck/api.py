"""Service layer: pydantic request/response models plus the operations the
HTTP service and the CLI both call."""
from __future__ import annotations

import re

from pydantic import BaseModel, Field

from . import __version__, simcore
from .checker import RunOptions, ToleranceConfig
from .diagnostics import Diagnostic, Severity, has_errors
from .frontend import load_program_checked
from .frontend.linting import lint as lint_pass
from .runner import (
    BasisInput, CheckReport, RunRequest, RunSetupError, StateInput,
    build_layout, run_program,
)
from .source import SourceFile
from .specmodel import ExpansionError
from .vcgen import Unsupported, generate_all, generate_vc


class ApiError(Exception):
    """Request-level failure with renderable diagnostics."""

    def __init__(self, message: str, diagnostics: list[str] | None = None):
        super().__init__(message)
        self.message = message
        self.diagnostics = diagnostics or []


# -- models -------------------------------------------------------------------

class DiagnosticModel(BaseModel):
    path: str
    line: int
    col: int
    severity: str
    message: str

    @classmethod
    def from_diagnostic(cls, d: Diagnostic) -> "DiagnosticModel":
        return cls(path=d.path, line=d.line, col=d.col,
                   severity=d.severity.value, message=d.message)

    def render(self) -> str:
        return f"{self.path}:{self.line}:{self.col}: {self.severity}: {self.message}"


class LintRequest(BaseModel):
    source: str
    path: str = "<memory>"


class LintResponse(BaseModel):
    version: str = __version__
    diagnostics: list[DiagnosticModel] = Field(default_factory=list)
    errors: int = 0
    warnings: int = 0
    ok: bool = True


class ToleranceModel(BaseModel):
    epsilon_eq: float = 1e-9
    epsilon_prob: float = 1e-9
    epsilon_pure: float = 1e-9
    phase: str = "shared"

    def to_config(self) -> ToleranceConfig:
        try:
            return ToleranceConfig(eps_eq=self.epsilon_eq,
                                   eps_prob=self.epsilon_prob,
                                   eps_pure=self.epsilon_pure,
                                   phase_mode=self.phase)
        except ValueError as exc:
            raise ApiError(str(exc))


class CheckRequest(BaseModel):
    source: str
    path: str = "<memory>"
    entry: str
    init: dict[str, int] = Field(default_factory=dict)  # "q[0]" -> 0|1
    state: list[list[float]] | None = None  # [[re, im], ...] amplitudes
    random: int | None = None
    seed: int | None = None
    params: dict[str, float] = Field(default_factory=dict)
    regs: dict[str, int] = Field(default_factory=dict)
    tolerances: ToleranceModel = Field(default_factory=ToleranceModel)
    check_gates: bool = False
    jobs: int = 1


class SpanModel(BaseModel):
    line: int
    col: int


class ClauseModel(BaseModel):
    label: str
    kind: str
    verdict: str
    span: SpanModel
    detail: str
    module: str
    input_index: int


class SummaryModel(BaseModel):
    total: int
    passed: int = Field(alias="pass")
    fail: int
    vacuous: int
    error: int

    model_config = {"populate_by_name": True}


class ProgramModel(BaseModel):
    path: str
    sha256: str
    entry: str


class CheckResponse(BaseModel):
    version: str = __version__
    program: ProgramModel
    config: dict
    inputs: list[str]
    clauses: list[ClauseModel]
    summary: SummaryModel
    ok: bool


class SimulateRequest(BaseModel):
    source: str
    path: str = "<memory>"
    entry: str
    init: dict[str, int] = Field(default_factory=dict)
    params: dict[str, float] = Field(default_factory=dict)
    regs: dict[str, int] = Field(default_factory=dict)


class SimulateResponse(BaseModel):
    version: str = __version__
    entry: str
    qubits: list[str]
    amplitudes: list[list[float]]
    dump: str


class VcgenRequest(BaseModel):
    source: str
    path: str = "<memory>"
    module: str | None = None


class VcDocumentModel(BaseModel):
    module: str
    filename: str
    text: str


class SkippedModel(BaseModel):
    module: str
    reason: str


class VcgenResponse(BaseModel):
    version: str = __version__
    documents: list[VcDocumentModel]
    skipped: list[SkippedModel]


# -- operations ----------------------------------------------------------------

def _load(source_text: str, path: str):
    source = SourceFile(path=path, content=source_text)
    program, diags = load_program_checked(source)
    return source, program, diags


def run_lint(request: LintRequest) -> LintResponse:
    _source, program, diags = _load(request.source, request.path)
    if program is not None:
        diags = diags + lint_pass(program)
    models = [DiagnosticModel.from_diagnostic(d) for d in diags]
    errors = sum(1 for d in diags if d.severity is Severity.ERROR)
    warnings = sum(1 for d in diags if d.severity is Severity.WARNING)
    return LintResponse(diagnostics=models, errors=errors, warnings=warnings,
                        ok=errors == 0)


_INIT_KEY = re.compile(r"^([A-Za-z_][A-Za-z0-9_.]*)\[(\d+)\]$")


def parse_init_key(key: str) -> tuple[str, int]:
    m = _INIT_KEY.match(key.strip())
    if not m:
        raise ApiError(f"bad initial-state key {key!r} (expected name[index])")
    return m.group(1), int(m.group(2))


def _program_or_fail(source_text: str, path: str):
    _source, program, diags = _load(source_text, path)
    if program is None or has_errors(diags):
        raise ApiError("source has errors",
                       [d.render() for d in diags])
    return program


def _report_to_response(report: CheckReport) -> CheckResponse:
    clauses = [
        ClauseModel(label=v.label, kind=v.kind, verdict=v.verdict.value,
                    span=SpanModel(line=v.line, col=v.col), detail=v.detail,
                    module=v.module, input_index=v.input_index)
        for v in report.verdicts
    ]
    s = report.summary
    summary = SummaryModel(total=s["total"], fail=s["fail"],
                           vacuous=s["vacuous"], error=s["error"],
                           **{"pass": s["pass"]})
    return CheckResponse(
        program=ProgramModel(path=report.program_path,
                             sha256=report.program_sha256, entry=report.entry),
        config=report.config, inputs=report.inputs, clauses=clauses,
        summary=summary, ok=report.ok)


def run_check(request: CheckRequest) -> CheckResponse:
    program = _program_or_fail(request.source, request.path)
    options = RunOptions(tolerances=request.tolerances.to_config(),
                         check_gates=request.check_gates,
                         params=dict(request.params),
                         reg_widths=dict(request.regs))
    inputs: list = []
    if request.init:
        bits = tuple(sorted((parse_init_key(k), int(v))
                            for k, v in request.init.items()))
        inputs.append(BasisInput(bits=bits))
    if request.state is not None:
        amps = tuple(complex(re_, im_) for re_, im_ in request.state)
        inputs.append(StateInput(amplitudes=amps, label="state"))
    if request.random and request.seed is None:
        raise ApiError("random inputs need a seed")
    run = RunRequest(entry=request.entry, inputs=inputs or [],
                     random_count=request.random, seed=request.seed,
                     options=options, jobs=request.jobs)
    try:
        report = run_program(program, run)
    except (RunSetupError, ExpansionError, simcore.SimulationError) as exc:
        raise ApiError(str(exc))
    return _report_to_response(report)


def run_simulate(request: SimulateRequest) -> SimulateResponse:
    program = _program_or_fail(request.source, request.path)
    decl = program.declaration(request.entry)
    if decl is None:
        raise ApiError(f"entry '{request.entry}' not found")
    from .checker import Executor
    from .frontend.ast_nodes import ModuleDef
    from .runner import _apply_gate_decl, _bind_entry_classicals

    options = RunOptions(params=dict(request.params),
                         reg_widths=dict(request.regs))
    try:
        layout, bindings = build_layout(program, decl, options.reg_widths)
        _bind_entry_classicals(decl, bindings, options)
        assignment = {parse_init_key(k): int(v)
                      for k, v in request.init.items()}
        state = simcore.init_state(layout, assignment)
        executor = Executor(program, options, lambda v: None, 0)
        if isinstance(decl, ModuleDef):
            if decl.body is None:
                raise ApiError(f"module '{request.entry}' has no body")
            state = executor.exec_body(decl, bindings, state, state, decl.name)
        else:
            state = _apply_gate_decl(decl, bindings, state)
    except (RunSetupError, simcore.SimulationError, ExpansionError) as exc:
        raise ApiError(str(exc))
    except Exception as exc:  # checker EvalError and friends
        raise ApiError(str(exc))
    qubits = []
    for name, width in layout.registers:
        qubits.extend(f"{name}[{i}]" for i in range(width))
    return SimulateResponse(
        entry=request.entry, qubits=qubits,
        amplitudes=[[float(a.real), float(a.imag)] for a in state.amps],
        dump=simcore.state_dump(state))


def run_vcgen(request: VcgenRequest) -> VcgenResponse:
    program = _program_or_fail(request.source, request.path)
    if request.module is not None:
        decl = program.declaration(request.module)
        if decl is None:
            raise ApiError(f"module '{request.module}' not found")
        try:
            docs = [generate_vc(decl, program)]
            skipped = []
        except Unsupported as exc:
            docs = []
            skipped = [(request.module, exc.reason)]
    else:
        docs, skipped = generate_all(program)
    return VcgenResponse(
        documents=[VcDocumentModel(module=d.module, filename=d.filename(),
                                   text=d.text) for d in docs],
        skipped=[SkippedModel(module=m, reason=r) for m, r in skipped])
