"""Data model for ScaffML contracts and specification expressions.

Expression nodes double as the representation for classical expressions in
Scaffold module bodies (loop bounds, gate angles); the quantum-only nodes
(amplitude accessors, measZ, \\old, predicate calls) appear in annotations
only. Span fields never participate in equality so that structural
comparison ignores formatting.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

from .source import NO_SPAN, Span


class Epoch(Enum):
    HERE = "Here"
    OLD = "Old"


class Basis(Enum):
    ZERO = 0
    ONE = 1

    def ket(self) -> str:
        return f"|{self.value}>"


@dataclass(frozen=True)
class RegRef:
    """Reference to a register: a bare name or a struct member (`qst.second`)."""

    name: str
    member: str | None = None
    span: Span = field(default=NO_SPAN, compare=False)

    def display(self) -> str:
        return f"{self.name}.{self.member}" if self.member else self.name


@dataclass(frozen=True)
class QubitRef:
    """One qubit (`q[i]`), a whole register (`q` / `q[]`), or a slice (`q[a..b]`).

    index is None for whole-register references; slice_hi is set only for
    slices, in which case index holds the low bound.
    """

    reg: RegRef
    index: "Expr | None" = None
    slice_hi: "Expr | None" = None
    explicit_brackets: bool = False  # distinguishes `q[]` from bare `q`
    span: Span = field(default=NO_SPAN, compare=False)

    @property
    def is_slice(self) -> bool:
        return self.slice_hi is not None

    @property
    def is_whole(self) -> bool:
        return self.index is None


class Expr:
    """Base class for expression nodes."""

    span: Span


@dataclass(frozen=True)
class Num(Expr):
    value: float | int
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Var(Expr):
    name: str
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # + - * / == != <= < >= > && ||
    lhs: Expr
    rhs: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class UnOp(Expr):
    op: str  # - !
    operand: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Call(Expr):
    """Builtin function application: sqrt, pow, power, cos, sin, isin, length."""

    func: str
    args: tuple[Expr, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class ExpI(Expr):
    """Unit-modulus exponential written `e^(...)`; the argument is the full exponent."""

    exponent: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Imag(Expr):
    """The imaginary unit `i` (valid inside spec expressions only)."""

    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class RefExpr(Expr):
    """A qubit/register reference in expression position (`q[0] == 1`)."""

    ref: QubitRef
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Amp(Expr):
    """Amplitude accessor `q[i][|b>]` (or width-1 shorthand `q[|b>]`).

    Pre-state access is expressed by wrapping in Old; a bare accessor always
    reads the current (Here) state.
    """

    qubit: QubitRef
    basis: Basis
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class MeasZ(Expr):
    """Computational-basis measurement predicate `measZ(q[i])`."""

    qubit: QubitRef
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Old(Expr):
    """`\\old(expr)` — value of expr in the pre-state snapshot."""

    operand: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Valid(Expr):
    """`\\valid(q[i]+(|0>..|1>))` — declaration/bounds predicate."""

    qubit: QubitRef
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class PredCall(Expr):
    """Predicate application, e.g. `Reverse{Here,Old}(input[0], 2)`.

    Arguments are expressions; register arguments appear as RefExpr/Var and
    are resolved against the declaration scope at expansion time. epochs is
    None when no `{...}` pair was written (qbitselfCheck, QFTCheck).
    """

    name: str
    epochs: tuple[Epoch, Epoch] | None
    args: tuple[Expr, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class AssignsTarget:
    """One `assigns` location: `q[i][|0>..|1>]` or `q[][|0>..|1>]`, or \\nothing."""

    qubit: QubitRef | None  # None encodes `\nothing`
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Clause:
    """A labelled requires/ensures expression."""

    label: str | None
    expr: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Behavior:
    name: str
    assumes: tuple[Expr, ...]
    ensures: tuple[Clause, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SpecParam:
    """Parameter of a user-defined spec predicate; arrays are untyped (`qbits[]`)."""

    name: str
    is_array: bool
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SpecPredicateDef:
    """User-defined predicate (`module QFTCheck(...) { ... }` inside an annotation).

    The body is a restricted classical program whose `//ensures` lines emit
    primitive amplitude equations when reached.
    """

    name: str
    params: tuple[SpecParam, ...]
    body: tuple["SpecStmt", ...]
    span: Span = field(default=NO_SPAN, compare=False)


class SpecStmt:
    span: Span


@dataclass(frozen=True)
class SpecVarDecl(SpecStmt):
    name: str
    init: Expr | None
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SpecAssign(SpecStmt):
    name: str
    expr: Expr
    op: str = "="  # = += -=
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SpecFor(SpecStmt):
    init: SpecStmt
    cond: Expr
    step: SpecStmt
    body: tuple[SpecStmt, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SpecIf(SpecStmt):
    cond: Expr
    then_body: tuple[SpecStmt, ...]
    else_body: tuple[SpecStmt, ...]
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class SpecEmit(SpecStmt):
    """`//ensures lhs == rhs;` inside a predicate body: emits one equation."""

    expr: Expr
    span: Span = field(default=NO_SPAN, compare=False)


@dataclass(frozen=True)
class Contract:
    requires: tuple[Clause, ...] = ()
    assigns: tuple[AssignsTarget, ...] | None = None  # None: no clause given
    ensures: tuple[Clause, ...] = ()
    behaviors: tuple[Behavior, ...] = ()
    complete: bool = False
    disjoint: bool = False
    predicate_defs: tuple[SpecPredicateDef, ...] = ()
    span: Span = field(default=NO_SPAN, compare=False)

    def is_empty(self) -> bool:
        return not (self.requires or self.assigns is not None or self.ensures
                    or self.behaviors or self.predicate_defs)


@dataclass(frozen=True)
class Equation:
    """Primitive amplitude equation: a single Here-amplitude lhs and an
    old/constant rhs. probability=True means both sides compare squared
    magnitudes (the normalization predicate)."""

    lhs: Amp
    rhs: Expr
    probability: bool = False


@dataclass(frozen=True)
class EquationSet:
    equations: tuple[Equation, ...]
    source_name: str = ""
