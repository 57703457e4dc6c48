"""Compilation of quantum-controlled conditionals into X-conjugated
multi-controlled applications.

The branch dispatch for `if (c1==1 && c2==1) {U} else if (c1==1 && c2==0)
{V} else {W}` compiles to: CC-U; X(c2); CC-V; X(c1); X(c2); C-W — controls
toggled with X so every application is conditioned on all-ones, and the
else branch lowered to the single conjunction covering its residual cases.
Control qubits are consumed: flips are not undone afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product

from .frontend.ast_nodes import CallStmt, QuantumCondition, QuantumIf
from .spec_ast import Num, QubitRef


class ConditionalCompileError(Exception):
    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.message = message
        self.span = span


@dataclass(frozen=True)
class FlipOp:
    """Apply X to one control qubit."""

    qubit: QubitRef


@dataclass(frozen=True)
class ControlledCall:
    """Apply a gate/module call with every control conditioned on |1>."""

    controls: tuple[QubitRef, ...]
    call: CallStmt


CompiledOp = FlipOp | ControlledCall


def _key(ref: QubitRef) -> tuple[str, str | None, int]:
    if not isinstance(ref.index, Num):
        raise ConditionalCompileError(
            "control qubit index must be a literal", ref.span)
    return (ref.reg.name, ref.reg.member, int(ref.index.value))


def compile_quantum_conditional(stmt: QuantumIf) -> list[CompiledOp]:
    """Lower a quantum conditional to a flat op sequence."""
    # control universe in first-appearance order
    control_order: list[tuple] = []
    control_refs: dict[tuple, QubitRef] = {}
    branch_patterns: list[dict[tuple, int]] = []
    for conds, _body in stmt.branches:
        pattern: dict[tuple, int] = {}
        for cond in conds:
            key = _key(cond.qubit)
            if key in pattern and pattern[key] != cond.bit:
                raise ConditionalCompileError(
                    "contradictory conditions on the same control qubit",
                    cond.span)
            pattern[key] = cond.bit
            if key not in control_refs:
                control_refs[key] = cond.qubit
                control_order.append(key)
        branch_patterns.append(pattern)

    branches: list[tuple[dict, tuple[CallStmt, ...]]] = [
        (pat, body) for pat, (_, body) in zip(branch_patterns, stmt.branches)]

    if stmt.else_body is not None:
        residual_pattern = _else_pattern(branch_patterns, control_order, stmt)
        if residual_pattern is not None:
            branches.append((residual_pattern, stmt.else_body))

    ops: list[CompiledOp] = []
    flipped: set[tuple] = set()
    for pattern, body in branches:
        desired = {key for key, bit in pattern.items() if bit == 0}
        for key in control_order:
            if (key in desired) != (key in flipped):
                ops.append(FlipOp(qubit=control_refs[key]))
        flipped = desired
        controls = tuple(control_refs[key] for key in control_order
                         if key in pattern)
        for call in body:
            ops.append(ControlledCall(controls=controls, call=call))
    return ops


def _else_pattern(branch_patterns: list[dict], control_order: list[tuple],
                  stmt: QuantumIf) -> dict | None:
    """The residual assignments not covered by any branch, as one conjunction.

    Returns None when the branches already cover everything (unreachable
    else) and raises when the residual is not expressible as a conjunction.
    """
    n = len(control_order)
    covered: set[tuple[int, ...]] = set()
    for pattern in branch_patterns:
        free = [k for k in control_order if k not in pattern]
        for bits in product((0, 1), repeat=len(free)):
            assignment = dict(zip(free, bits)) | pattern
            covered.add(tuple(assignment[k] for k in control_order))
    residual = [bits for bits in product((0, 1), repeat=n) if bits not in covered]
    if not residual:
        return None
    # search for a partial assignment whose matches equal the residual
    for keys_mask in range(2 ** n):
        fixed = [i for i in range(n) if (keys_mask >> i) & 1]
        for bits in product((0, 1), repeat=len(fixed)):
            matches = [full for full in product((0, 1), repeat=n)
                       if all(full[i] == b for i, b in zip(fixed, bits))]
            if sorted(matches) == sorted(residual):
                return {control_order[i]: b for i, b in zip(fixed, bits)}
    raise ConditionalCompileError(
        "else branch of a quantum conditional is not expressible as a "
        "conjunction of control conditions", stmt.span)
