"""Predicate expansion goldens and user-defined predicate interpretation."""
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaffcheck.frontend.annotations import parse_contract_text, parse_spec_expr
from scaffcheck.spec_ast import (
    Amp, Basis, BinOp, Clause, EquationSet, Num, Old, PredCall, QubitRef,
    RegRef, Var,
)
from scaffcheck.specmodel import (
    ExpansionError, ExpansionScope, NeedsRuntime, expand_predicate,
    interpret_spec_predicate, normalize_contract,
)


def scope(registers=None, classicals=(), values=None, predicates=None):
    return ExpansionScope(register_widths=dict(registers or {}),
                          classical_names=set(classicals),
                          classical_values=dict(values or {}),
                          predicates=dict(predicates or {}))


def pred(text):
    expr = parse_spec_expr(text)
    assert isinstance(expr, PredCall)
    return expr


def _resolve_shorthand(expr):
    """Golden equation texts use the width-1 shorthand `q[|b>]`; rewrite to
    the explicit `q[0][|b>]` form the expander produces."""
    from scaffcheck.spec_ast import Call, ExpI, UnOp
    if isinstance(expr, Amp):
        ref = expr.qubit
        if ref.index is None and not ref.explicit_brackets:
            ref = QubitRef(reg=ref.reg, index=Num(0))
        return Amp(qubit=ref, basis=expr.basis)
    if isinstance(expr, Old):
        return Old(_resolve_shorthand(expr.operand))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, _resolve_shorthand(expr.lhs),
                     _resolve_shorthand(expr.rhs))
    if isinstance(expr, UnOp):
        return UnOp(expr.op, _resolve_shorthand(expr.operand))
    if isinstance(expr, Call):
        return Call(func=expr.func,
                    args=tuple(_resolve_shorthand(a) for a in expr.args))
    if isinstance(expr, ExpI):
        return ExpI(_resolve_shorthand(expr.exponent))
    return expr


def assert_expansion_matches(call_text, golden_eqs, sc):
    """golden_eqs: the commented equivalent equations, verbatim."""
    result = expand_predicate(pred(call_text), sc)
    assert isinstance(result, EquationSet)
    assert len(result.equations) == len(golden_eqs)
    for eq, golden in zip(result.equations, golden_eqs):
        expect = _resolve_shorthand(parse_spec_expr(golden))
        assert isinstance(expect, BinOp) and expect.op == "=="
        assert eq.lhs == expect.lhs
        assert eq.rhs == expect.rhs


W1 = {"qbit": 1, "qbit1": 1, "qbit2": 1, "q": 1, "input": 1}


def test_unchanged_expansion_golden():
    assert_expansion_matches(
        "Unchanged{Here,Old}(qbit, 2)",
        [r"qbit[|0>] == \old(qbit[|0>])",
         r"qbit[|1>] == \old(qbit[|1>])"],
        scope(W1))


def test_reverse_expansion_golden():
    assert_expansion_matches(
        "Reverse{Here,Old}(qbit, 2)",
        [r"qbit[|0>] == \old(qbit[|1>])",
         r"qbit[|1>] == \old(qbit[|0>])"],
        scope(W1))


def test_equalranges_expansion_golden():
    assert_expansion_matches(
        "EqualRanges{Here,Old}(qbit1, 2, qbit2)",
        [r"qbit1[|0>] == \old(qbit2[|0>])",
         r"qbit1[|1>] == \old(qbit2[|1>])"],
        scope(W1))


def test_equalranges_reversed_epochs_flip_sides():
    # {Old,Here}(x, 2, y) states old(x) == here(y); normalized with the
    # current-state accessor on the left.
    assert_expansion_matches(
        "EqualRanges{Old,Here}(qbit1, 2, qbit2)",
        [r"qbit2[|0>] == \old(qbit1[|0>])",
         r"qbit2[|1>] == \old(qbit1[|1>])"],
        scope(W1))


def test_hadamardcheck_expansion_golden():
    assert_expansion_matches(
        "HadamardCheck{Here,Old}(qbit, 2)",
        [r"qbit[|0>] == (\old(qbit[|0>]) + \old(qbit[|1>]))*sqrt(1/2)",
         r"qbit[|1>] == (\old(qbit[|0>]) - \old(qbit[|1>]))*sqrt(1/2)"],
        scope(W1))


def test_phasecheck_expansion_golden():
    assert_expansion_matches(
        "PhaseCheck{Here,Old}(qbit, 2)",
        [r"qbit[|0>] == \old(qbit[|0>])",
         r"qbit[|1>] == \old(qbit[|1>]) * e^(i*angle)"],
        scope(W1, classicals={"angle"}))


def test_phasecheck_rx_expansion_golden():
    assert_expansion_matches(
        "PhaseCheck_Rx{Here,Old}(qbit[0], 2)",
        [r"qbit[0][|0>] == \old(qbit[0][|0>])*cos(angle/2) - "
         r"\old(qbit[0][|1>])*isin(angle/2)",
         r"qbit[0][|1>] == \old(qbit[0][|1>])*cos(angle/2) - "
         r"\old(qbit[0][|0>])*isin(angle/2)"],
        scope(W1, classicals={"angle"}))


def test_qbitselfcheck_is_probability_normalization():
    result = expand_predicate(pred("qbitselfCheck(qbit)"), scope(W1))
    expect = _resolve_shorthand(
        parse_spec_expr("pow(qbit[|0>],2) + pow(qbit[|1>],2) == 1"))
    assert result == expect


def test_qbitselfcheck_whole_register_expands_per_qubit():
    result = expand_predicate(pred("qbitselfCheck(qs)"), scope({"qs": 3}))
    # conjunction of three normalization equations
    count = 0
    stack = [result]
    while stack:
        e = stack.pop()
        if isinstance(e, BinOp) and e.op == "&&":
            stack.extend([e.lhs, e.rhs])
        else:
            count += 1
    assert count == 3


def test_phasecheck_without_angle_parameter_fails():
    with pytest.raises(ExpansionError, match="angle"):
        expand_predicate(pred("PhaseCheck{Here,Old}(qbit, 2)"), scope(W1))


def test_unknown_predicate_rejected():
    with pytest.raises(ExpansionError, match="unknown predicate"):
        expand_predicate(pred("PhaseCheck_Rx_input{Here,Old}(qbit, 2)"), scope(W1))


def test_arity_mismatch_rejected():
    with pytest.raises(ExpansionError, match="argument"):
        expand_predicate(pred("Reverse{Here,Old}(qbit)"), scope(W1))


def test_length_argument_must_be_two():
    with pytest.raises(ExpansionError, match="must be 2"):
        expand_predicate(pred("Reverse{Here,Old}(qbit, 3)"), scope(W1))


def test_symbolic_width_defers_to_runtime():
    with pytest.raises(NeedsRuntime):
        expand_predicate(pred("qbitselfCheck(qs)"), scope({"qs": "width"}))


def test_expansions_are_fully_primitive():
    # no predicate calls survive expansion (idempotence of expansion)
    for text, sc in [
        ("Unchanged{Here,Old}(qbit, 2)", scope(W1)),
        ("Reverse{Here,Old}(qbit, 2)", scope(W1)),
        ("HadamardCheck{Here,Old}(qbit, 2)", scope(W1)),
        ("PhaseCheck{Here,Old}(qbit, 2)", scope(W1, classicals={"angle"})),
    ]:
        result = expand_predicate(pred(text), sc)
        for eq in result.equations:
            stack = [eq.lhs, eq.rhs]
            while stack:
                e = stack.pop()
                assert not isinstance(e, PredCall)
                for attr in ("lhs", "rhs", "operand", "exponent"):
                    if hasattr(e, attr):
                        stack.append(getattr(e, attr))
                if hasattr(e, "args"):
                    stack.extend(e.args)


# -- user-defined predicates ---------------------------------------------------

QFTCHECK_TEXT = """
  module QFTCheck(qbits[], width, M_PI) {
  int r = M_PI/pi;
  for ( int s = width-1; s >= 0; s-- ) {
  if ( power(2,s) <= M_PI/pi )
  {
  //ensures qbits[s][|1>] == 1;
  //ensures qbits[s][|0>] == 0;
  r = r - power(2,s);
  }
  else
  {
  //ensures qbits[s][|0>] == 1;
  //ensures qbits[s][|1>] == 0;
  }
  }
  }
"""


def qftcheck_def():
    contract = parse_contract_text(QFTCHECK_TEXT, 0)
    assert len(contract.predicate_defs) == 1
    return contract.predicate_defs[0]


def qftcheck_oracle(width, m_pi):
    """Direct transcription of the loop, independent of the interpreter:
    yields (qubit index, basis bit, value) per emitted equation."""
    out = []
    r = int(m_pi / math.pi)
    for s in range(width - 1, -1, -1):
        if 2 ** s <= m_pi / math.pi:
            out.append((s, 1, 1.0))
            out.append((s, 0, 0.0))
            r = r - 2 ** s
        else:
            out.append((s, 0, 1.0))
            out.append((s, 1, 0.0))
    return out


def run_qftcheck(width, m_pi):
    eqs = interpret_spec_predicate(qftcheck_def(), {"qbits": RegRef(name="q")},
                                   {"width": width, "M_PI": m_pi})
    got = []
    for eq in eqs.equations:
        assert eq.lhs.qubit.reg.name == "q"
        assert isinstance(eq.rhs, Num)
        got.append((int(eq.lhs.qubit.index.value), eq.lhs.basis.value,
                    float(eq.rhs.value)))
    return got


def test_qftcheck_width2_pi():
    # hand trace: s=1: 2 > 1 -> qubit 1 stays |0>; s=0: 1 <= 1 -> qubit 0 is |1>
    got = run_qftcheck(2, math.pi)
    assert got == [(1, 0, 1.0), (1, 1, 0.0), (0, 1, 1.0), (0, 0, 0.0)]
    assert got == qftcheck_oracle(2, math.pi)


def test_qftcheck_width1_zero_angle():
    got = run_qftcheck(1, 0.0)
    assert got == [(0, 0, 1.0), (0, 1, 0.0)]
    assert got == qftcheck_oracle(1, 0.0)


@settings(max_examples=60, deadline=None)
@given(width=st.integers(min_value=1, max_value=6), data=st.data())
def test_qftcheck_emits_two_equations_per_qubit(width, data):
    k = data.draw(st.integers(min_value=0, max_value=2 ** width - 1))
    got = run_qftcheck(width, k * math.pi)
    assert len(got) == 2 * width
    assert got == qftcheck_oracle(width, k * math.pi)
    # every qubit gets exactly one |0> and one |1> constraint
    for s in range(width):
        assert sorted(b for (q, b, _v) in got if q == s) == [0, 1]


def test_unbound_variable_in_body_fails():
    text = """
      module Bad(qs[], width) {
      for ( int s = bound-1; s >= 0; s-- ) {
      //ensures qs[s][|0>] == 1;
      }
      }
    """
    contract = parse_contract_text(text, 0)
    with pytest.raises(ExpansionError, match="unbound variable 'bound'"):
        interpret_spec_predicate(contract.predicate_defs[0],
                                 {"qs": RegRef(name="q")}, {"width": 2})


def test_duplicate_lhs_emission_fails():
    text = """
      module Dup(qs[]) {
      //ensures qs[0][|0>] == 1;
      //ensures qs[0][|0>] == 0;
      }
    """
    contract = parse_contract_text(text, 0)
    with pytest.raises(ExpansionError, match="same amplitude"):
        interpret_spec_predicate(contract.predicate_defs[0],
                                 {"qs": RegRef(name="q")}, {})


def test_nonterminating_loop_hits_limit():
    text = """
      module Spin(qs[]) {
      for ( int s = 0; s >= 0; s++ ) {
      r = 0;
      }
      }
    """
    contract = parse_contract_text(text, 0)
    with pytest.raises(ExpansionError):
        interpret_spec_predicate(contract.predicate_defs[0],
                                 {"qs": RegRef(name="q")}, {})


# -- contract normalization ------------------------------------------------------

PAULI_X_CONTRACT = r"""
  requires valid: \valid(input[0]+(|0>..|1>));
  assigns input[0][|0>..|1>];
  ensures reverse_input: Reverse{Here,Old}(input[0], 2);
  ensures qbitself_input[0]: qbitselfCheck(input[0]);
"""

BELL_CONTRACT = r"""
  requires valid: \valid(a[0]+(|0>..|1>));
  requires valid: \valid(b[0]+(|0>..|1>));
  assigns a[0][|0>..|1>];
  assigns b[0][|0>..|1>];
  ensures \old(a[0][|0>]) == 1;
  ensures \old(a[0][|1>]) == 0;
  ensures \old(b[0][|0>]) == 1;
  ensures \old(b[0][|1>]) == 0;
  ensures a[0][|0>] == sqrt(1/2);
  ensures a[0][|1>] == sqrt(1/2);
  ensures b[0][|0>] == sqrt(1/2);
  ensures b[0][|1>] == sqrt(1/2);
  behavior CNOTfalse:
      assumes measZ(a[0]) == 0;
      ensures measZ(b[0]) == 0;
  behavior CNOTtrue:
      assumes measZ(a[0]) == 1;
      ensures measZ(b[0]) == 1;
  complete behaviors;
  disjoint behaviors;
  ensures qbitself_a[0]: qbitselfCheck(a[0]);
  ensures qbitself_b[0]: qbitselfCheck(b[0]);
"""


def test_normalize_pauli_x_contract():
    contract = parse_contract_text(PAULI_X_CONTRACT, 0)
    norm = normalize_contract(contract, scope({"input": 1}))
    kinds = [c.kind for c in norm.ensures]
    assert kinds == ["equations", "expr"]
    assert norm.ensures[0].equations.source_name == "Reverse"
    assert [c.label for c in norm.ensures] == ["reverse_input", "qbitself_input[0]"]


def test_normalize_bell_contract():
    contract = parse_contract_text(BELL_CONTRACT, 0)
    norm = normalize_contract(contract, scope({"a": 1, "b": 1}))
    kinds = [c.kind for c in norm.ensures]
    assert kinds.count("snapshot") == 4
    assert kinds.count("expr") == 4 + 2  # amplitude equalities + qbitself
    assert len(norm.behaviors) == 2
    assert norm.complete and norm.disjoint
    assert norm.behaviors[0].name == "CNOTfalse"


def test_normalize_empty_contract_is_identity():
    contract = parse_contract_text("", 0)
    norm = normalize_contract(contract, scope({}))
    assert norm.ensures == () and norm.behaviors == ()
    assert norm.assigns is None
