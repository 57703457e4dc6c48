"""Lexer, parser, annotation binding, linting, and print round-trips."""
import pytest

from scaffcheck.diagnostics import LexError, ParseError, Severity
from scaffcheck.frontend import load_program, load_program_checked
from scaffcheck.frontend.annotations import (
    parse_annotation, parse_contract_text, parse_spec_expr,
)
from scaffcheck.frontend.ast_nodes import AssertPoint, CallStmt, QuantumIf
from scaffcheck.frontend.lexer import TokKind, tokenize_program
from scaffcheck.frontend.linting import lint
from scaffcheck.frontend.printer import print_program
from scaffcheck.source import SourceFile
from scaffcheck.spec_ast import (
    Amp, Basis, BinOp, Call, MeasZ, Num, Old, PredCall, Valid, Var,
)


def load(text, path="test.scaffold"):
    return load_program(SourceFile(path=path, content=text))


# -- lexer ---------------------------------------------------------------------

def test_tokenize_qreg_declaration():
    toks = tokenize_program("qreg q[2];")
    kinds = [(t.kind, t.lexeme) for t in toks[:-1]]
    assert kinds == [
        (TokKind.IDENT, "qreg"), (TokKind.IDENT, "q"), (TokKind.LBRACK, "["),
        (TokKind.INT, "2"), (TokKind.RBRACK, "]"), (TokKind.SEMI, ";"),
    ]
    assert toks[0].is_keyword
    assert toks[-1].kind is TokKind.EOF


def test_tokenize_line_annotation_single_token():
    toks = tokenize_program("//@ assert a[0][|0>] == sqrt(1/2);\n")
    assert toks[0].kind is TokKind.ANNOTATION
    inner, _off = toks[0].value
    assert inner.strip() == "assert a[0][|0>] == sqrt(1/2);"
    assert toks[1].kind is TokKind.EOF


def test_tokenize_block_annotation_single_token():
    toks = tokenize_program("/*@ requires valid: x; */ gate G();")
    assert toks[0].kind is TokKind.ANNOTATION
    inner, off = toks[0].value
    assert "requires valid: x;" in inner
    assert off == 3  # after the /*@ opener


def test_unterminated_block_comment_is_lexical_error():
    with pytest.raises(LexError):
        tokenize_program("/*@ requires")
    with pytest.raises(LexError):
        tokenize_program("/* plain comment")


def test_ordinary_comments_are_trivia():
    toks = tokenize_program("// hello\n/* block */ qreg q[1];")
    assert toks[0].lexeme == "qreg"


def test_lexeme_offsets_reconstruct_content():
    content = ("/*@ ensures x == 1; */\n"
                "gate G(qreg x[1]); // trailing\n"
                "module M(qreg q[2]) { G(q[0]); }\n")
    toks = tokenize_program(content)
    pos = 0
    for tok in toks:
        if tok.kind is TokKind.EOF:
            break
        gap = content[pos:tok.span.start]
        # the skipped region is whitespace or comments only
        assert gap.strip() == "" or gap.strip().startswith("//") or \
            gap.strip().startswith("/*")
        assert content[tok.span.start:tok.span.end] == tok.lexeme
        pos = tok.span.end
    assert content[pos:].strip() == "" or content[pos:].strip().startswith("//")


# -- program parser -------------------------------------------------------------

def test_parse_bell_module(tmp_path):
    program = load("""
/*@
  ensures qbitself_a[0]: qbitselfCheck(a[0]);
*/
module PrepareBellPair(qreg a[1], qreg b[1]) {
      H(a[0]);
      CNOT(a[0],b[0]);
}
""")
    assert [m.name for m in program.ast.modules] == ["PrepareBellPair"]
    mod = program.ast.modules[0]
    assert mod.contract is not None
    calls = [s for s in mod.body if isinstance(s, CallStmt)]
    assert [c.name for c in calls] == ["H", "CNOT"]


def test_parse_empty_file():
    program = load("")
    assert program.ast.gates == () and program.ast.modules == ()


def test_parse_qstruct_and_member_access():
    program = load("""
qstruct struct1 {
  qreg first[10];
  qreg second[10];
};

module M() {
  struct1 qst;
  X(qst.second[0]);
}
""")
    struct = program.ast.struct("struct1")
    assert struct.fields == (("first", 10), ("second", 10))
    assert lint(program) == []
    # the flattened layout places `second` after the 10 qubits of `first`
    from scaffcheck.runner import build_layout
    layout, bindings = build_layout(program, program.ast.module("M"), {})
    assert bindings.structs["qst"]["second"][0] == 10


def test_unsupported_construct_named():
    with pytest.raises(ParseError, match="outside supported subset"):
        load("int *p;")
    with pytest.raises(ParseError, match="while"):
        load("module M(qreg q[1]) { while (1) { X(q[0]); } }")


def test_syntax_error_has_expected_token():
    with pytest.raises(ParseError, match="expected"):
        load("gate G(qreg q[1])")  # missing semicolon


# -- annotation grammar -----------------------------------------------------------

def test_parse_pauli_x_annotation():
    contract = parse_annotation(r"""
  requires valid: \valid(input[0]+(|0>..|1>));
  assigns input[0][|0>..|1>];
  ensures reverse_input: Reverse{Here,Old}(input[0], 2);
  ensures qbitself_input[0]: qbitselfCheck(input[0]);
""", 0, "gate")
    assert len(contract.requires) == 1
    assert contract.requires[0].label == "valid"
    assert isinstance(contract.requires[0].expr, Valid)
    assert contract.assigns is not None and len(contract.assigns) == 1
    labels = [c.label for c in contract.ensures]
    assert labels == ["reverse_input", "qbitself_input[0]"]
    assert isinstance(contract.ensures[0].expr, PredCall)


def test_parse_statement_assertions():
    exprs = parse_annotation("assert P; assert R;", 0, "statement")
    assert len(exprs) == 2
    assert exprs == [Var(name="P"), Var(name="R")]


def test_parse_cnot_behaviors_and_flags():
    contract = parse_annotation("""
  behavior false:
  assumes measZ(control[0]) == 0;
  ensures equal_target[0]: Unchanged{Here,Old}(target[0],2);
  behavior true:
  assumes measZ(control[0]) == 1;
  ensures reverse_target[0]: Reverse{Here,Old}(target[0],2);
  complete behaviors;
  disjoint behaviors;
""", 0, "gate")
    assert [b.name for b in contract.behaviors] == ["false", "true"]
    assert contract.complete and contract.disjoint
    assume = contract.behaviors[0].assumes[0]
    assert isinstance(assume, BinOp) and isinstance(assume.lhs, MeasZ)


def test_unknown_clause_keyword_rejected():
    with pytest.raises(ParseError, match="unknown clause keyword"):
        parse_annotation("guarantees x == 1;", 0, "module")


def test_behavior_without_name_rejected():
    with pytest.raises(ParseError, match="missing a name"):
        parse_annotation("behavior : assumes measZ(q[0]) == 0;", 0, "module")


def test_assert_in_contract_position_rejected():
    with pytest.raises(ParseError, match="statement annotation"):
        parse_annotation("assert x == 1;", 0, "module")


def test_explanatory_comment_lines_ignored():
    contract = parse_annotation("""
  ensures equal_qbit: Unchanged{Here,Old}(qbit, 2);
  //ensures qbit[|0>] == \\old(qbit[|0>]);
  //ensures qbit[|1>] == \\old(qbit[|1>]);
""", 0, "gate")
    assert len(contract.ensures) == 1


def test_amplitude_shorthand_and_indexed_accessors():
    expr = parse_spec_expr("qbit[|0>]")
    assert isinstance(expr, Amp) and expr.qubit.index is None
    expr = parse_spec_expr("a[0][|1>]")
    assert isinstance(expr, Amp) and expr.basis is Basis.ONE
    assert expr.qubit.index == Num(0)


def test_exp_i_angle_parses():
    expr = parse_spec_expr(r"\old(q[0][|1>]) * e^(i*angle)")
    assert isinstance(expr, BinOp) and expr.op == "*"
    assert isinstance(expr.lhs, Old)


# -- attachment -------------------------------------------------------------------

def test_hadamard_parameter_mismatch_flagged():
    program = load("""
/*@
  ensures Hadamard_input[0]: HadamardCheck{Here,Old}(input[0], 2);
*/
gate H(qreg t[1]);
""")
    diags = lint(program)
    assert any("unknown identifier 'input'" in d.message for d in diags)
    assert all(d.severity is Severity.ERROR for d in diags)


def test_module_without_annotation_has_no_contract():
    program = load("module M(qreg q[1]) { X(q[0]); }")
    assert program.ast.modules[0].contract is None
    assert lint(program) == []


def test_annotation_attaches_to_following_module():
    program = load("""
module First(qreg q[1]) { X(q[0]); }

/*@
  ensures qbitself_q[0]: qbitselfCheck(q[0]);
*/
module Second(qreg q[1]) { H(q[0]); }
""")
    assert program.ast.module("First").contract is None
    second = program.ast.module("Second")
    assert second.contract is not None
    assert second.contract.ensures[0].label == "qbitself_q[0]"


def test_quantum_conditional_classified():
    program = load("""
module U(qreg t[1]);
module M(qreg t[1], qreg c[1]) {
  if (c[0]==1) { U(t); }
}
""")
    body = program.ast.module("M").body
    assert isinstance(body[0], QuantumIf)


def test_classical_conditional_stays_classical():
    program = load("""
module M(qreg q[1], int n) {
  if (n == 1) { X(q[0]); }
}
""")
    from scaffcheck.frontend.ast_nodes import IfStmt
    assert isinstance(program.ast.module("M").body[0], IfStmt)


# -- lint ---------------------------------------------------------------------------

def test_index_out_of_range():
    program = load("""
/*@
  ensures q[1][|0>] == 1;
*/
gate G(qreg q[1]);
""")
    diags = lint(program)
    assert any("index 1 out of range for q[1]" in d.message for d in diags)


def test_cnot_spec_lints_clean():
    program = load_program(SourceFile.from_path("corpus/verbatim/cnot_gate.scaffold"))
    assert lint(program) == []


def test_control_qubit_reuse_flagged():
    program = load("""
module U(qreg t[1]);
module M(qreg t[1], qreg c[1]) {
  if (c[0]==1) { U(t); }
  X(c[0]);
}
""")
    diags = lint(program)
    assert any("cannot be reused" in d.message for d in diags)


def test_branch_using_control_qubit_flagged():
    program = load("""
module U(qreg t[1]);
module M(qreg c[1]) {
  if (c[0]==1) { U(c); }
}
""")
    diags = lint(program)
    assert any("uses control qubit" in d.message for d in diags)


def test_behaviors_without_flags_warn():
    program = load("""
/*@
  behavior b:
  assumes measZ(q[0]) == 0;
  ensures measZ(q[0]) == 0;
*/
gate G(qreg q[1]);
""")
    diags = lint(program)
    assert any(d.severity is Severity.WARNING and "behaviors" in d.message
               for d in diags)


def test_old_outside_postcondition_flagged():
    program = load(r"""
/*@
  requires bad: \old(q[0][|0>]) == 1;
*/
gate G(qreg q[1]);
""")
    diags = lint(program)
    assert any("\\old" in d.message for d in diags)


def test_assigns_unknown_register_flagged():
    program = load("""
/*@
  assigns nosuch[0][|0>..|1>];
*/
gate G(qreg q[1]);
""")
    diags = lint(program)
    assert any("unknown identifier 'nosuch'" in d.message for d in diags)


def test_width_must_be_positive():
    program = load("gate G(qreg q[0]);")
    diags = lint(program)
    assert any("must be positive" in d.message for d in diags)


def test_determinism_same_bytes_same_results():
    text = SourceFile.from_path("corpus/verbatim/qft.scaffold").content
    runs = []
    for _ in range(2):
        program, diags = load_program_checked(
            SourceFile(path="qft.scaffold", content=text))
        diags = diags + lint(program)
        runs.append((program.ast, [d.render() for d in diags]))
    assert runs[0][0] == runs[1][0]
    assert runs[0][1] == runs[1][1]


# -- print round-trip ---------------------------------------------------------------

CORPUS = [
    "corpus/verbatim/predefined_modules.scaffold",
    "corpus/verbatim/assertion_example.scaffold",
    "corpus/verbatim/pauli_x_gate.scaffold",
    "corpus/verbatim/hadamard_gate.scaffold",
    "corpus/verbatim/cnot_gate.scaffold",
    "corpus/verbatim/toffoli_gate.scaffold",
    "corpus/verbatim/rx_gate.scaffold",
    "corpus/verbatim/phase_gate.scaffold",
    "corpus/verbatim/swap_gate.scaffold",
    "corpus/verbatim/bell_state.scaffold",
    "corpus/verbatim/qft.scaffold",
    "corpus/verbatim/control_program.scaffold",
    "corpus/corrected/hadamard_gate.scaffold",
    "corpus/corrected/rx_gate.scaffold",
    "corpus/corrected/swap_gate.scaffold",
    "corpus/corrected/bell_state.scaffold",
    "corpus/corrected/qft.scaffold",
]


@pytest.mark.parametrize("path", CORPUS)
def test_print_reparse_roundtrip(path):
    original = load_program(SourceFile.from_path(path))
    printed = print_program(original)
    reparsed = load_program(SourceFile(path=path, content=printed))
    assert original.ast == reparsed.ast
    # printing is deterministic and stable under a second round
    assert print_program(reparsed) == printed
