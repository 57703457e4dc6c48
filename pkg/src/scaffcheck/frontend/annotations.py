"""Recursive-descent parser for ScaffML annotation text.

Entry points: parse_contract for module/gate annotations, parse_assertions
for statement-level `//@ assert ...;` annotations. Bare `//...` comment
lines inside a block are explanatory and ignored, except `//ensures` lines
inside a user-defined predicate body, which are equation-emission points.
"""
from __future__ import annotations

from ..diagnostics import ParseError
from ..source import Span
from ..spec_ast import (
    Amp, AssignsTarget, Basis, Behavior, BinOp, Call, Clause, Contract, Epoch,
    ExpI, Expr, Imag, MeasZ, Num, Old, PredCall, QubitRef, RefExpr, RegRef,
    SpecAssign, SpecEmit, SpecFor, SpecIf, SpecParam, SpecPredicateDef,
    SpecStmt, SpecVarDecl, UnOp, Valid, Var,
)
from .lexer import TokKind, Token, tokenize_spec

_CLAUSE_WORDS = {"requires", "ensures", "assigns", "assumes", "behavior",
                 "complete", "disjoint", "assert", "module"}

_FUNCS = {"sqrt", "pow", "power", "cos", "sin", "isin", "length", "exp"}


class _SpecParser:
    def __init__(self, text: str, base_offset: int):
        self.toks = [t for t in tokenize_spec(text, base_offset)]
        self.i = 0

    # -- token helpers -------------------------------------------------
    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.toks) - 1)
        return self.toks[j]

    def at_end(self) -> bool:
        return self.peek().kind is TokKind.EOF

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind is not TokKind.EOF:
            self.i += 1
        return tok

    def expect(self, kind: TokKind, what: str) -> Token:
        tok = self.peek()
        if tok.kind is not kind:
            raise ParseError(f"expected {what}, found {tok.lexeme!r}", tok.span)
        return self.advance()

    def accept(self, kind: TokKind) -> Token | None:
        if self.peek().kind is kind:
            return self.advance()
        return None

    def skip_emit_lines(self):
        while self.peek().kind is TokKind.EMIT_LINE:
            self.advance()

    # -- contract grammar ----------------------------------------------
    def parse_contract(self) -> Contract:
        requires: list[Clause] = []
        assigns: list[AssignsTarget] | None = None
        ensures: list[Clause] = []
        behaviors: list[Behavior] = []
        predicate_defs: list[SpecPredicateDef] = []
        complete = disjoint = False
        current_behavior: dict | None = None
        start = self.peek().span

        def close_behavior():
            nonlocal current_behavior
            if current_behavior is not None:
                behaviors.append(Behavior(
                    name=current_behavior["name"],
                    assumes=tuple(current_behavior["assumes"]),
                    ensures=tuple(current_behavior["ensures"]),
                    span=current_behavior["span"]))
                current_behavior = None

        while not self.at_end():
            self.skip_emit_lines()
            if self.at_end():
                break
            tok = self.peek()
            if tok.kind is not TokKind.IDENT:
                raise ParseError(f"expected a clause keyword, found {tok.lexeme!r}", tok.span)
            word = tok.lexeme
            if word == "requires":
                close_behavior()
                self.advance()
                requires.append(self._clause())
            elif word == "assigns":
                close_behavior()
                self.advance()
                if assigns is None:
                    assigns = []
                assigns.extend(self._assigns_targets())
            elif word == "ensures":
                self.advance()
                clause = self._clause()
                if current_behavior is not None:
                    current_behavior["ensures"].append(clause)
                else:
                    ensures.append(clause)
            elif word == "assumes":
                self.advance()
                if current_behavior is None:
                    raise ParseError("'assumes' outside a behavior", tok.span)
                current_behavior["assumes"].append(self._expr())
                self.expect(TokKind.SEMI, "';'")
            elif word == "behavior":
                close_behavior()
                self.advance()
                name_tok = self.peek()
                if name_tok.kind is not TokKind.IDENT:
                    raise ParseError("behavior block missing a name", name_tok.span)
                self.advance()
                self.expect(TokKind.COLON, "':' after behavior name")
                current_behavior = {"name": name_tok.lexeme, "assumes": [],
                                    "ensures": [], "span": name_tok.span}
            elif word in ("complete", "disjoint"):
                close_behavior()
                self.advance()
                kw = self.peek()
                if not kw.is_kw("behaviors"):
                    raise ParseError(f"expected 'behaviors' after '{word}'", kw.span)
                self.advance()
                self.expect(TokKind.SEMI, "';'")
                if word == "complete":
                    complete = True
                else:
                    disjoint = True
            elif word == "module":
                close_behavior()
                predicate_defs.append(self._spec_predicate_def())
            elif word == "assert":
                raise ParseError("'assert' is a statement annotation, not a "
                                 "module contract clause", tok.span)
            else:
                raise ParseError(f"unknown clause keyword '{word}'", tok.span)
        close_behavior()
        return Contract(requires=tuple(requires),
                        assigns=None if assigns is None else tuple(assigns),
                        ensures=tuple(ensures), behaviors=tuple(behaviors),
                        complete=complete, disjoint=disjoint,
                        predicate_defs=tuple(predicate_defs), span=start)

    def parse_assertions(self) -> list[Expr]:
        exprs: list[Expr] = []
        while not self.at_end():
            tok = self.peek()
            if not tok.is_kw("assert"):
                raise ParseError(f"expected 'assert', found {tok.lexeme!r}", tok.span)
            self.advance()
            exprs.append(self._expr())
            self.expect(TokKind.SEMI, "';'")
        if not exprs:
            raise ParseError("empty assertion annotation", self.peek().span)
        return exprs

    def _clause(self) -> Clause:
        label, span = self._try_label()
        expr = self._expr()
        self.expect(TokKind.SEMI, "';'")
        return Clause(label=label, expr=expr, span=span or expr.span)

    def _try_label(self) -> tuple[str | None, Span | None]:
        """Clause labels: IDENT optionally suffixed `[<int>]` or `[]`, then ':'."""
        if self.peek().kind is not TokKind.IDENT:
            return None, None
        mark = self.i
        name_tok = self.advance()
        label = name_tok.lexeme
        if self.peek().kind is TokKind.LBRACK:
            nxt = self.peek(1)
            if nxt.kind is TokKind.RBRACK:
                self.advance(); self.advance()
                label += "[]"
            elif nxt.kind is TokKind.INT and self.peek(2).kind is TokKind.RBRACK:
                self.advance()
                label += f"[{self.advance().lexeme}]"
                self.advance()
        if self.peek().kind is TokKind.COLON:
            self.advance()
            return label, name_tok.span
        self.i = mark
        return None, None

    # -- assigns --------------------------------------------------------
    def _assigns_targets(self) -> list[AssignsTarget]:
        targets: list[AssignsTarget] = []
        if self.peek().kind is TokKind.BACKSLASH_KW and self.peek().value == "nothing":
            tok = self.advance()
            self.expect(TokKind.SEMI, "';'")
            return [AssignsTarget(qubit=None, span=tok.span)]
        while True:
            ref = self._qubit_ref()
            # trailing amplitude range `[|0>..|1>]` is part of the location syntax
            if self.peek().kind is TokKind.LBRACK and self.peek(1).kind in (TokKind.KET0, TokKind.KET1):
                self.advance()
                self.expect(TokKind.KET0, "'|0>'")
                self.expect(TokKind.DOTDOT, "'..'")
                self.expect(TokKind.KET1, "'|1>'")
                self.expect(TokKind.RBRACK, "']'")
            targets.append(AssignsTarget(qubit=ref, span=ref.span))
            if not self.accept(TokKind.COMMA):
                break
        self.expect(TokKind.SEMI, "';'")
        return targets

    # -- user-defined spec predicates ------------------------------------
    def _spec_predicate_def(self) -> SpecPredicateDef:
        start = self.expect(TokKind.IDENT, "'module'")  # the word "module"
        name = self.expect(TokKind.IDENT, "predicate name")
        self.expect(TokKind.LPAREN, "'('")
        params: list[SpecParam] = []
        if self.peek().kind is not TokKind.RPAREN:
            while True:
                p = self.expect(TokKind.IDENT, "parameter name")
                is_array = False
                if self.accept(TokKind.LBRACK):
                    self.expect(TokKind.RBRACK, "']'")
                    is_array = True
                params.append(SpecParam(name=p.lexeme, is_array=is_array, span=p.span))
                if not self.accept(TokKind.COMMA):
                    break
        self.expect(TokKind.RPAREN, "')'")
        self.expect(TokKind.LBRACE, "'{'")
        body = self._spec_block_rest()
        return SpecPredicateDef(name=name.lexeme, params=tuple(params),
                                body=tuple(body), span=start.span.merge(name.span))

    def _spec_block_rest(self) -> list[SpecStmt]:
        stmts: list[SpecStmt] = []
        while self.peek().kind is not TokKind.RBRACE:
            if self.at_end():
                raise ParseError("unterminated predicate body", self.peek().span)
            stmts.append(self._spec_stmt())
        self.advance()  # consume '}'
        return stmts

    def _spec_body(self) -> list[SpecStmt]:
        if self.accept(TokKind.LBRACE):
            return self._spec_block_rest()
        return [self._spec_stmt()]

    def _spec_stmt(self) -> SpecStmt:
        tok = self.peek()
        if tok.kind is TokKind.EMIT_LINE:
            self.advance()
            inner, inner_off = tok.value
            expr = parse_spec_expr(inner.rstrip().rstrip(";"), inner_off)
            return SpecEmit(expr=expr, span=tok.span)
        if tok.is_kw("int") or tok.is_kw("float"):
            self.advance()
            name = self.expect(TokKind.IDENT, "variable name")
            init = None
            if self.accept(TokKind.ASSIGN):
                init = self._expr()
            self.expect(TokKind.SEMI, "';'")
            return SpecVarDecl(name=name.lexeme, init=init, span=tok.span)
        if tok.is_kw("for"):
            self.advance()
            self.expect(TokKind.LPAREN, "'('")
            init = self._spec_for_init()
            cond = self._expr()
            self.expect(TokKind.SEMI, "';'")
            step = self._spec_step()
            self.expect(TokKind.RPAREN, "')'")
            body = self._spec_body()
            return SpecFor(init=init, cond=cond, step=step, body=tuple(body), span=tok.span)
        if tok.is_kw("if"):
            self.advance()
            self.expect(TokKind.LPAREN, "'('")
            cond = self._expr()
            self.expect(TokKind.RPAREN, "')'")
            then_body = self._spec_body()
            else_body: list[SpecStmt] = []
            if self.peek().is_kw("else"):
                self.advance()
                else_body = self._spec_body()
            return SpecIf(cond=cond, then_body=tuple(then_body),
                          else_body=tuple(else_body), span=tok.span)
        if tok.kind is TokKind.IDENT and tok.lexeme not in _CLAUSE_WORDS:
            name = self.advance()
            op_tok = self.peek()
            if op_tok.kind in (TokKind.ASSIGN, TokKind.PLUSEQ, TokKind.MINUSEQ):
                self.advance()
                expr = self._expr()
                self.expect(TokKind.SEMI, "';'")
                op = {"=": "=", "+=": "+=", "-=": "-="}[op_tok.lexeme]
                return SpecAssign(name=name.lexeme, expr=expr, op=op, span=name.span)
            raise ParseError(f"expected assignment after '{name.lexeme}'", op_tok.span)
        raise ParseError(f"unsupported statement in predicate body: {tok.lexeme!r}", tok.span)

    def _spec_for_init(self) -> SpecStmt:
        tok = self.peek()
        if tok.is_kw("int"):
            self.advance()
            name = self.expect(TokKind.IDENT, "loop variable")
            self.expect(TokKind.ASSIGN, "'='")
            init = self._expr()
            self.expect(TokKind.SEMI, "';'")
            return SpecVarDecl(name=name.lexeme, init=init, span=tok.span)
        name = self.expect(TokKind.IDENT, "loop variable")
        self.expect(TokKind.ASSIGN, "'='")
        init = self._expr()
        self.expect(TokKind.SEMI, "';'")
        return SpecAssign(name=name.lexeme, expr=init, span=name.span)

    def _spec_step(self) -> SpecStmt:
        name = self.expect(TokKind.IDENT, "loop variable")
        tok = self.peek()
        if tok.kind is TokKind.PLUSPLUS:
            self.advance()
            return SpecAssign(name=name.lexeme, op="+=", expr=Num(1, span=tok.span), span=name.span)
        if tok.kind is TokKind.MINUSMINUS:
            self.advance()
            return SpecAssign(name=name.lexeme, op="-=", expr=Num(1, span=tok.span), span=name.span)
        if tok.kind in (TokKind.ASSIGN, TokKind.PLUSEQ, TokKind.MINUSEQ):
            self.advance()
            expr = self._expr()
            return SpecAssign(name=name.lexeme, op=tok.lexeme, expr=expr, span=name.span)
        raise ParseError("expected loop step", tok.span)

    # -- expressions -----------------------------------------------------
    def _expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        lhs = self._and()
        while self.peek().kind is TokKind.OROR:
            tok = self.advance()
            rhs = self._and()
            lhs = BinOp("||", lhs, rhs, span=tok.span)
        return lhs

    def _and(self) -> Expr:
        lhs = self._cmp()
        while self.peek().kind is TokKind.ANDAND:
            tok = self.advance()
            rhs = self._cmp()
            lhs = BinOp("&&", lhs, rhs, span=tok.span)
        return lhs

    _CMP = {TokKind.EQ: "==", TokKind.NE: "!=", TokKind.LE: "<=",
            TokKind.GE: ">=", TokKind.LT: "<", TokKind.GT: ">"}

    def _cmp(self) -> Expr:
        lhs = self._add()
        if self.peek().kind in self._CMP:
            tok = self.advance()
            rhs = self._add()
            return BinOp(self._CMP[tok.kind], lhs, rhs, span=tok.span)
        return lhs

    def _add(self) -> Expr:
        lhs = self._mul()
        while self.peek().kind in (TokKind.PLUS, TokKind.MINUS):
            tok = self.advance()
            rhs = self._mul()
            lhs = BinOp(tok.lexeme, lhs, rhs, span=tok.span)
        return lhs

    def _mul(self) -> Expr:
        lhs = self._unary()
        while self.peek().kind in (TokKind.STAR, TokKind.SLASH, TokKind.PERCENT):
            tok = self.advance()
            rhs = self._unary()
            lhs = BinOp(tok.lexeme, lhs, rhs, span=tok.span)
        return lhs

    def _unary(self) -> Expr:
        tok = self.peek()
        if tok.kind is TokKind.MINUS:
            self.advance()
            return UnOp("-", self._unary(), span=tok.span)
        if tok.kind is TokKind.BANG:
            self.advance()
            return UnOp("!", self._unary(), span=tok.span)
        return self._primary()

    def _primary(self) -> Expr:
        tok = self.peek()
        if tok.kind in (TokKind.INT, TokKind.FLOAT):
            self.advance()
            return Num(tok.value, span=tok.span)
        if tok.kind is TokKind.LPAREN:
            self.advance()
            inner = self._expr()
            self.expect(TokKind.RPAREN, "')'")
            return inner
        if tok.kind is TokKind.BACKSLASH_KW:
            self.advance()
            if tok.value == "old":
                self.expect(TokKind.LPAREN, "'('")
                inner = self._expr()
                self.expect(TokKind.RPAREN, "')'")
                return Old(inner, span=tok.span)
            if tok.value == "valid":
                self.expect(TokKind.LPAREN, "'('")
                ref = self._qubit_ref()
                self.expect(TokKind.PLUS, "'+'")
                self.expect(TokKind.LPAREN, "'('")
                self.expect(TokKind.KET0, "'|0>'")
                self.expect(TokKind.DOTDOT, "'..'")
                self.expect(TokKind.KET1, "'|1>'")
                self.expect(TokKind.RPAREN, "')'")
                self.expect(TokKind.RPAREN, "')'")
                return Valid(ref, span=tok.span)
            raise ParseError(f"'\\{tok.value}' not allowed here", tok.span)
        if tok.kind is TokKind.IDENT:
            return self._ident_expr()
        raise ParseError(f"unexpected token {tok.lexeme!r} in expression", tok.span)

    def _ident_expr(self) -> Expr:
        tok = self.advance()
        name = tok.lexeme
        if name == "i" and self.peek().kind not in (TokKind.LPAREN, TokKind.LBRACK,
                                                    TokKind.LBRACE, TokKind.DOT):
            return Imag(span=tok.span)
        if name == "e" and self.peek().kind is TokKind.CARET:
            self.advance()
            self.expect(TokKind.LPAREN, "'(' after 'e^'")
            exponent = self._expr()
            self.expect(TokKind.RPAREN, "')'")
            return ExpI(exponent, span=tok.span)
        if name == "measZ":
            self.expect(TokKind.LPAREN, "'('")
            ref = self._qubit_ref()
            self.expect(TokKind.RPAREN, "')'")
            return MeasZ(ref, span=tok.span)
        if self.peek().kind is TokKind.LBRACE:
            # predicate call with explicit epoch pair
            self.advance()
            e1 = self._epoch()
            self.expect(TokKind.COMMA, "','")
            e2 = self._epoch()
            self.expect(TokKind.RBRACE, "'}'")
            self.expect(TokKind.LPAREN, "'('")
            args = self._pred_args()
            return PredCall(name=name, epochs=(e1, e2), args=tuple(args), span=tok.span)
        if self.peek().kind is TokKind.LPAREN:
            self.advance()
            if name in _FUNCS:
                args: list[Expr] = []
                if self.peek().kind is not TokKind.RPAREN:
                    while True:
                        args.append(self._arg_expr())
                        if not self.accept(TokKind.COMMA):
                            break
                self.expect(TokKind.RPAREN, "')'")
                return Call(func=name, args=tuple(args), span=tok.span)
            args = self._pred_args()
            return PredCall(name=name, epochs=None, args=tuple(args), span=tok.span)
        # qubit reference / amplitude accessor / plain variable
        return self._ref_or_var(tok)

    def _arg_expr(self) -> Expr:
        """Function argument: a spec expression; `length(q)` takes a register."""
        return self._expr()

    def _epoch(self) -> Epoch:
        tok = self.expect(TokKind.IDENT, "'Here' or 'Old'")
        if tok.lexeme == "Here":
            return Epoch.HERE
        if tok.lexeme == "Old":
            return Epoch.OLD
        raise ParseError(f"expected 'Here' or 'Old', found {tok.lexeme!r}", tok.span)

    def _pred_args(self) -> list[Expr]:
        """Predicate arguments parse as expressions; register references come
        back as RefExpr/Var and are resolved against the scope later."""
        args: list[Expr] = []
        if self.peek().kind is not TokKind.RPAREN:
            while True:
                args.append(self._expr())
                if not self.accept(TokKind.COMMA):
                    break
        self.expect(TokKind.RPAREN, "')'")
        return args

    def _ref_or_var(self, first: Token) -> Expr:
        """After an identifier token: `.member`? (`[index]`)? (`[|b>]`)? chain."""
        member = None
        if self.peek().kind is TokKind.DOT:
            self.advance()
            member = self.expect(TokKind.IDENT, "struct member name").lexeme
        reg = RegRef(name=first.lexeme, member=member, span=first.span)
        index: Expr | None = None
        explicit = False
        if self.peek().kind is TokKind.LBRACK:
            nxt = self.peek(1)
            if nxt.kind in (TokKind.KET0, TokKind.KET1):
                self.advance()
                basis = Basis.ZERO if self.advance().kind is TokKind.KET0 else Basis.ONE
                self.expect(TokKind.RBRACK, "']'")
                q = QubitRef(reg=reg, index=None, span=first.span)
                return Amp(qubit=q, basis=basis, span=first.span)
            if nxt.kind is TokKind.RBRACK:
                self.advance(); self.advance()
                explicit = True
            else:
                self.advance()
                index = self._expr()
                self.expect(TokKind.RBRACK, "']'")
        if index is not None or explicit:
            if self.peek().kind is TokKind.LBRACK and \
                    self.peek(1).kind in (TokKind.KET0, TokKind.KET1):
                self.advance()
                basis = Basis.ZERO if self.advance().kind is TokKind.KET0 else Basis.ONE
                self.expect(TokKind.RBRACK, "']'")
                q = QubitRef(reg=reg, index=index, explicit_brackets=explicit, span=first.span)
                return Amp(qubit=q, basis=basis, span=first.span)
            return RefExpr(QubitRef(reg=reg, index=index, explicit_brackets=explicit,
                                    span=first.span), span=first.span)
        if member is not None:
            return RefExpr(QubitRef(reg=reg, index=None, span=first.span), span=first.span)
        return Var(name=first.lexeme, span=first.span)

    def _qubit_ref(self) -> QubitRef:
        tok = self.expect(TokKind.IDENT, "register name")
        member = None
        if self.peek().kind is TokKind.DOT:
            self.advance()
            member = self.expect(TokKind.IDENT, "struct member name").lexeme
        reg = RegRef(name=tok.lexeme, member=member, span=tok.span)
        index: Expr | None = None
        hi: Expr | None = None
        explicit = False
        if self.peek().kind is TokKind.LBRACK:
            if self.peek(1).kind is TokKind.RBRACK:
                self.advance(); self.advance()
                explicit = True
            elif self.peek(1).kind in (TokKind.KET0, TokKind.KET1):
                # amplitude accessor, not a plain qubit ref
                raise ParseError("amplitude accessor where a qubit reference "
                                 "was expected", tok.span)
            else:
                self.advance()
                index = self._expr()
                if self.accept(TokKind.DOTDOT):
                    hi = self._expr()
                self.expect(TokKind.RBRACK, "']'")
        return QubitRef(reg=reg, index=index, slice_hi=hi,
                        explicit_brackets=explicit, span=tok.span)


def parse_contract_text(inner: str, base_offset: int) -> Contract:
    return _SpecParser(inner, base_offset).parse_contract()


def parse_assertion_text(inner: str, base_offset: int) -> list[Expr]:
    return _SpecParser(inner, base_offset).parse_assertions()


def parse_spec_expr(text: str, base_offset: int = 0) -> Expr:
    p = _SpecParser(text, base_offset)
    expr = p._expr()
    if not p.at_end():
        raise ParseError(f"trailing input after expression: {p.peek().lexeme!r}",
                         p.peek().span)
    return expr


def parse_annotation(inner: str, base_offset: int, context: str):
    """Parse annotation text; context is 'module', 'gate' or 'statement'."""
    if context == "statement":
        return parse_assertion_text(inner, base_offset)
    return parse_contract_text(inner, base_offset)
