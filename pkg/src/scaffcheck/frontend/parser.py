"""Recursive-descent parser for the Scaffold subset.

Produces a ProgramAst with RawAnnotation markers where annotation tokens
occurred; contract binding and assertion parsing happen in the attachment
pass so that diagnostics can name the declaration each annotation precedes.
"""
from __future__ import annotations

from ..diagnostics import ParseError
from ..source import Span
from ..spec_ast import BinOp, Call, Expr, Num, QubitRef, RefExpr, RegRef, UnOp, Var
from .ast_nodes import (
    Assign, CallArg, CallStmt, ForStmt, GateDecl, IfStmt, IncDec, LocalQreg,
    ModuleDef, Param, ParamKind, ProgramAst, RawAnnotation, ReturnStmt, Stmt,
    StructDef, StructVar, VarDecl,
)
from .lexer import TokKind, Token, tokenize_program

_UNSUPPORTED_HINTS = {
    "*": "pointer syntax",
    "&": "address-of / bitwise operator",
    "switch": "switch statement",
    "while": "while loop",
    "do": "do-while loop",
    "#": "preprocessor directive",
    "char": "character type",
    "double": "double-precision type",
    "cbit": "classical bit registers",
}


class Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if tok.kind is not TokKind.EOF:
            self.i += 1
        return tok

    def expect(self, kind: TokKind, what: str) -> Token:
        tok = self.peek()
        if tok.kind is not kind:
            raise ParseError(f"expected {what}, found {tok.lexeme or '<eof>'!r}", tok.span)
        return self.advance()

    def expect_kw(self, word: str) -> Token:
        tok = self.peek()
        if not tok.is_kw(word):
            raise ParseError(f"expected '{word}', found {tok.lexeme or '<eof>'!r}", tok.span)
        return self.advance()

    def accept(self, kind: TokKind) -> Token | None:
        if self.peek().kind is kind:
            return self.advance()
        return None

    def _unsupported(self, tok: Token):
        hint = _UNSUPPORTED_HINTS.get(tok.lexeme, f"construct {tok.lexeme!r}")
        raise ParseError(f"outside supported subset: {hint}", tok.span)

    # -- top level -------------------------------------------------------
    def parse_program(self) -> ProgramAst:
        gates: list[GateDecl] = []
        modules: list[ModuleDef] = []
        structs: list[StructDef] = []
        order: list[tuple[str, str]] = []
        pending: list[RawAnnotation] = []

        while self.peek().kind is not TokKind.EOF:
            tok = self.peek()
            if tok.kind is TokKind.ANNOTATION:
                self.advance()
                inner, inner_off = tok.value
                pending.append(RawAnnotation(inner=inner, inner_offset=inner_off,
                                             span=tok.span))
                continue
            if tok.is_kw("gate"):
                decl = self._gate_decl(pending)
                pending = []
                gates.append(decl)
                order.append(("gate", decl.name))
                continue
            if tok.is_kw("qstruct"):
                if pending:
                    raise ParseError("annotation cannot attach to a qstruct",
                                     pending[0].span)
                sd = self._struct_def()
                structs.append(sd)
                order.append(("struct", sd.name))
                continue
            if tok.is_kw("module") or (tok.kind is TokKind.IDENT
                                       and tok.lexeme in ("void", "int", "float")
                                       and self.peek(1).is_kw("module")):
                mod = self._module_def(pending)
                pending = []
                modules.append(mod)
                order.append(("module", mod.name))
                continue
            self._unsupported(tok)
        if pending:
            raise ParseError("annotation at end of file attaches to nothing",
                             pending[0].span)
        return ProgramAst(gates=tuple(gates), modules=tuple(modules),
                          structs=tuple(structs), order=tuple(order))

    def _merge_annotations(self, pending: list[RawAnnotation]) -> RawAnnotation | None:
        if not pending:
            return None
        if len(pending) == 1:
            return pending[0]
        # several annotation blocks before one declaration: concatenate
        inner = "\n".join(p.inner for p in pending)
        return RawAnnotation(inner=inner, inner_offset=pending[0].inner_offset,
                             span=pending[0].span.merge(pending[-1].span))

    def _gate_decl(self, pending: list[RawAnnotation]) -> GateDecl:
        start = self.expect_kw("gate")
        name = self.expect(TokKind.IDENT, "gate name")
        params = self._param_list()
        self.expect(TokKind.SEMI, "';' after gate prototype")
        ann = self._merge_annotations(pending)
        return GateDecl(name=name.lexeme, params=params, contract=None,
                        raw_annotation=ann, span=start.span.merge(name.span))

    def _struct_def(self) -> StructDef:
        start = self.expect_kw("qstruct")
        name = self.expect(TokKind.IDENT, "struct name")
        self.expect(TokKind.LBRACE, "'{'")
        fields: list[tuple[str, int]] = []
        while not self.accept(TokKind.RBRACE):
            self.expect_kw("qreg")
            fname = self.expect(TokKind.IDENT, "register name")
            self.expect(TokKind.LBRACK, "'['")
            width = self.expect(TokKind.INT, "register width")
            self.expect(TokKind.RBRACK, "']'")
            self.expect(TokKind.SEMI, "';'")
            fields.append((fname.lexeme, int(width.value)))
        self.accept(TokKind.SEMI)
        return StructDef(name=name.lexeme, fields=tuple(fields),
                         span=start.span.merge(name.span))

    def _module_def(self, pending: list[RawAnnotation]) -> ModuleDef:
        ret_type = None
        tok = self.peek()
        if tok.kind is TokKind.IDENT and tok.lexeme in ("void", "int", "float"):
            ret_type = tok.lexeme
            self.advance()
        start = self.expect_kw("module")
        name = self.expect(TokKind.IDENT, "module name")
        params = self._param_list()
        body: tuple[Stmt, ...] | None = None
        if self.accept(TokKind.SEMI) is None:
            self.expect(TokKind.LBRACE, "'{' or ';'")
            body = tuple(self._stmt_list())
        ann = self._merge_annotations(pending)
        return ModuleDef(name=name.lexeme, params=params, body=body,
                         return_type=ret_type, contract=None, raw_annotation=ann,
                         span=start.span.merge(name.span))

    def _param_list(self) -> tuple[Param, ...]:
        self.expect(TokKind.LPAREN, "'('")
        params: list[Param] = []
        if self.peek().kind is not TokKind.RPAREN:
            while True:
                params.append(self._param())
                if not self.accept(TokKind.COMMA):
                    break
        self.expect(TokKind.RPAREN, "')'")
        return tuple(params)

    def _param(self) -> Param:
        tok = self.peek()
        if tok.is_kw("const"):
            self.advance()
            tok = self.peek()
        if tok.is_kw("qreg") or tok.is_kw("qbit"):
            self.advance()
            name = self.expect(TokKind.IDENT, "parameter name")
            width: int | str | None = None
            if self.accept(TokKind.LBRACK):
                w = self.peek()
                if w.kind is TokKind.INT:
                    self.advance()
                    width = int(w.value)
                elif w.kind is TokKind.IDENT:
                    self.advance()
                    width = w.lexeme
                self.expect(TokKind.RBRACK, "']'")
            return Param(name=name.lexeme, kind=ParamKind.QREG, width=width,
                         span=tok.span.merge(name.span))
        if tok.is_kw("int") or tok.is_kw("float"):
            self.advance()
            name = self.expect(TokKind.IDENT, "parameter name")
            kind = ParamKind.INT if tok.lexeme == "int" else ParamKind.FLOAT
            return Param(name=name.lexeme, kind=kind, span=tok.span.merge(name.span))
        self._unsupported(tok)

    # -- statements --------------------------------------------------------
    def _stmt_list(self) -> list[Stmt]:
        stmts: list[Stmt] = []
        while not self.accept(TokKind.RBRACE):
            if self.peek().kind is TokKind.EOF:
                raise ParseError("unterminated block: missing '}'", self.peek().span)
            stmts.append(self._stmt())
        return stmts

    def _block(self) -> tuple[Stmt, ...]:
        self.expect(TokKind.LBRACE, "'{'")
        return tuple(self._stmt_list())

    def _stmt(self) -> Stmt:
        tok = self.peek()
        if tok.kind is TokKind.ANNOTATION:
            self.advance()
            inner, inner_off = tok.value
            return RawAnnotation(inner=inner, inner_offset=inner_off, span=tok.span)
        if tok.is_kw("qreg"):
            self.advance()
            name = self.expect(TokKind.IDENT, "register name")
            self.expect(TokKind.LBRACK, "'['")
            width = self.expect(TokKind.INT, "register width")
            self.expect(TokKind.RBRACK, "']'")
            self.expect(TokKind.SEMI, "';'")
            return LocalQreg(name=name.lexeme, width=int(width.value), span=tok.span)
        if tok.is_kw("int") or tok.is_kw("float"):
            self.advance()
            name = self.expect(TokKind.IDENT, "variable name")
            init = None
            if self.accept(TokKind.ASSIGN):
                init = self._expr()
            self.expect(TokKind.SEMI, "';'")
            return VarDecl(type_name=tok.lexeme, name=name.lexeme, init=init,
                           span=tok.span)
        if tok.is_kw("for"):
            return self._for_stmt()
        if tok.is_kw("if"):
            return self._if_stmt()
        if tok.is_kw("return"):
            self.advance()
            value = None
            if self.peek().kind is not TokKind.SEMI:
                value = self._expr()
            self.expect(TokKind.SEMI, "';'")
            return ReturnStmt(value=value, span=tok.span)
        if tok.is_kw("else"):
            raise ParseError("'else' without matching 'if'", tok.span)
        if tok.kind is TokKind.IDENT and not tok.is_keyword:
            if self.peek(1).kind is TokKind.IDENT and not self.peek(1).is_keyword \
                    and self.peek(2).kind is TokKind.SEMI:
                type_name = self.advance()
                var_name = self.advance()
                self.advance()
                return StructVar(type_name=type_name.lexeme, name=var_name.lexeme,
                                 span=type_name.span)
            return self._call_or_assign()
        self._unsupported(tok)

    def _for_stmt(self) -> ForStmt:
        start = self.expect_kw("for")
        self.expect(TokKind.LPAREN, "'('")
        init: Stmt
        tok = self.peek()
        if tok.is_kw("int"):
            self.advance()
            name = self.expect(TokKind.IDENT, "loop variable")
            self.expect(TokKind.ASSIGN, "'='")
            init_expr = self._expr()
            init = VarDecl(type_name="int", name=name.lexeme, init=init_expr, span=tok.span)
        else:
            name = self.expect(TokKind.IDENT, "loop variable")
            self.expect(TokKind.ASSIGN, "'='")
            init = Assign(name=name.lexeme, expr=self._expr(), span=name.span)
        self.expect(TokKind.SEMI, "';'")
        cond = self._expr()
        self.expect(TokKind.SEMI, "';'")
        step = self._loop_step()
        self.expect(TokKind.RPAREN, "')'")
        body = self._block()
        return ForStmt(init=init, cond=cond, step=step, body=body, span=start.span)

    def _loop_step(self) -> Stmt:
        name = self.expect(TokKind.IDENT, "loop variable")
        tok = self.peek()
        if tok.kind is TokKind.PLUSPLUS:
            self.advance()
            return IncDec(name=name.lexeme, delta=1, span=name.span)
        if tok.kind is TokKind.MINUSMINUS:
            self.advance()
            return IncDec(name=name.lexeme, delta=-1, span=name.span)
        if tok.kind in (TokKind.ASSIGN, TokKind.PLUSEQ, TokKind.MINUSEQ):
            self.advance()
            return Assign(name=name.lexeme, expr=self._expr(), op=tok.lexeme,
                          span=name.span)
        raise ParseError("expected loop step ('++', '--' or assignment)", tok.span)

    def _if_stmt(self) -> IfStmt:
        start = self.expect_kw("if")
        branches: list[tuple[Expr, tuple[Stmt, ...]]] = []
        self.expect(TokKind.LPAREN, "'('")
        cond = self._expr()
        self.expect(TokKind.RPAREN, "')'")
        branches.append((cond, self._block()))
        else_body: tuple[Stmt, ...] | None = None
        while self.peek().is_kw("else"):
            self.advance()
            if self.peek().is_kw("if"):
                self.advance()
                self.expect(TokKind.LPAREN, "'('")
                cond = self._expr()
                self.expect(TokKind.RPAREN, "')'")
                branches.append((cond, self._block()))
            else:
                else_body = self._block()
                break
        return IfStmt(branches=tuple(branches), else_body=else_body, span=start.span)

    def _call_or_assign(self) -> Stmt:
        name = self.advance()
        tok = self.peek()
        if tok.kind is TokKind.LPAREN:
            self.advance()
            args: list[CallArg] = []
            if self.peek().kind is not TokKind.RPAREN:
                while True:
                    args.append(self._call_arg())
                    if not self.accept(TokKind.COMMA):
                        break
            self.expect(TokKind.RPAREN, "')'")
            self.expect(TokKind.SEMI, "';'")
            return CallStmt(name=name.lexeme, args=tuple(args), span=name.span)
        if tok.kind in (TokKind.ASSIGN, TokKind.PLUSEQ, TokKind.MINUSEQ):
            self.advance()
            expr = self._expr()
            self.expect(TokKind.SEMI, "';'")
            return Assign(name=name.lexeme, expr=expr, op=tok.lexeme, span=name.span)
        if tok.kind is TokKind.PLUSPLUS:
            self.advance()
            self.expect(TokKind.SEMI, "';'")
            return IncDec(name=name.lexeme, delta=1, span=name.span)
        if tok.kind is TokKind.MINUSMINUS:
            self.advance()
            self.expect(TokKind.SEMI, "';'")
            return IncDec(name=name.lexeme, delta=-1, span=name.span)
        raise ParseError(f"expected call or assignment after '{name.lexeme}'", tok.span)

    def _call_arg(self) -> CallArg:
        """Call arguments: qubit element `q[i]`, register `q`, slice `q[a..b]`,
        struct member `s.r[i]`, or a classical expression."""
        tok = self.peek()
        if tok.kind is TokKind.IDENT and not tok.is_keyword:
            mark = self.i
            name = self.advance()
            member = None
            if self.peek().kind is TokKind.DOT:
                self.advance()
                member = self.expect(TokKind.IDENT, "struct member").lexeme
            reg = RegRef(name=name.lexeme, member=member, span=name.span)
            if self.peek().kind is TokKind.LBRACK:
                self.advance()
                lo = self._expr()
                if self.accept(TokKind.DOTDOT):
                    hi = self._expr()
                    self.expect(TokKind.RBRACK, "']'")
                    q = QubitRef(reg=reg, index=lo, slice_hi=hi, span=name.span)
                    return CallArg(qubit=q, span=name.span)
                self.expect(TokKind.RBRACK, "']'")
                q = QubitRef(reg=reg, index=lo, span=name.span)
                return CallArg(qubit=q, span=name.span)
            if self.peek().kind in (TokKind.COMMA, TokKind.RPAREN) and member is None:
                # bare name: register reference or classical variable; keep as
                # a whole-register ref and let resolution decide
                q = QubitRef(reg=reg, index=None, span=name.span)
                return CallArg(qubit=q, span=name.span)
            if member is not None:
                q = QubitRef(reg=reg, index=None, span=name.span)
                return CallArg(qubit=q, span=name.span)
            self.i = mark
        return CallArg(expr=self._expr(), span=tok.span)

    # -- classical expressions (body context) -------------------------------
    def _expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        lhs = self._and()
        while self.peek().kind is TokKind.OROR:
            tok = self.advance()
            lhs = BinOp("||", lhs, self._and(), span=tok.span)
        return lhs

    def _and(self) -> Expr:
        lhs = self._cmp()
        while self.peek().kind is TokKind.ANDAND:
            tok = self.advance()
            lhs = BinOp("&&", lhs, self._cmp(), span=tok.span)
        return lhs

    _CMP = {TokKind.EQ: "==", TokKind.NE: "!=", TokKind.LE: "<=",
            TokKind.GE: ">=", TokKind.LT: "<", TokKind.GT: ">"}

    def _cmp(self) -> Expr:
        lhs = self._add()
        if self.peek().kind in self._CMP:
            tok = self.advance()
            return BinOp(self._CMP[tok.kind], lhs, self._add(), span=tok.span)
        return lhs

    def _add(self) -> Expr:
        lhs = self._mul()
        while self.peek().kind in (TokKind.PLUS, TokKind.MINUS):
            tok = self.advance()
            lhs = BinOp(tok.lexeme, lhs, self._mul(), span=tok.span)
        return lhs

    def _mul(self) -> Expr:
        lhs = self._unary()
        while self.peek().kind in (TokKind.STAR, TokKind.SLASH, TokKind.PERCENT):
            tok = self.advance()
            lhs = BinOp(tok.lexeme, lhs, self._unary(), span=tok.span)
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
        if tok.kind is TokKind.IDENT and not tok.is_keyword:
            self.advance()
            if self.peek().kind is TokKind.LPAREN:
                self.advance()
                args: list[Expr] = []
                if self.peek().kind is not TokKind.RPAREN:
                    while True:
                        args.append(self._expr())
                        if not self.accept(TokKind.COMMA):
                            break
                self.expect(TokKind.RPAREN, "')'")
                return Call(func=tok.lexeme, args=tuple(args), span=tok.span)
            member = None
            if self.peek().kind is TokKind.DOT:
                self.advance()
                member = self.expect(TokKind.IDENT, "struct member").lexeme
            if self.peek().kind is TokKind.LBRACK:
                self.advance()
                idx = self._expr()
                self.expect(TokKind.RBRACK, "']'")
                reg = RegRef(name=tok.lexeme, member=member, span=tok.span)
                return RefExpr(QubitRef(reg=reg, index=idx, span=tok.span), span=tok.span)
            if member is not None:
                reg = RegRef(name=tok.lexeme, member=member, span=tok.span)
                return RefExpr(QubitRef(reg=reg, index=None, span=tok.span), span=tok.span)
            return Var(name=tok.lexeme, span=tok.span)
        raise ParseError(f"unexpected token {tok.lexeme or '<eof>'!r} in expression",
                         tok.span)


def parse_program(tokens: list[Token]) -> ProgramAst:
    return Parser(tokens).parse_program()


def parse_source_text(content: str) -> ProgramAst:
    return parse_program(tokenize_program(content))
