"""Recursive-descent parser for single- and multi-function PL/pgSQL files.

Grammar scope: `CREATE [OR REPLACE] FUNCTION ... LANGUAGE plpgsql` with a
dollar-quoted body; other top-level statements (e.g. example SELECT calls)
are skipped without error. Error recovery synchronizes on `;` and `END`, so
broken code still yields a partial AST for IDE use.

SQL expressions are captured verbatim. The identifier scan that computes an
expression's referenced variables is heuristic: words followed by `(`,
qualified tails (`x.y`), type names after `::`, and a fixed list of SQL
keywords are excluded. A variable shadowing a common SQL keyword can
therefore escape the scan; that costs a missed diagnostic, never a wrong
translation.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast_nodes import (
    Assert,
    Assign,
    Block,
    CaseArm,
    CaseWhen,
    Continue,
    CursorFor,
    EmbeddedSql,
    ExecuteDynamic,
    Exit,
    Expression,
    ForEach,
    ForRange,
    If,
    Loop,
    NullStmt,
    Param,
    PlsqlFunction,
    RaiseNotice,
    Return,
    SqlType,
    Statement,
    VarDecl,
    While,
)
from .lexer import Token, TokenKind, lex
from .source import Diagnostic, LineIndex, SourceSpan

# Words never treated as variable references by the identifier scan.
SQL_NONREF_WORDS = frozenset({
    "and", "or", "not", "is", "null", "true", "false", "like", "ilike",
    "similar", "to", "between", "symmetric", "in", "any", "all", "some",
    "exists", "case", "when", "then", "else", "end", "distinct", "from",
    "where", "group", "by", "having", "order", "limit", "offset", "union",
    "intersect", "except", "join", "inner", "left", "right", "full",
    "outer", "cross", "lateral", "on", "using", "as", "asc", "desc",
    "nulls", "first", "last", "collate", "at", "time", "zone", "interval",
    "escape", "array", "row", "cast", "extract", "epoch", "substring",
    "position", "overlay", "placing", "trim", "leading", "trailing",
    "both", "for", "select", "values", "over", "partition", "filter",
    "window", "isnull", "notnull", "unknown", "returning", "into",
    "current_date", "current_time", "current_timestamp", "localtime",
    "localtimestamp", "current_user", "session_user",
    # type words
    "int", "integer", "bigint", "smallint", "int2", "int4", "int8",
    "numeric", "decimal", "real", "float", "float4", "float8", "double",
    "precision", "boolean", "bool", "text", "varchar", "char", "character",
    "varying", "date", "timestamp", "timestamptz", "void", "bpchar",
})

_TYPE_SECOND_WORDS = {"varying", "precision"}

_STMT_DML = {"select", "insert", "update", "delete", "with"}


@dataclass
class ParseResult:
    functions: list[PlsqlFunction]
    diagnostics: list[Diagnostic]
    source: str
    file_id: str
    index: LineIndex

    @property
    def ok(self) -> bool:
        return not any(d.severity == "error" for d in self.diagnostics)

    def function(self, name: str | None = None) -> PlsqlFunction | None:
        if name is None:
            return self.functions[0] if self.functions else None
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None


class _Cursor:
    def __init__(self, tokens: list[Token]) -> None:
        self.toks = tokens
        self.i = 0

    def cur(self) -> Token:
        return self.toks[self.i]

    def peek(self, offset: int = 1) -> Token:
        j = min(self.i + offset, len(self.toks) - 1)
        return self.toks[j]

    def advance(self) -> Token:
        tok = self.toks[self.i]
        if self.i < len(self.toks) - 1:
            self.i += 1
        return tok

    def at(self, kind: TokenKind) -> bool:
        return self.cur().kind is kind

    def at_kw(self, *words: str) -> bool:
        return self.cur().is_kw(*words)

    def eat_kw(self, *words: str) -> Token | None:
        if self.at_kw(*words):
            return self.advance()
        return None

    def at_eof(self) -> bool:
        return self.cur().kind is TokenKind.EOF


class Parser:
    def __init__(self, source: str, file_id: str = "<input>") -> None:
        self.source = source
        self.file_id = file_id
        self.index = LineIndex(source)
        self.diagnostics: list[Diagnostic] = []

    # ── public entry ─────────────────────────────────────────────

    def parse(self) -> ParseResult:
        c = _Cursor(lex(self.source))
        functions: list[PlsqlFunction] = []
        while not c.at_eof():
            if c.at_kw("create"):
                fn = self._function(c)
                if fn is not None:
                    functions.append(fn)
            else:
                self._skip_toplevel(c)
        return ParseResult(functions, self.diagnostics, self.source, self.file_id, self.index)

    # ── helpers ──────────────────────────────────────────────────

    def _span(self, start: int, end: int) -> SourceSpan:
        return SourceSpan.of(self.file_id, self.index, start, end)

    def _tok_span(self, tok: Token) -> SourceSpan:
        return self._span(tok.start, tok.end)

    def _error(self, span: SourceSpan, message: str, code: str = "syntax") -> None:
        self.diagnostics.append(Diagnostic(span, message, code=code))

    def _expect_kw(self, c: _Cursor, word: str) -> Token | None:
        if c.at_kw(word):
            return c.advance()
        self._error(self._tok_span(c.cur()), f"expected {word.upper()}, found {c.cur().text or 'end of input'!r}")
        return None

    def _expect(self, c: _Cursor, kind: TokenKind) -> Token | None:
        if c.at(kind):
            return c.advance()
        self._error(self._tok_span(c.cur()), f"expected {kind.value!r}, found {c.cur().text or 'end of input'!r}")
        return None

    def _ident(self, c: _Cursor, what: str) -> Token | None:
        tok = c.cur()
        if tok.kind in (TokenKind.WORD, TokenKind.QUOTED_IDENT):
            c.advance()
            return tok
        self._error(self._tok_span(tok), f"expected {what}, found {tok.text or 'end of input'!r}")
        return None

    def _skip_toplevel(self, c: _Cursor) -> None:
        """Consume a non-function top-level statement through its semicolon."""
        depth = 0
        while not c.at_eof():
            tok = c.advance()
            if tok.kind is TokenKind.LPAREN:
                depth += 1
            elif tok.kind is TokenKind.RPAREN:
                depth = max(0, depth - 1)
            elif tok.kind is TokenKind.SEMI and depth == 0:
                return

    # ── CREATE FUNCTION header ──────────────────────────────────

    def _function(self, c: _Cursor) -> PlsqlFunction | None:
        create_tok = c.advance()  # CREATE
        or_replace = False
        if c.at_kw("or"):
            c.advance()
            if self._expect_kw(c, "replace") is None:
                self._skip_toplevel(c)
                return None
            or_replace = True
        if self._expect_kw(c, "function") is None:
            self._skip_toplevel(c)
            return None

        name_tok = self._ident(c, "function name")
        if name_tok is None:
            self._skip_toplevel(c)
            return None
        name = name_tok.norm
        while c.at(TokenKind.DOT):  # schema-qualified: keep the last part
            c.advance()
            part = self._ident(c, "function name")
            if part is None:
                break
            name = part.norm
        name_span = self._tok_span(name_tok)

        params = self._params(c)
        if params is None:
            self._skip_toplevel(c)
            return None

        return_type = SqlType(raw="void", base="void")
        if c.eat_kw("returns"):
            rt = self._sql_type(c)
            if rt is None:
                self._skip_toplevel(c)
                return None
            return_type = rt

        body_tok: Token | None = None
        language = ""
        while not c.at_eof() and not (c.at(TokenKind.SEMI)):
            if c.at_kw("as") and c.peek().kind is TokenKind.DOLLAR_STRING:
                c.advance()
                body_tok = c.advance()
            elif c.at_kw("as") and c.peek().kind is TokenKind.STRING:
                c.advance()
                self._error(self._tok_span(c.cur()),
                            "single-quoted function bodies are not supported; use dollar quoting")
                c.advance()
            elif c.at_kw("language"):
                c.advance()
                lang = self._ident(c, "language name")
                language = lang.norm if lang else ""
            else:
                c.advance()  # volatility markers etc.
        end_tok = c.cur()
        if c.at(TokenKind.SEMI):
            c.advance()

        fn_span = self._span(create_tok.start, end_tok.end)
        if body_tok is None:
            self._error(fn_span, f"function {name} has no dollar-quoted body")
            return None
        if language and language != "plpgsql":
            self._error(fn_span, f"function {name} is LANGUAGE {language}, not plpgsql; skipped",
                        code="unsupported")
            return None

        declarations, body = self._function_body(body_tok)
        fn = PlsqlFunction(
            name=name,
            params=params,
            return_type=return_type,
            declarations=declarations,
            body=body,
            span=fn_span,
            or_replace=or_replace,
            name_span=name_span,
        )
        self._check_name_invariants(fn)
        return fn

    def _params(self, c: _Cursor) -> list[Param] | None:
        if self._expect(c, TokenKind.LPAREN) is None:
            return None
        params: list[Param] = []
        if c.at(TokenKind.RPAREN):
            c.advance()
            return params
        while True:
            start = c.cur().start
            if c.at_kw("in"):
                c.advance()
            elif c.cur().is_kw("out", "inout", "variadic"):
                self._error(self._tok_span(c.cur()),
                            f"parameter mode {c.cur().norm.upper()} is not supported", code="unsupported")
                c.advance()
            name_tok = self._ident(c, "parameter name")
            if name_tok is None:
                return None
            sql_type = self._sql_type(c)
            if sql_type is None:
                return None
            type_span = self._last_type_span
            span = self._span(name_tok.start, type_span.end_byte if type_span else name_tok.end)
            params.append(Param(
                name=name_tok.norm, sql_type=sql_type, span=span,
                name_span=self._tok_span(name_tok),
                type_span=type_span,
            ))
            if c.at(TokenKind.COMMA):
                c.advance()
                continue
            if self._expect(c, TokenKind.RPAREN) is None:
                return None
            return params

    _last_type_span: SourceSpan | None = None

    def _sql_type(self, c: _Cursor) -> SqlType | None:
        first = self._ident(c, "type name")
        if first is None:
            return None
        start, end = first.start, first.end
        words = first.norm
        if c.cur().kind is TokenKind.WORD and c.cur().norm in _TYPE_SECOND_WORDS:
            second = c.advance()
            words = f"{words} {second.norm}"
            end = second.end
        length: int | None = None
        if c.at(TokenKind.LPAREN):
            c.advance()
            num = self._expect(c, TokenKind.INT_LIT)
            if num is None:
                return None
            length = int(num.text)
            if c.at(TokenKind.COMMA):
                c.advance()
                if self._expect(c, TokenKind.INT_LIT) is None:
                    return None
            close = self._expect(c, TokenKind.RPAREN)
            if close is None:
                return None
            end = close.end
        is_array = False
        while c.at(TokenKind.LBRACKET):
            c.advance()
            close = self._expect(c, TokenKind.RBRACKET)
            if close is None:
                return None
            is_array = True
            end = close.end
        self._last_type_span = self._span(start, end)
        return SqlType(
            raw=self.source[start:end],
            base=SqlType.normalize_base(words),
            length=length,
            is_array=is_array,
        )

    def _check_name_invariants(self, fn: PlsqlFunction) -> None:
        seen: dict[str, SourceSpan] = {}
        for p in fn.params:
            if p.name in seen:
                self._error(p.name_span or fn.span, f"duplicate parameter name {p.name}", code="scope")
            seen[p.name] = p.name_span or fn.span
        for d in fn.declarations:
            if d.name in seen:
                self._error(d.name_span or d.span,
                            f"variable {d.name} collides with an existing parameter or variable",
                            code="scope")
            seen[d.name] = d.name_span or d.span

    # ── function body ────────────────────────────────────────────

    def _function_body(self, body_tok: Token) -> tuple[list[VarDecl], Block]:
        tag_open = body_tok.text.index("$", 1) + 1  # len of opening $tag$
        content_start = body_tok.start + tag_open
        content_end = body_tok.end - tag_open
        c = _Cursor(lex(self.source, content_start, content_end))

        declarations: list[VarDecl] = []
        if c.eat_kw("declare"):
            declarations = self._declarations(c)
        if self._expect_kw(c, "begin") is None:
            return declarations, Block([], self._span(content_start, content_end))
        body = self._block(c, stop={"end"})
        if c.eat_kw("end"):
            if c.at(TokenKind.SEMI):
                c.advance()
        else:
            self._error(self._tok_span(c.cur()), "expected END to close function body")
        return declarations, body

    def _declarations(self, c: _Cursor) -> list[VarDecl]:
        out: list[VarDecl] = []
        while not c.at_eof() and not c.at_kw("begin"):
            start_tok = c.cur()
            name_tok = self._ident(c, "variable name")
            if name_tok is None:
                self._sync(c)
                continue
            sql_type = self._sql_type(c)
            if sql_type is None:
                self._sync(c)
                continue
            initializer: Expression | None = None
            if c.at(TokenKind.ASSIGN) or c.at(TokenKind.EQ) or c.at_kw("default"):
                c.advance()
                initializer = self._expression(c, stop_kinds={TokenKind.SEMI})
            semi = c.cur()
            if self._expect(c, TokenKind.SEMI) is None:
                self._sync(c)
            out.append(VarDecl(
                name=name_tok.norm,
                sql_type=sql_type,
                initializer=initializer,
                span=self._span(start_tok.start, semi.end),
                name_span=self._tok_span(name_tok),
                type_span=self._last_type_span,
            ))
        return out

    # ── statements ───────────────────────────────────────────────

    def _block(self, c: _Cursor, stop: set[str]) -> Block:
        stmts: list[Statement] = []
        start = c.cur().start
        while not c.at_eof() and not (c.cur().kind is TokenKind.WORD and c.cur().norm in stop):
            before = c.i
            stmt = self._statement(c, stop)
            if isinstance(stmt, Block):  # plain BEGIN..END group: flatten
                stmts.extend(stmt.statements)
            elif stmt is not None:
                stmts.append(stmt)
            if c.i == before:  # no progress: drop a token and resync
                self._error(self._tok_span(c.cur()), f"unexpected {c.cur().text!r}")
                c.advance()
                self._sync(c, stop)
        end = stmts[-1].span.end_byte if stmts else start
        return Block(stmts, self._span(start, end))

    def _statement(self, c: _Cursor, stop: set[str]) -> Statement | Block | None:
        tok = c.cur()
        if tok.kind is TokenKind.LABEL_OPEN:
            return self._labeled(c, stop)
        if tok.kind is TokenKind.WORD:
            n = tok.norm
            if n == "if":
                return self._if(c)
            if n == "case":
                return self._case(c)
            if n == "assert":
                return self._assert(c)
            if n == "loop":
                return self._loop(c, label=None)
            if n == "while":
                return self._while(c, label=None)
            if n == "for":
                return self._for(c, label=None)
            if n == "foreach":
                return self._foreach(c, label=None)
            if n in ("continue", "exit"):
                return self._exit_continue(c)
            if n == "return":
                return self._return(c)
            if n == "raise":
                return self._raise(c)
            if n == "execute":
                return self._execute(c)
            if n == "perform":
                return self._embedded(c, dml_kind="perform")
            if n in _STMT_DML:
                return self._embedded(c, dml_kind=n)
            if n == "begin":
                c.advance()
                inner = self._block(c, stop={"end"})
                self._expect_kw(c, "end")
                if c.at(TokenKind.SEMI):
                    c.advance()
                return inner
            if n == "null":
                start = c.advance()
                semi = c.cur()
                self._expect(c, TokenKind.SEMI)
                return NullStmt(span=self._span(start.start, semi.end))
            if n == "declare":
                self._error(self._tok_span(tok), "nested DECLARE blocks are not supported",
                            code="unsupported")
                c.advance()
                self._sync(c, stop)
                return None
            nxt = c.peek()
            if nxt.kind in (TokenKind.ASSIGN, TokenKind.EQ):
                return self._assign(c)
        if tok.kind is TokenKind.QUOTED_IDENT and c.peek().kind in (TokenKind.ASSIGN, TokenKind.EQ):
            return self._assign(c)
        return None  # caller reports and recovers

    def _sync(self, c: _Cursor, stop: set[str] | None = None) -> None:
        """Recover: skip to just past the next top-level ';' or before END/stop word."""
        depth = 0
        stop = stop or set()
        while not c.at_eof():
            tok = c.cur()
            if tok.kind is TokenKind.LPAREN:
                depth += 1
            elif tok.kind is TokenKind.RPAREN:
                depth = max(0, depth - 1)
            elif depth == 0:
                if tok.kind is TokenKind.SEMI:
                    c.advance()
                    return
                if tok.kind is TokenKind.WORD and (tok.norm == "end" or tok.norm in stop):
                    return
            c.advance()

    def _assign(self, c: _Cursor) -> Statement | None:
        name_tok = c.advance()
        c.advance()  # := or =
        expr = self._expression(c, stop_kinds={TokenKind.SEMI})
        semi = c.cur()
        if self._expect(c, TokenKind.SEMI) is None:
            self._sync(c)
        return Assign(
            span=self._span(name_tok.start, semi.end),
            target=name_tok.norm,
            expr=expr,
            target_span=self._tok_span(name_tok),
        )

    def _if(self, c: _Cursor) -> Statement | None:
        if_tok = c.advance()
        cond = self._expression(c, stop_words={"then"})
        self._expect_kw(c, "then")
        then_block = self._block(c, stop={"elsif", "elseif", "else", "end"})
        elifs: list[tuple[Expression, Block]] = []
        while c.at_kw("elsif", "elseif"):
            c.advance()
            e_cond = self._expression(c, stop_words={"then"})
            self._expect_kw(c, "then")
            e_block = self._block(c, stop={"elsif", "elseif", "else", "end"})
            elifs.append((e_cond, e_block))
        else_block: Block | None = None
        if c.eat_kw("else"):
            else_block = self._block(c, stop={"end"})
        self._expect_kw(c, "end")
        self._expect_kw(c, "if")
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        return If(span=self._span(if_tok.start, semi.end), cond=cond,
                  then_block=then_block, elifs=elifs, else_block=else_block)

    def _case(self, c: _Cursor) -> Statement | None:
        case_tok = c.advance()
        selector: Expression | None = None
        if not c.at_kw("when"):
            selector = self._expression(c, stop_words={"when"})
        arms: list[CaseArm] = []
        while c.eat_kw("when"):
            conds = [self._expression(c, stop_words={"then"}, stop_kinds={TokenKind.COMMA})]
            while c.at(TokenKind.COMMA):
                c.advance()
                conds.append(self._expression(c, stop_words={"then"}, stop_kinds={TokenKind.COMMA}))
            self._expect_kw(c, "then")
            block = self._block(c, stop={"when", "else", "end"})
            arms.append(CaseArm(conds=conds, block=block))
        else_block: Block | None = None
        if c.eat_kw("else"):
            else_block = self._block(c, stop={"end"})
        self._expect_kw(c, "end")
        self._expect_kw(c, "case")
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        if not arms:
            self._error(self._span(case_tok.start, semi.end), "CASE statement has no WHEN arms")
        return CaseWhen(span=self._span(case_tok.start, semi.end),
                        selector=selector, arms=arms, else_block=else_block)

    def _assert(self, c: _Cursor) -> Statement | None:
        a_tok = c.advance()
        cond = self._expression(c, stop_kinds={TokenKind.SEMI, TokenKind.COMMA})
        message: Expression | None = None
        if c.at(TokenKind.COMMA):
            c.advance()
            message = self._expression(c, stop_kinds={TokenKind.SEMI})
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        return Assert(span=self._span(a_tok.start, semi.end), cond=cond, message=message)

    def _labeled(self, c: _Cursor, stop: set[str]) -> Statement | None:
        open_tok = c.advance()
        label_tok = self._ident(c, "label")
        self._expect(c, TokenKind.LABEL_CLOSE)
        label = label_tok.norm if label_tok else None
        tok = c.cur()
        stmt: Statement | None = None
        if tok.is_kw("loop"):
            stmt = self._loop(c, label=label)
        elif tok.is_kw("while"):
            stmt = self._while(c, label=label)
        elif tok.is_kw("for"):
            stmt = self._for(c, label=label)
        elif tok.is_kw("foreach"):
            stmt = self._foreach(c, label=label)
        else:
            self._error(self._tok_span(tok), "a label must be followed by LOOP, WHILE, FOR or FOREACH")
            self._sync(c, stop)
            return None
        if stmt is not None:
            stmt.span = self._span(open_tok.start, stmt.span.end_byte)
        return stmt

    def _loop_tail(self, c: _Cursor) -> tuple[Block, Token]:
        body = self._block(c, stop={"end"})
        self._expect_kw(c, "end")
        self._expect_kw(c, "loop")
        if c.cur().kind is TokenKind.WORD and not c.at(TokenKind.SEMI):
            c.advance()  # optional trailing label
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        return body, semi

    def _loop(self, c: _Cursor, label: str | None) -> Statement | None:
        loop_tok = c.advance()
        body, semi = self._loop_tail(c)
        return Loop(span=self._span(loop_tok.start, semi.end), body=body, label=label)

    def _while(self, c: _Cursor, label: str | None) -> Statement | None:
        w_tok = c.advance()
        cond = self._expression(c, stop_words={"loop"})
        self._expect_kw(c, "loop")
        body, semi = self._loop_tail(c)
        return While(span=self._span(w_tok.start, semi.end), cond=cond, body=body, label=label)

    def _for(self, c: _Cursor, label: str | None) -> Statement | None:
        for_tok = c.advance()
        var_tok = self._ident(c, "loop variable")
        if var_tok is None:
            self._sync(c)
            return None
        if self._expect_kw(c, "in") is None:
            self._sync(c)
            return None
        if self._range_form_ahead(c):
            reverse = bool(c.eat_kw("reverse"))
            lo = self._expression(c, stop_kinds={TokenKind.DOTDOT})
            self._expect(c, TokenKind.DOTDOT)
            hi = self._expression(c, stop_words={"loop", "by"})
            step: Expression | None = None
            if c.eat_kw("by"):
                step = self._expression(c, stop_words={"loop"})
            self._expect_kw(c, "loop")
            body, semi = self._loop_tail(c)
            return ForRange(span=self._span(for_tok.start, semi.end), var=var_tok.norm,
                            lo=lo, hi=hi, step=step, reverse=reverse, body=body, label=label)
        query = self._expression(c, stop_words={"loop"})
        self._expect_kw(c, "loop")
        body, semi = self._loop_tail(c)
        return CursorFor(span=self._span(for_tok.start, semi.end), var=var_tok.norm,
                         query=query, body=body, label=label)

    def _range_form_ahead(self, c: _Cursor) -> bool:
        """True if a top-level '..' occurs before the LOOP keyword."""
        depth = 0
        j = c.i
        while j < len(c.toks):
            tok = c.toks[j]
            if tok.kind is TokenKind.LPAREN or tok.kind is TokenKind.LBRACKET:
                depth += 1
            elif tok.kind is TokenKind.RPAREN or tok.kind is TokenKind.RBRACKET:
                depth -= 1
            elif depth == 0:
                if tok.kind is TokenKind.DOTDOT:
                    return True
                if tok.is_kw("loop") or tok.kind is TokenKind.EOF:
                    return False
            j += 1
        return False

    def _foreach(self, c: _Cursor, label: str | None) -> Statement | None:
        fe_tok = c.advance()
        var_tok = self._ident(c, "loop variable")
        if var_tok is None or self._expect_kw(c, "in") is None or self._expect_kw(c, "array") is None:
            self._sync(c)
            return None
        arr = self._expression(c, stop_words={"loop"})
        self._expect_kw(c, "loop")
        body, semi = self._loop_tail(c)
        return ForEach(span=self._span(fe_tok.start, semi.end), var=var_tok.norm,
                       array_expr=arr, body=body, label=label)

    def _exit_continue(self, c: _Cursor) -> Statement | None:
        kw = c.advance()
        label: str | None = None
        if c.cur().kind is TokenKind.WORD and not c.at_kw("when"):
            label = c.advance().norm
        when: Expression | None = None
        if c.eat_kw("when"):
            when = self._expression(c, stop_kinds={TokenKind.SEMI})
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        span = self._span(kw.start, semi.end)
        if kw.norm == "exit":
            return Exit(span=span, label=label, when=when)
        return Continue(span=span, label=label, when=when)

    def _return(self, c: _Cursor) -> Statement | None:
        r_tok = c.advance()
        if c.cur().is_kw("next", "query"):
            self._error(self._tok_span(c.cur()),
                        f"RETURN {c.cur().norm.upper()} is not supported", code="unsupported")
            self._sync(c)
            return None
        expr: Expression | None = None
        if not c.at(TokenKind.SEMI):
            expr = self._expression(c, stop_kinds={TokenKind.SEMI})
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        return Return(span=self._span(r_tok.start, semi.end), expr=expr)

    def _raise(self, c: _Cursor) -> Statement | None:
        r_tok = c.advance()
        level_tok = c.cur()
        if level_tok.kind is TokenKind.WORD and level_tok.norm != "notice":
            self._error(self._tok_span(level_tok),
                        f"only RAISE NOTICE is supported, not RAISE {level_tok.norm.upper()}",
                        code="unsupported")
            self._sync(c)
            return None
        self._expect_kw(c, "notice")
        fmt_tok = c.cur()
        if fmt_tok.kind is not TokenKind.STRING:
            self._error(self._tok_span(fmt_tok), "RAISE NOTICE requires a string literal format")
            self._sync(c)
            return None
        c.advance()
        args: list[Expression] = []
        while c.at(TokenKind.COMMA):
            c.advance()
            args.append(self._expression(c, stop_kinds={TokenKind.SEMI, TokenKind.COMMA}))
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        return RaiseNotice(span=self._span(r_tok.start, semi.end),
                           format=fmt_tok.value or "", args=args,
                           format_span=self._tok_span(fmt_tok))

    def _execute(self, c: _Cursor) -> Statement | None:
        e_tok = c.advance()
        command = self._expression(c, stop_kinds={TokenKind.SEMI}, stop_words={"into", "using"})
        into_targets: list[str] | None = None
        has_using = False
        if c.eat_kw("into"):
            c.eat_kw("strict")
            into_targets = self._target_list(c)
        if c.at_kw("using"):
            has_using = True
            self._error(self._tok_span(c.cur()), "EXECUTE ... USING is not supported",
                        code="unsupported")
            while not c.at(TokenKind.SEMI) and not c.at_eof():
                c.advance()
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        return ExecuteDynamic(span=self._span(e_tok.start, semi.end), command=command,
                              into_targets=into_targets, has_using=has_using)

    def _target_list(self, c: _Cursor) -> list[str]:
        targets: list[str] = []
        tok = self._ident(c, "INTO target")
        if tok:
            targets.append(tok.norm)
        while c.at(TokenKind.COMMA):
            c.advance()
            tok = self._ident(c, "INTO target")
            if tok:
                targets.append(tok.norm)
        return targets

    def _embedded(self, c: _Cursor, dml_kind: str) -> Statement | None:
        """An embedded SQL statement, captured verbatim with INTO extracted."""
        start_tok = c.cur()
        if dml_kind == "perform":
            c.advance()  # PERFORM keyword is plpgsql-only; drop it from the query
            query_start = c.cur().start
        else:
            query_start = start_tok.start
        depth = 0
        into_start: int | None = None
        into_end: int | None = None
        targets: list[str] | None = None
        into_spans: list[SourceSpan] = []
        has_returning = False
        strict = False
        while not c.at_eof():
            tok = c.cur()
            if tok.kind is TokenKind.LPAREN:
                depth += 1
            elif tok.kind is TokenKind.RPAREN:
                depth -= 1
            elif depth == 0 and tok.kind is TokenKind.SEMI:
                break
            elif depth == 0 and tok.is_kw("returning"):
                has_returning = True
            elif depth == 0 and tok.is_kw("into") and dml_kind in ("select", "with"):
                into_start = tok.start
                c.advance()
                if c.at_kw("strict"):
                    strict = True
                    c.advance()
                targets = []
                t = self._ident(c, "INTO target")
                if t:
                    targets.append(t.norm)
                    into_spans.append(self._tok_span(t))
                while c.at(TokenKind.COMMA):
                    c.advance()
                    t = self._ident(c, "INTO target")
                    if t:
                        targets.append(t.norm)
                        into_spans.append(self._tok_span(t))
                into_end = c.cur().start
                continue
            c.advance()
        semi = c.cur()
        self._expect(c, TokenKind.SEMI)
        stmt_end = semi.start
        if strict:
            self._error(self._span(into_start or query_start, into_end or stmt_end),
                        "SELECT ... INTO STRICT is not supported; treated as non-strict",
                        code="unsupported", )
        if into_start is not None and into_end is not None:
            query_text = (self.source[query_start:into_start] + self.source[into_end:stmt_end]).strip()
        else:
            query_text = self.source[query_start:stmt_end].strip()
        query = Expression(
            text=query_text,
            span=self._span(query_start, stmt_end),
            refs=_scan_refs(lex(self.source, query_start, stmt_end)),
        )
        return EmbeddedSql(span=self._span(start_tok.start, semi.end), query=query,
                           into_targets=targets, dml_kind=dml_kind,
                           into_spans=into_spans, has_returning=has_returning)

    # ── expressions (verbatim capture) ──────────────────────────

    def _expression(self, c: _Cursor, stop_kinds: set[TokenKind] | None = None,
                    stop_words: set[str] | None = None) -> Expression:
        stop_kinds = stop_kinds or set()
        stop_words = stop_words or set()
        toks: list[Token] = []
        depth = 0
        while not c.at_eof():
            tok = c.cur()
            if tok.kind in (TokenKind.LPAREN, TokenKind.LBRACKET):
                depth += 1
            elif tok.kind in (TokenKind.RPAREN, TokenKind.RBRACKET):
                if depth == 0:
                    break
                depth -= 1
            elif depth == 0:
                if tok.kind in stop_kinds or tok.kind is TokenKind.SEMI:
                    break
                if tok.kind is TokenKind.WORD and tok.norm in stop_words:
                    break
                # CASE ... END within an expression: swallow the matching END
                if tok.is_kw("case"):
                    toks.append(c.advance())
                    toks.extend(self._consume_case_expr(c))
                    continue
            toks.append(c.advance())
        if not toks:
            span = self._tok_span(c.cur())
            self._error(span, "expected an expression")
            return Expression(text="NULL", span=span, refs=frozenset())
        start, end = toks[0].start, toks[-1].end
        return Expression(
            text=self.source[start:end],
            span=self._span(start, end),
            refs=_scan_refs(toks),
        )

    def _consume_case_expr(self, c: _Cursor) -> list[Token]:
        out: list[Token] = []
        depth = 1
        while not c.at_eof() and depth:
            tok = c.advance()
            if tok.is_kw("case"):
                depth += 1
            elif tok.is_kw("end"):
                depth -= 1
            out.append(tok)
        return out


def _scan_refs(tokens: list[Token]) -> frozenset[str]:
    """Heuristic variable-reference scan over expression tokens."""
    refs: set[str] = set()
    skip_types = 0
    for i, tok in enumerate(tokens):
        if tok.kind is TokenKind.TYPECAST:
            skip_types = 2  # skip up to two type words: double precision
            continue
        if tok.kind is not TokenKind.WORD and tok.kind is not TokenKind.QUOTED_IDENT:
            skip_types = 0
            continue
        if skip_types:
            skip_types -= 1
            continue
        if tok.kind is TokenKind.WORD and tok.norm in SQL_NONREF_WORDS:
            continue
        nxt = tokens[i + 1] if i + 1 < len(tokens) else None
        if nxt is not None and nxt.kind is TokenKind.LPAREN:
            continue  # function call
        if nxt is not None and nxt.kind is TokenKind.DOT:
            continue  # qualification head: table/record alias
        prev = tokens[i - 1] if i > 0 else None
        if prev is not None and prev.kind is TokenKind.DOT:
            continue  # qualified tail
        refs.add(tok.norm)
    return frozenset(refs)


def parse(source: str, file_id: str = "<input>") -> ParseResult:
    """Parse a PL/pgSQL file into functions plus collected diagnostics."""
    return Parser(source, file_id).parse()
