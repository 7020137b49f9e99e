"""Lightweight static checks: scoping and syntactic type classes.

Full type inference is the database engine's job; this pass only gathers
the facts the static patterns need: which declared variables an expression
touches, and whether a FOR-range bound is integer-valued on its face.
"""

from __future__ import annotations

import re

from .ast_nodes import (
    Assert,
    Assign,
    CaseWhen,
    Continue,
    CursorFor,
    EmbeddedSql,
    ExecuteDynamic,
    Exit,
    Expression,
    FLOAT_BASES,
    ForEach,
    ForRange,
    If,
    INTEGER_BASES,
    PlsqlFunction,
    RaiseNotice,
    Return,
    SqlType,
    Statement,
    While,
)
from .lexer import TokenKind, lex
from .parser import SQL_NONREF_WORDS
from .source import Diagnostic

CLASS_INTEGER = "integer"
CLASS_FLOAT = "float"
CLASS_MIXED_UNKNOWN = "mixed-unknown"

# A bound wholly wrapped in one of these yields an integral value, so the
# engine's implicit rounding is the identity and no warning applies.
_INTEGRAL_WRAPPERS = re.compile(r"^\s*(floor|ceil|ceiling|round|trunc)\s*\(.*\)\s*$",
                                re.IGNORECASE | re.DOTALL)
# Likewise a top-level explicit cast to an integral type.
_INTEGRAL_TOP_CAST = re.compile(r"::\s*(int|integer|int2|int4|int8|bigint|smallint)\s*$",
                                re.IGNORECASE)


def typecheck_light(fn: PlsqlFunction) -> tuple[PlsqlFunction, list[Diagnostic]]:
    """Annotate expressions in place; return the function plus diagnostics."""
    diagnostics: list[Diagnostic] = []
    scope = fn.scope()

    for decl in fn.declarations:
        if decl.initializer is not None:
            _annotate(decl.initializer, scope, diagnostics, strict=True)

    _check_block(fn, scope, diagnostics)
    return fn, diagnostics


def _check_block(fn: PlsqlFunction, scope: dict[str, SqlType],
                 diagnostics: list[Diagnostic]) -> None:

    def visit(statements, scope: dict[str, SqlType]) -> None:
        for stmt in statements:
            _visit_stmt(stmt, scope)

    def _visit_stmt(stmt: Statement, scope: dict[str, SqlType]) -> None:
        if isinstance(stmt, Assign):
            if stmt.target not in scope:
                diagnostics.append(Diagnostic(
                    stmt.target_span or stmt.span,
                    f"assignment to undeclared variable {stmt.target}", code="scope"))
            _annotate(stmt.expr, scope, diagnostics, strict=True)
        elif isinstance(stmt, If):
            _annotate(stmt.cond, scope, diagnostics, strict=True)
            visit(stmt.then_block.statements, scope)
            for cond, block in stmt.elifs:
                _annotate(cond, scope, diagnostics, strict=True)
                visit(block.statements, scope)
            if stmt.else_block:
                visit(stmt.else_block.statements, scope)
        elif isinstance(stmt, CaseWhen):
            if stmt.selector is not None:
                _annotate(stmt.selector, scope, diagnostics, strict=True)
            for arm in stmt.arms:
                for cond in arm.conds:
                    _annotate(cond, scope, diagnostics, strict=True)
                visit(arm.block.statements, scope)
            if stmt.else_block:
                visit(stmt.else_block.statements, scope)
        elif isinstance(stmt, Assert):
            _annotate(stmt.cond, scope, diagnostics, strict=True)
            if stmt.message is not None:
                _annotate(stmt.message, scope, diagnostics, strict=True)
        elif isinstance(stmt, While):
            _annotate(stmt.cond, scope, diagnostics, strict=True)
            visit(stmt.body.statements, scope)
        elif isinstance(stmt, ForRange):
            _annotate(stmt.lo, scope, diagnostics, strict=True)
            _annotate(stmt.hi, scope, diagnostics, strict=True)
            stmt.lo.type_class = classify_bound(stmt.lo, scope)
            stmt.hi.type_class = classify_bound(stmt.hi, scope)
            if stmt.step is not None:
                _annotate(stmt.step, scope, diagnostics, strict=True)
                stmt.step.type_class = classify_bound(stmt.step, scope)
            inner = dict(scope)
            inner[stmt.var] = SqlType(raw="int", base="int4")  # auto-declared
            visit(stmt.body.statements, inner)
        elif isinstance(stmt, ForEach):
            if stmt.var not in scope:
                diagnostics.append(Diagnostic(
                    stmt.span, f"FOREACH target {stmt.var} is not declared", code="scope"))
            _annotate(stmt.array_expr, scope, diagnostics, strict=True)
            visit(stmt.body.statements, scope)
        elif isinstance(stmt, CursorFor):
            _annotate(stmt.query, scope, diagnostics, strict=False)
            inner = dict(scope)
            inner.setdefault(stmt.var, scope.get(stmt.var, SqlType(raw="record", base="record")))
            visit(stmt.body.statements, inner)
        elif isinstance(stmt, (RaiseNotice,)):
            for arg in stmt.args:
                _annotate(arg, scope, diagnostics, strict=True)
        elif isinstance(stmt, Return):
            if stmt.expr is not None:
                _annotate(stmt.expr, scope, diagnostics, strict=True)
        elif isinstance(stmt, ExecuteDynamic):
            _annotate(stmt.command, scope, diagnostics, strict=True)
        elif isinstance(stmt, EmbeddedSql):
            _annotate(stmt.query, scope, diagnostics, strict=False)
        elif isinstance(stmt, (Continue, Exit)) and stmt.when is not None:
            _annotate(stmt.when, scope, diagnostics, strict=True)

    visit(fn.body.statements, scope)


def _annotate(expr: Expression, scope: dict[str, SqlType],
              diagnostics: list[Diagnostic], strict: bool) -> None:
    """Fill expr.var_types; in strict mode report unknown identifiers."""
    expr.var_types = {name: scope[name] for name in expr.refs if name in scope}
    if strict:
        for name in sorted(expr.refs - scope.keys()):
            diagnostics.append(Diagnostic(
                expr.span, f"reference to undeclared identifier {name}", code="scope"))


def classify_bound(expr: Expression, scope: dict[str, SqlType]) -> str:
    """Syntactic type class of a FOR bound: integer / float / mixed-unknown.

    Pure token scan: integer literals and integer-typed variables keep the
    class integral; a float literal or float/numeric variable makes it
    float; anything else (strings, casts, function calls) is unknowable
    without the engine — except integral-valued wrapper calls, which are
    integral by construction.
    """
    if _INTEGRAL_WRAPPERS.match(expr.text) or _INTEGRAL_TOP_CAST.search(expr.text):
        return CLASS_INTEGER

    saw_int = saw_float = saw_other = False
    tokens = lex(expr.text)
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        # a cast right after an operand retypes it; let the cast speak
        if (tok.kind in (TokenKind.INT_LIT, TokenKind.NUM_LIT, TokenKind.WORD)
                and i + 1 < len(tokens) and tokens[i + 1].kind is TokenKind.TYPECAST):
            i += 1
            continue
        if tok.kind is TokenKind.INT_LIT:
            saw_int = True
        elif tok.kind is TokenKind.NUM_LIT:
            saw_float = True
        elif tok.kind in (TokenKind.STRING, TokenKind.DOLLAR_STRING):
            saw_other = True
        elif tok.kind is TokenKind.TYPECAST:
            # an explicit cast pins the subexpression's type: classify by it
            j = i + 1
            words = []
            while j < len(tokens) and tokens[j].kind is TokenKind.WORD and len(words) < 2:
                words.append(tokens[j].norm)
                j += 1
            base = SqlType.normalize_base(" ".join(words)) if words else ""
            if base in INTEGER_BASES:
                saw_int = True
            elif base in FLOAT_BASES:
                saw_float = True
            else:
                saw_other = True
            i = j
            continue
        elif tok.kind is TokenKind.WORD:
            nxt = tokens[i + 1] if i + 1 < len(tokens) else None
            if nxt is not None and nxt.kind is TokenKind.LPAREN:
                saw_other = True  # function call of unknowable type
            elif tok.norm in scope:
                base = scope[tok.norm].base
                if base in INTEGER_BASES:
                    saw_int = True
                elif base in FLOAT_BASES:
                    saw_float = True
                else:
                    saw_other = True
            elif tok.norm in ("true", "false", "null", "and", "or", "not"):
                saw_other = True
            else:
                saw_other = True  # unknown identifier / SQL keyword
        i += 1
    if saw_other:
        return CLASS_MIXED_UNKNOWN
    if saw_float and saw_int:
        return CLASS_MIXED_UNKNOWN
    if saw_float:
        return CLASS_FLOAT
    return CLASS_INTEGER


def annotated(fn: PlsqlFunction) -> PlsqlFunction:
    """Convenience: annotate and discard diagnostics (they are recomputable)."""
    out, _ = typecheck_light(fn)
    return out
