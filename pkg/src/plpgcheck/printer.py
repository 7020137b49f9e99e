"""Canonical pretty-printer for the AST.

Keywords are emitted upper-case, identifiers as parsed, expressions
verbatim. The output is meant to reparse to a structurally equal tree
(the round-trip property), not to preserve the original layout.
"""

from __future__ import annotations

from .ast_nodes import (
    Assert,
    Assign,
    Block,
    CaseWhen,
    Continue,
    CursorFor,
    EmbeddedSql,
    ExecuteDynamic,
    Exit,
    ForEach,
    ForRange,
    If,
    Loop,
    NullStmt,
    PlsqlFunction,
    RaiseNotice,
    Return,
    Statement,
    While,
)


def quote_literal(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def print_function(fn: PlsqlFunction) -> str:
    head = "CREATE OR REPLACE FUNCTION" if fn.or_replace else "CREATE FUNCTION"
    params = ", ".join(f"{p.name} {p.sql_type.raw}" for p in fn.params)
    lines = [f"{head} {fn.name}({params}) RETURNS {fn.return_type.raw} AS $body$"]
    if fn.declarations:
        lines.append("DECLARE")
        for d in fn.declarations:
            init = f" := {d.initializer.text}" if d.initializer else ""
            lines.append(f"  {d.name} {d.sql_type.raw}{init};")
    lines.append("BEGIN")
    lines.extend(_block_lines(fn.body, 1))
    lines.append("END;")
    lines.append("$body$ LANGUAGE plpgsql;")
    return "\n".join(lines) + "\n"


def _block_lines(block: Block, depth: int) -> list[str]:
    out: list[str] = []
    for stmt in block.statements:
        out.extend(_stmt_lines(stmt, depth))
    return out


def _stmt_lines(stmt: Statement, depth: int) -> list[str]:
    pad = "  " * depth
    label = getattr(stmt, "label", None)
    prefix = [f"{pad}<<{label}>>"] if label else []

    if isinstance(stmt, Assign):
        return [f"{pad}{stmt.target} := {stmt.expr.text};"]
    if isinstance(stmt, If):
        out = [f"{pad}IF {stmt.cond.text} THEN"]
        out.extend(_block_lines(stmt.then_block, depth + 1))
        for cond, block in stmt.elifs:
            out.append(f"{pad}ELSIF {cond.text} THEN")
            out.extend(_block_lines(block, depth + 1))
        if stmt.else_block is not None:
            out.append(f"{pad}ELSE")
            out.extend(_block_lines(stmt.else_block, depth + 1))
        out.append(f"{pad}END IF;")
        return out
    if isinstance(stmt, CaseWhen):
        head = f"{pad}CASE" + (f" {stmt.selector.text}" if stmt.selector else "")
        out = [head]
        for arm in stmt.arms:
            conds = ", ".join(e.text for e in arm.conds)
            out.append(f"{pad}WHEN {conds} THEN")
            out.extend(_block_lines(arm.block, depth + 1))
        if stmt.else_block is not None:
            out.append(f"{pad}ELSE")
            out.extend(_block_lines(stmt.else_block, depth + 1))
        out.append(f"{pad}END CASE;")
        return out
    if isinstance(stmt, Assert):
        msg = f", {stmt.message.text}" if stmt.message else ""
        return [f"{pad}ASSERT {stmt.cond.text}{msg};"]
    if isinstance(stmt, Loop):
        return prefix + [f"{pad}LOOP"] + _block_lines(stmt.body, depth + 1) + [f"{pad}END LOOP;"]
    if isinstance(stmt, While):
        return prefix + [f"{pad}WHILE {stmt.cond.text} LOOP"] + \
            _block_lines(stmt.body, depth + 1) + [f"{pad}END LOOP;"]
    if isinstance(stmt, ForRange):
        rev = "REVERSE " if stmt.reverse else ""
        by = f" BY {stmt.step.text}" if stmt.step else ""
        return prefix + [f"{pad}FOR {stmt.var} IN {rev}{stmt.lo.text} .. {stmt.hi.text}{by} LOOP"] + \
            _block_lines(stmt.body, depth + 1) + [f"{pad}END LOOP;"]
    if isinstance(stmt, ForEach):
        return prefix + [f"{pad}FOREACH {stmt.var} IN ARRAY {stmt.array_expr.text} LOOP"] + \
            _block_lines(stmt.body, depth + 1) + [f"{pad}END LOOP;"]
    if isinstance(stmt, CursorFor):
        return prefix + [f"{pad}FOR {stmt.var} IN {stmt.query.text} LOOP"] + \
            _block_lines(stmt.body, depth + 1) + [f"{pad}END LOOP;"]
    if isinstance(stmt, Continue):
        lab = f" {stmt.label}" if stmt.label else ""
        when = f" WHEN {stmt.when.text}" if stmt.when else ""
        return [f"{pad}CONTINUE{lab}{when};"]
    if isinstance(stmt, Exit):
        lab = f" {stmt.label}" if stmt.label else ""
        when = f" WHEN {stmt.when.text}" if stmt.when else ""
        return [f"{pad}EXIT{lab}{when};"]
    if isinstance(stmt, Return):
        return [f"{pad}RETURN {stmt.expr.text};" if stmt.expr else f"{pad}RETURN;"]
    if isinstance(stmt, RaiseNotice):
        args = "".join(f", {a.text}" for a in stmt.args)
        return [f"{pad}RAISE NOTICE {quote_literal(stmt.format)}{args};"]
    if isinstance(stmt, ExecuteDynamic):
        into = f" INTO {', '.join(stmt.into_targets)}" if stmt.into_targets else ""
        return [f"{pad}EXECUTE {stmt.command.text}{into};"]
    if isinstance(stmt, EmbeddedSql):
        if stmt.dml_kind == "perform":
            return [f"{pad}PERFORM {stmt.query.text};"]
        if stmt.into_targets:
            # re-attach INTO after the select list is not reconstructible in
            # general; emit at the end, which PostgreSQL accepts
            return [f"{pad}{stmt.query.text} INTO {', '.join(stmt.into_targets)};"]
        return [f"{pad}{stmt.query.text};"]
    if isinstance(stmt, NullStmt):
        return [f"{pad}NULL;"]
    raise TypeError(f"unprintable statement {type(stmt).__name__}")
