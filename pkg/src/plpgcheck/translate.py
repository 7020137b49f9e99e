"""Compile a PL/pgSQL function into an equivalent literal SQL query.

Every variable becomes a column of a state tuple; every update becomes a new
row. Declarations and assignments append `LATERAL (SELECT expr::type)`
joins; conditionals split the row across mutually exclusive `UNION ALL`
branches; loops become recursive CTEs whose terminal state is the
maximal-iteration row. Expressions travel verbatim so the database engine
stays the sole authority on expression semantics; in particular FOR-range
bounds are embedded uncast, which is what lets the engine's implicit
bound rounding surface as a visible divergence.

Synthetic columns (reserved `__` prefix, so user names cannot collide):

    __iter    global iteration counter, monotone across all loops; `fuel`
              bounds it program-wide
    __ctrl    'NORMAL' | 'CONTINUE[:label]' | 'EXIT[:label]' | 'RETURNED'
    __ret     return slot, typed as the declared return type
    __notes   RAISE NOTICE output, in order
    __cmds    command strings captured from EXECUTE (never executed here)
    __err     SQLSTATE of a synthetic engine error (assert failure, case
              not found, missing RETURN), else NULL
    __errmsg  its message
    __fuel    true when some loop stopped only because fuel ran out
"""

from __future__ import annotations

import re
from collections.abc import Callable
from dataclasses import dataclass, field

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
    Expression,
    ForEach,
    ForRange,
    If,
    Loop,
    NullStmt,
    PlsqlFunction,
    RaiseNotice,
    Return,
    SqlType,
    Statement,
    VarDecl,
    While,
)
from .source import SourceSpan

DEFAULT_FUEL = 100_000

# Logical names exposed in column_map for the synthetic columns.
SYNTH_COLS: list[tuple[str, str]] = [
    ("__iter", "iter"),
    ("__ctrl", "ctrl"),
    ("__ret", "ret"),
    ("__notes", "notices"),
    ("__cmds", "exec_cmds"),
    ("__err", "err"),
    ("__errmsg", "errmsg"),
    ("__fuel", "fuel_exhausted"),
]

_IDENT_RE = re.compile(r"^[a-z_][a-z0-9_]*$")

# A fragment maps a subquery producing state-tuple rows to another one.
QueryFragment = Callable[[str], str]


def identity_fragment(input_sql: str) -> str:
    return input_sql


def compose_fragments(fragments: list[QueryFragment]) -> QueryFragment:
    def composed(input_sql: str) -> str:
        out = input_sql
        for frag in fragments:
            out = frag(out)
        return out
    return composed


class Unsupported(Exception):
    """A construct outside the supported translation set. Never swallowed."""

    def __init__(self, span: SourceSpan, unit: str, message: str) -> None:
        super().__init__(message)
        self.span = span
        self.unit = unit
        self.message = message


@dataclass
class EquivalentQuery:
    sql_text: str
    column_map: dict[str, int]                 # logical name -> 1-based position
    param_placeholders: list[tuple[str, str]]  # (param name, verbatim type text)
    final_projection: str
    return_type: str                           # normalized base, e.g. int4, void
    fuel: int

    def to_json(self) -> dict:
        return {
            "sql": self.sql_text,
            "column_map": self.column_map,
            "params": [{"position": i + 1, "name": n, "type": t}
                       for i, (n, t) in enumerate(self.param_placeholders)],
            "final_projection": self.final_projection,
            "return_type": self.return_type,
            "fuel": self.fuel,
        }


@dataclass
class _Ctx:
    cols: list[str] = field(default_factory=list)   # user columns, in order
    counter: int = 0

    def gensym(self, prefix: str) -> str:
        self.counter += 1
        return f"__{prefix}{self.counter}"

    def all_cols(self) -> list[str]:
        return self.cols + [phys for phys, _ in SYNTH_COLS]


class Translator:
    def __init__(self, fn: PlsqlFunction, fuel: int = DEFAULT_FUEL) -> None:
        if fuel <= 0:
            raise ValueError("fuel must be positive")
        self.fn = fn
        self.fuel = fuel
        self.ctx = _Ctx()
        self.ret_raw = "text" if fn.returns_void else fn.return_type.raw
        self.types: dict[str, SqlType] = fn.scope()

    # ── projection helpers ───────────────────────────────────────

    def _proj(self, overrides: dict[str, str] | None = None,
              drop: set[str] | None = None,
              extra: list[tuple[str, str]] | None = None) -> str:
        overrides = overrides or {}
        drop = drop or set()
        items = []
        for col in self.ctx.all_cols():
            if col in drop:
                continue
            if col in overrides:
                items.append(f"{overrides[col]} AS {col}")
            else:
                items.append(col)
        for expr, name in (extra or []):
            items.append(f"{expr} AS {name}")
        return ",\n       ".join(items)

    def _select_cols(self, drop: set[str] | None = None) -> str:
        drop = drop or set()
        return ", ".join(c for c in self.ctx.all_cols() if c not in drop)

    # ── primitive fragments ──────────────────────────────────────

    def _assign_fragment(self, target: str, expr_text: str,
                         cast: str | None, set_returned: bool = False) -> QueryFragment:
        """Shadow-by-projection assignment via a guarded LATERAL select."""
        def frag(input_sql: str) -> str:
            k = self.ctx.gensym("l")
            s = self.ctx.gensym("s")
            casted = f"({expr_text})::{cast}" if cast else f"({expr_text})"
            overrides = {target: f"{k}.__v"}
            if set_returned:
                overrides["__ctrl"] = (
                    f"CASE WHEN {s}.__ctrl = 'NORMAL' THEN 'RETURNED' ELSE {s}.__ctrl END"
                )
            return (
                f"SELECT {self._proj(overrides)}\n"
                f"FROM (\n{input_sql}\n) AS {s}\n"
                f"CROSS JOIN LATERAL (SELECT CASE WHEN {s}.__ctrl = 'NORMAL' THEN {casted}\n"
                f"  ELSE {s}.{target} END) AS {k}(__v)"
            )
        return frag

    def _declare_fragment(self, name: str, expr_text: str | None,
                          cast: str | None) -> QueryFragment:
        """Add a new column; NULL when no initializer."""
        def frag(input_sql: str) -> str:
            k = self.ctx.gensym("l")
            s = self.ctx.gensym("s")
            if expr_text is None:
                value = f"NULL::{cast}" if cast else "NULL"
            else:
                casted = f"({expr_text})::{cast}" if cast else f"({expr_text})"
                value = f"CASE WHEN {s}.__ctrl = 'NORMAL' THEN {casted} ELSE NULL END"
            keep = self._select_cols()
            self.ctx.cols.append(name)
            return (
                f"SELECT {keep}, {k}.__v AS {name}\n"
                f"FROM (\n{input_sql}\n) AS {s}\n"
                f"CROSS JOIN LATERAL (SELECT {value}) AS {k}(__v)"
            )
        return frag

    def _project_fragment(self, overrides: dict[str, str],
                          drop: set[str] | None = None) -> QueryFragment:
        def frag(input_sql: str) -> str:
            s = self.ctx.gensym("s")
            body = self._proj(overrides, drop=drop)
            if drop:
                for col in drop:
                    if col in self.ctx.cols:
                        self.ctx.cols.remove(col)
            return f"SELECT {body}\nFROM (\n{input_sql}\n) AS {s}"
        return frag

    def _error_fragment(self, sqlstate: str, message_expr: str) -> QueryFragment:
        """Record a synthetic engine error and halt (ctrl := RETURNED)."""
        return self._project_fragment({
            "__err": f"CASE WHEN __ctrl = 'NORMAL' THEN '{sqlstate}' ELSE __err END",
            "__errmsg": f"CASE WHEN __ctrl = 'NORMAL' THEN {message_expr} ELSE __errmsg END",
            "__ctrl": "CASE WHEN __ctrl = 'NORMAL' THEN 'RETURNED' ELSE __ctrl END",
        })

    # ── statements ───────────────────────────────────────────────

    def _block_fragment(self, block: Block, loops: list[str | None]) -> QueryFragment:
        return compose_fragments([self._stmt_fragment(s, loops) for s in block.statements])

    def _stmt_fragment(self, stmt: Statement, loops: list[str | None]) -> QueryFragment:
        if isinstance(stmt, Assign):
            if stmt.target not in self.types and stmt.target not in self.ctx.cols:
                raise Unsupported(stmt.span, "assign",
                                  f"assignment to unknown variable {stmt.target}")
            cast = self.types[stmt.target].raw if stmt.target in self.types else None
            return self._assign_fragment(stmt.target, stmt.expr.text, cast)
        if isinstance(stmt, Return):
            if stmt.expr is None:
                return self._project_fragment({
                    "__ctrl": "CASE WHEN __ctrl = 'NORMAL' THEN 'RETURNED' ELSE __ctrl END",
                })
            if self.fn.returns_void:
                raise Unsupported(stmt.span, "return",
                                  "RETURN with a value in a function returning VOID")
            return self._assign_fragment("__ret", stmt.expr.text, self.ret_raw,
                                         set_returned=True)
        if isinstance(stmt, If):
            arms = [(stmt.cond, stmt.then_block)] + list(stmt.elifs)
            conds = [(f"(({c.text}) IS TRUE)", b) for c, b in arms]
            else_frag = (self._block_fragment(stmt.else_block, loops)
                         if stmt.else_block is not None else identity_fragment)
            return self._branch_fragment(conds, else_frag, loops)
        if isinstance(stmt, CaseWhen):
            return self._case_fragment(stmt, loops)
        if isinstance(stmt, Assert):
            msg = f"({stmt.message.text})::text" if stmt.message else "'assertion failed'"
            return self._assert_fragment(stmt.cond.text, msg)
        if isinstance(stmt, (Loop, While, ForRange, ForEach, CursorFor)):
            return self._loop_like_fragment(stmt, loops)
        if isinstance(stmt, Continue):
            return self._flow_fragment("CONTINUE", stmt.label, stmt.when, stmt.span, loops)
        if isinstance(stmt, Exit):
            return self._flow_fragment("EXIT", stmt.label, stmt.when, stmt.span, loops)
        if isinstance(stmt, RaiseNotice):
            return self._notice_fragment(stmt)
        if isinstance(stmt, ExecuteDynamic):
            if stmt.into_targets is not None:
                raise Unsupported(stmt.span, "execute",
                                  "EXECUTE ... INTO cannot be mirrored: the equivalent "
                                  "query never executes the dynamic command")
            if stmt.has_using:
                raise Unsupported(stmt.span, "execute", "EXECUTE ... USING is not supported")
            return self._project_fragment({
                "__cmds": f"CASE WHEN __ctrl = 'NORMAL' THEN "
                          f"array_append(__cmds, ({stmt.command.text})::text) ELSE __cmds END",
            })
        if isinstance(stmt, EmbeddedSql):
            return self._embedded_fragment(stmt)
        if isinstance(stmt, NullStmt):
            return identity_fragment
        raise Unsupported(stmt.span, stmt.kind, f"statement {stmt.kind} is not translatable")

    # ── conditionals ────────────────────────────────────────────

    def _branch_fragment(self, conds: list[tuple[str, Block]],
                         else_frag: QueryFragment,
                         loops: list[str | None]) -> QueryFragment:
        """Mutually exclusive guarded branches merged with UNION ALL."""
        def frag(input_sql: str) -> str:
            k = self.ctx.gensym("b")
            s = self.ctx.gensym("s")
            m = self.ctx.gensym("m")
            cte_parts = []
            flag_names = []
            prev = f"{k}_0"
            cte_parts.append(f"{prev} AS (\nSELECT * FROM (\n{input_sql}\n) AS {s}\n)")
            for idx, (cond_sql, _) in enumerate(conds):
                flag = f"{k}_c{idx}"
                nots = "".join(f" AND NOT {f}" for f in flag_names)
                guard = f"CASE WHEN __ctrl = 'NORMAL'{nots} THEN {cond_sql} ELSE false END"
                nxt = f"{k}_{idx + 1}"
                cte_parts.append(f"{nxt} AS (\nSELECT *, {guard} AS {flag} FROM {prev}\n)")
                flag_names.append(flag)
                prev = nxt
            cols = self._select_cols()
            pieces = []
            snapshot = list(self.ctx.cols)
            for idx, (_, block) in enumerate(conds):
                arm_input = f"SELECT {cols} FROM {prev} WHERE {flag_names[idx]}"
                arm_frag = self._block_fragment(block, loops)
                arm_sql = arm_frag(arm_input)
                if self.ctx.cols != snapshot:
                    raise Unsupported(block.span, "if", "a branch may not add declarations")
                pieces.append(f"SELECT {cols} FROM (\n{arm_sql}\n) AS {k}_r{idx}")
            else_guard = "__ctrl = 'NORMAL'" + "".join(f" AND NOT {f}" for f in flag_names)
            else_input = f"SELECT {cols} FROM {prev} WHERE {else_guard}"
            else_sql = else_frag(else_input)
            if self.ctx.cols != snapshot:
                raise Unsupported(conds[0][1].span, "if", "a branch may not add declarations")
            pieces.append(f"SELECT {cols} FROM (\n{else_sql}\n) AS {k}_re")
            pieces.append(f"SELECT {cols} FROM {prev} WHERE __ctrl <> 'NORMAL'")
            union = "\nUNION ALL\n".join(pieces)
            return (f"SELECT {cols} FROM (\nWITH {', '.join(cte_parts)}\n"
                    f"{union}\n) AS {m}")
        return frag

    def _case_fragment(self, stmt: CaseWhen, loops: list[str | None]) -> QueryFragment:
        if stmt.selector is not None:
            sel = self.ctx.gensym("sel")
            decl = self._declare_fragment(sel, stmt.selector.text, None)
            conds = []
            for arm in stmt.arms:
                eqs = " OR ".join(f"{sel} = ({c.text})" for c in arm.conds)
                conds.append((f"(({eqs}) IS TRUE)", arm.block))
            else_frag = (self._block_fragment(stmt.else_block, loops)
                         if stmt.else_block is not None
                         else self._error_fragment("20000", "'case not found'"))
            branch = self._branch_fragment(conds, else_frag, loops)
            dropper = self._project_fragment({}, drop={sel})
            return compose_fragments([decl, branch, dropper])
        conds = [(f"(({arm.conds[0].text}) IS TRUE)", arm.block) for arm in stmt.arms]
        else_frag = (self._block_fragment(stmt.else_block, loops)
                     if stmt.else_block is not None
                     else self._error_fragment("20000", "'case not found'"))
        return self._branch_fragment(conds, else_frag, loops)

    def _assert_fragment(self, cond_text: str, msg_sql: str) -> QueryFragment:
        # nested CASE keeps the condition (and message) unevaluated on rows
        # that are already past a RETURN; AND gives no evaluation-order pledge
        fail = f"(({cond_text}) IS NOT TRUE)"

        def guarded(then_sql: str, keep: str) -> str:
            return (f"CASE WHEN __ctrl = 'NORMAL' THEN "
                    f"(CASE WHEN {fail} THEN {then_sql} ELSE {keep} END) ELSE {keep} END")

        return self._project_fragment({
            "__err": guarded("'P0004'", "__err"),
            "__errmsg": guarded(msg_sql, "__errmsg"),
            "__ctrl": guarded("'RETURNED'", "__ctrl"),
        })

    # ── control flow inside loops ───────────────────────────────

    def _flow_fragment(self, word: str, label: str | None, when: Expression | None,
                       span: SourceSpan, loops: list[str | None]) -> QueryFragment:
        if not loops:
            raise Unsupported(span, word.lower(), f"{word} outside of a loop")
        if label is not None and label not in loops:
            raise Unsupported(span, word.lower(), f"{word} references unknown label {label}")
        value = f"{word}:{label}" if label else word
        if when is None:
            return self._project_fragment({
                "__ctrl": f"CASE WHEN __ctrl = 'NORMAL' THEN '{value}' ELSE __ctrl END",
            })
        return self._project_fragment({
            "__ctrl": f"CASE WHEN __ctrl = 'NORMAL' THEN "
                      f"(CASE WHEN (({when.text}) IS TRUE) THEN '{value}' ELSE __ctrl END) "
                      f"ELSE __ctrl END",
        })

    # ── loops ────────────────────────────────────────────────────

    def _loop_like_fragment(self, stmt, loops: list[str | None]) -> QueryFragment:
        label = stmt.label
        if isinstance(stmt, Loop):
            return self._loop_machine(
                entry=[], cond="TRUE", body_block=stmt.body, incr=None,
                post_drop=[], post_restore=[], label=label, loops=loops, span=stmt.span)
        if isinstance(stmt, While):
            return self._loop_machine(
                entry=[], cond=f"({stmt.cond.text})", body_block=stmt.body, incr=None,
                post_drop=[], post_restore=[], label=label, loops=loops, span=stmt.span)
        if isinstance(stmt, ForRange):
            return self._for_range(stmt, loops)
        if isinstance(stmt, ForEach):
            return self._for_each(stmt, loops)
        if isinstance(stmt, CursorFor):
            return self._cursor_for(stmt, loops)
        raise Unsupported(stmt.span, stmt.kind, "unknown loop form")

    def _for_range(self, stmt: ForRange, loops: list[str | None]) -> QueryFragment:
        var = stmt.var
        label = stmt.label
        ctr = self.ctx.gensym("ctr")
        hi = self.ctx.gensym("hi")
        stp = self.ctx.gensym("stp")
        post_drop = [ctr, hi, stp]
        post_restore: list[tuple[str, str]] = []
        entry_frags: list[QueryFragment] = []
        # The loop iterates a hidden counter, exactly like the engine:
        # assigning to the loop variable inside the body must not change
        # the iteration. Bounds stay verbatim and uncast, snapshotted once
        # at entry, so the engine's implicit bound rounding remains visible
        # on the PL/pgSQL side only.
        entry_frags.append(self._declare_fragment(ctr, stmt.lo.text, None))
        entry_frags.append(self._declare_fragment(hi, stmt.hi.text, None))
        entry_frags.append(self._declare_fragment(
            stp, stmt.step.text if stmt.step else "1", None))
        if var in self.types:  # loop var shadows an outer variable
            sav = self.ctx.gensym("sav")
            entry_frags.append(self._declare_fragment(sav, var, self.types[var].raw))
            # retype the column from the counter so the CTE's init and step
            # terms unify even when the outer variable is not numeric
            entry_frags.append(self._assign_fragment(var, ctr, None))
            post_restore.append((var, sav))
            post_drop.append(sav)
        else:
            entry_frags.append(self._declare_fragment(var, ctr, None))
            post_drop.append(var)
        cond = f"({ctr} >= {hi})" if stmt.reverse else f"({ctr} <= {hi})"
        op = "-" if stmt.reverse else "+"
        assign_var = self._assign_fragment(var, ctr, None)
        incr = self._guarded_incr(ctr, f"{ctr} {op} {stp}", label)
        return self._loop_machine(
            entry=entry_frags, cond=cond, body_block=stmt.body, incr=incr,
            body_prefix=[assign_var], post_drop=post_drop,
            post_restore=post_restore, label=label, loops=loops, span=stmt.span)

    def _for_each(self, stmt: ForEach, loops: list[str | None]) -> QueryFragment:
        if stmt.var not in self.types:
            raise Unsupported(stmt.span, "foreach",
                              f"FOREACH target {stmt.var} must be a declared variable")
        arr = self.ctx.gensym("arr")
        ord_ = self.ctx.gensym("ord")
        entry = [
            self._declare_fragment(arr, stmt.array_expr.text, None),
            self._declare_fragment(ord_, "0", "int"),
        ]
        cond = f"({ord_} < coalesce(array_length({arr}, 1), 0))"
        elem = self._assign_fragment(stmt.var, f"{arr}[{ord_} + 1]",
                                     self.types[stmt.var].raw)
        incr = self._guarded_incr(ord_, f"{ord_} + 1", stmt.label)
        return self._loop_machine(
            entry=entry, cond=cond, body_block=stmt.body, incr=incr,
            body_prefix=[elem], post_drop=[arr, ord_], post_restore=[],
            label=stmt.label, loops=loops, span=stmt.span)

    def _cursor_for(self, stmt: CursorFor, loops: list[str | None]) -> QueryFragment:
        if stmt.var not in self.types:
            raise Unsupported(
                stmt.span, "cursor_for",
                f"cursor FOR over a record variable ({stmt.var}) is not supported; "
                "declare a scalar variable and select a single column")
        cur = self.ctx.gensym("cur")
        ord_ = self.ctx.gensym("ord")
        entry = [
            self._declare_fragment(cur, f"ARRAY({stmt.query.text})", None),
            self._declare_fragment(ord_, "0", "int"),
        ]
        cond = f"({ord_} < coalesce(array_length({cur}, 1), 0))"
        elem = self._assign_fragment(stmt.var, f"{cur}[{ord_} + 1]",
                                     self.types[stmt.var].raw)
        incr = self._guarded_incr(ord_, f"{ord_} + 1", stmt.label)
        return self._loop_machine(
            entry=entry, cond=cond, body_block=stmt.body, incr=incr,
            body_prefix=[elem], post_drop=[cur, ord_], post_restore=[],
            label=stmt.label, loops=loops, span=stmt.span)

    def _eligible(self, label: str | None) -> str:
        values = ["'NORMAL'", "'CONTINUE'"]
        if label:
            values.append(f"'CONTINUE:{label}'")
        return ", ".join(values)

    def _guarded_incr(self, var: str, expr: str, label: str | None) -> QueryFragment:
        elig = self._eligible(label)
        return self._project_fragment({
            var: f"CASE WHEN __ctrl IN ({elig}) THEN {expr} ELSE {var} END",
        })

    def _loop_machine(self, *, entry: list[QueryFragment], cond: str,
                      body_block: Block, incr: QueryFragment | None,
                      post_drop: list[str], post_restore: list[tuple[str, str]],
                      label: str | None, loops: list[str | None], span: SourceSpan,
                      body_prefix: list[QueryFragment] | None = None) -> QueryFragment:
        def frag(input_sql: str) -> str:
            k = self.ctx.gensym("run")
            entry_sql = compose_fragments(entry)(input_sql) if entry else input_sql
            cols = self._select_cols()
            elig = self._eligible(label)
            s = self.ctx.gensym("s")
            guard = (f"(CASE WHEN {s}.__ctrl IN ({elig}) THEN ({cond} IS TRUE) "
                     f"ELSE false END) AND {s}.__iter < {self.fuel}")
            reset_proj = self._proj({"__iter": "__iter + 1", "__ctrl": "'NORMAL'"})
            reset = f"SELECT {reset_proj}\nFROM {k} AS {s}\nWHERE {guard}"
            body = self._block_fragment(body_block, loops + [label])
            if body_prefix:
                body = compose_fragments(list(body_prefix) + [body])
            step_sql = body(reset)
            if incr is not None:
                step_sql = incr(step_sql)
            i_alias = self.ctx.gensym("i")
            t_alias = self.ctx.gensym("t")
            cte = (
                f"WITH RECURSIVE {k} AS (\n"
                f"SELECT {cols} FROM (\n{entry_sql}\n) AS {i_alias}\n"
                f"UNION ALL\n"
                f"SELECT {cols} FROM (\n{step_sql}\n) AS {t_alias}\n"
                f")\n"
                f"SELECT {cols} FROM {k} ORDER BY __iter DESC LIMIT 1"
            )
            # terminal projection: consume our control values, detect fuel
            # exhaustion, restore shadowed vars, drop loop locals
            consumed = ["'EXIT'", "'CONTINUE'"]
            if label:
                consumed += [f"'EXIT:{label}'", f"'CONTINUE:{label}'"]
            ctrl_post = (f"CASE WHEN __ctrl IN ({', '.join(consumed)}) THEN 'NORMAL' "
                         f"ELSE __ctrl END")
            fuel_post = (
                f"CASE WHEN __ctrl IN ({elig}) AND __iter >= {self.fuel} "
                f"AND (CASE WHEN __ctrl IN ({elig}) THEN ({cond} IS TRUE) ELSE false END) "
                f"THEN true ELSE __fuel END"
            )
            overrides: dict[str, str] = {"__ctrl": ctrl_post, "__fuel": fuel_post}
            for var, sav in post_restore:
                overrides[var] = sav
            lo_alias = self.ctx.gensym("lo")
            out = (
                f"SELECT {self._proj(overrides, drop=set(post_drop))}\n"
                f"FROM (\n{cte}\n) AS {lo_alias}"
            )
            for col in post_drop:
                if col in self.ctx.cols:
                    self.ctx.cols.remove(col)
            return out
        return frag

    # ── side channels ────────────────────────────────────────────

    def _notice_fragment(self, stmt: RaiseNotice) -> QueryFragment:
        pieces: list[str] = []
        arg_iter = iter(stmt.args)
        used = 0
        buf: list[str] = []
        i = 0
        fmt = stmt.format
        while i < len(fmt):
            ch = fmt[i]
            if ch == "%":
                if i + 1 < len(fmt) and fmt[i + 1] == "%":
                    buf.append("%")
                    i += 2
                    continue
                if buf:
                    pieces.append(_quote(''.join(buf)))
                    buf = []
                try:
                    arg = next(arg_iter)
                except StopIteration:
                    return self._error_fragment(
                        "42601", "'too few parameters specified for RAISE'")
                pieces.append(f"coalesce(({arg.text})::text, '<NULL>')")
                used += 1
                i += 1
                continue
            buf.append(ch)
            i += 1
        if buf or not pieces:
            pieces.append(_quote(''.join(buf)))
        if used < len(stmt.args):
            return self._error_fragment(
                "42601", "'too many parameters specified for RAISE'")
        text_expr = " || ".join(pieces)
        return self._project_fragment({
            "__notes": f"CASE WHEN __ctrl = 'NORMAL' THEN "
                       f"array_append(__notes, ({text_expr})) ELSE __notes END",
        })

    def _embedded_fragment(self, stmt: EmbeddedSql) -> QueryFragment:
        if stmt.dml_kind in ("insert", "update", "delete"):
            raise Unsupported(
                stmt.span, "embedded_sql",
                f"embedded {stmt.dml_kind.upper()} has side effects the equivalent "
                "query cannot replay")
        if stmt.dml_kind == "perform":
            def perform_frag(input_sql: str) -> str:
                s = self.ctx.gensym("s")
                q = self.ctx.gensym("q")
                return (
                    f"SELECT {self._select_cols()}\n"
                    f"FROM (\n{input_sql}\n) AS {s}\n"
                    f"LEFT JOIN LATERAL (SELECT 1 FROM ({stmt.query.text}\n) AS {q}_r "
                    f"WHERE {s}.__ctrl = 'NORMAL' LIMIT 1) AS {q} ON TRUE"
                )
            return perform_frag
        targets = stmt.into_targets or []
        if not targets:
            raise Unsupported(stmt.span, "embedded_sql",
                              "embedded SELECT without INTO (use PERFORM)")
        for t in targets:
            if t not in self.types:
                raise Unsupported(stmt.span, "embedded_sql",
                                  f"INTO target {t} is not a declared variable")

        def frag(input_sql: str) -> str:
            s = self.ctx.gensym("s")
            q = self.ctx.gensym("q")
            names = [f"__c{j}" for j in range(len(targets))]
            overrides = {
                t: f"CASE WHEN {s}.__ctrl = 'NORMAL' THEN ({q}.{n})::{self.types[t].raw} "
                   f"ELSE {s}.{t} END"
                for t, n in zip(targets, names)
            }
            return (
                f"SELECT {self._proj(overrides)}\n"
                f"FROM (\n{input_sql}\n) AS {s}\n"
                f"LEFT JOIN LATERAL (SELECT * FROM ({stmt.query.text}\n) AS {q}_r "
                f"WHERE {s}.__ctrl = 'NORMAL' LIMIT 1) AS {q}({', '.join(names)}) ON TRUE"
            )
        return frag

    # ── whole function ───────────────────────────────────────────

    def translate(self) -> EquivalentQuery:
        fn = self.fn
        for name in list(self.types):
            if not _IDENT_RE.match(name):
                raise Unsupported(fn.span, "declare",
                                  f"identifier {name!r} is outside the supported subset "
                                  "(plain lower-case identifiers only)")
            if name.startswith("__"):
                raise Unsupported(fn.span, "declare",
                                  f"identifier {name} collides with reserved __ prefix")

        placeholders = [(p.name, p.sql_type.raw) for p in fn.params]
        init_parts = []
        for idx, p in enumerate(fn.params, start=1):
            init_parts.append(
                f"CROSS JOIN LATERAL (SELECT (${idx})::{p.sql_type.raw}) "
                f"AS __p{idx}({p.name})")
            self.ctx.cols.append(p.name)
        synth_init = (
            f"0 AS __iter, 'NORMAL'::text AS __ctrl, NULL::{self.ret_raw} AS __ret,\n"
            f"       ARRAY[]::text[] AS __notes, ARRAY[]::text[] AS __cmds,\n"
            f"       NULL::text AS __err, NULL::text AS __errmsg, false AS __fuel"
        )
        param_cols = "".join(f"{p.name}, " for p in fn.params)
        if fn.params:
            init = (f"SELECT {param_cols}{synth_init}\n"
                    f"FROM (SELECT) AS __seed\n" + "\n".join(init_parts))
        else:
            init = f"SELECT {synth_init}"

        decl_frags = [
            self._declare_fragment(d.name,
                                   d.initializer.text if d.initializer else None,
                                   d.sql_type.raw)
            for d in fn.declarations
        ]
        body = self._block_fragment(fn.body, loops=[])
        sql = compose_fragments(decl_frags + [body])(init)

        # missing RETURN in a non-void function is an engine error (2F005)
        if fn.returns_void:
            final_overrides: dict[str, str] = {}
        else:
            final_overrides = {
                "__err": "CASE WHEN __err IS NULL AND __ctrl <> 'RETURNED' "
                         "THEN '2F005' ELSE __err END",
                "__errmsg": "CASE WHEN __err IS NULL AND __ctrl <> 'RETURNED' "
                            "THEN 'control reached end of function without RETURN' "
                            "ELSE __errmsg END",
            }
        fin = self.ctx.gensym("fin")
        sql = (f"SELECT {self._proj(final_overrides)}\n"
               f"FROM (\n{sql}\n) AS {fin}")

        column_map: dict[str, int] = {}
        for pos, col in enumerate(self.ctx.all_cols(), start=1):
            logical = dict(SYNTH_COLS).get(col, col)
            column_map[logical] = pos
        return EquivalentQuery(
            sql_text=sql,
            column_map=column_map,
            param_placeholders=placeholders,
            final_projection="single row; maximal __iter per loop, ret column "
                             "carries the function result",
            return_type=fn.return_type.base,
            fuel=self.fuel,
        )


def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def translate(fn: PlsqlFunction, fuel: int = DEFAULT_FUEL) -> EquivalentQuery:
    """Translate a parsed, light-typechecked function. Raises Unsupported."""
    return Translator(fn, fuel).translate()


def translate_variable(fn: PlsqlFunction, decl_or_assign, fuel: int = DEFAULT_FUEL) -> QueryFragment:
    """Expose the per-unit variable rule (declare/assign/return) as a fragment."""
    t = Translator(fn, fuel)
    if isinstance(decl_or_assign, VarDecl):
        t.ctx.cols = [p.name for p in fn.params]
        init = decl_or_assign.initializer
        return t._declare_fragment(decl_or_assign.name,
                                   init.text if init else None,
                                   decl_or_assign.sql_type.raw)
    t.ctx.cols = [p.name for p in fn.params] + [d.name for d in fn.declarations]
    return t._stmt_fragment(decl_or_assign, loops=[])


def translate_conditional(fn: PlsqlFunction, stmt, fuel: int = DEFAULT_FUEL) -> QueryFragment:
    """Expose the per-unit conditional rule (if/case/assert) as a fragment."""
    t = Translator(fn, fuel)
    t.ctx.cols = [p.name for p in fn.params] + [d.name for d in fn.declarations]
    return t._stmt_fragment(stmt, loops=[])


def translate_loop(fn: PlsqlFunction, stmt, fuel: int = DEFAULT_FUEL) -> QueryFragment:
    """Expose the per-unit loop rule as a fragment."""
    t = Translator(fn, fuel)
    t.ctx.cols = [p.name for p in fn.params] + [d.name for d in fn.declarations]
    return t._stmt_fragment(stmt, loops=[None])


def translate_side_channels(fn: PlsqlFunction, stmt, fuel: int = DEFAULT_FUEL) -> QueryFragment:
    """Expose the side-channel rules (notice/execute/embedded) as a fragment."""
    t = Translator(fn, fuel)
    t.ctx.cols = [p.name for p in fn.params] + [d.name for d in fn.declarations]
    return t._stmt_fragment(stmt, loops=[])
