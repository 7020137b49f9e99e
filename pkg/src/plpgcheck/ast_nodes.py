"""Typed AST for the supported PL/pgSQL subset.

Every node carries a SourceSpan over the original file. SQL expressions are
not parsed: they are captured verbatim with an identifier scan, because the
engine itself is the expression oracle. `same_shape` compares trees
structurally while ignoring spans and derived annotations; it backs the
parse/print round-trip property.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .source import SourceSpan

# Normalized base-type names; raw declaration text is kept verbatim for
# faithful re-emission in casts.
_TYPE_NORMALIZATION = {
    "int": "int4", "integer": "int4", "int4": "int4",
    "bigint": "int8", "int8": "int8",
    "smallint": "int2", "int2": "int2",
    "float": "float8", "float8": "float8", "double precision": "float8",
    "real": "float4", "float4": "float4",
    "numeric": "numeric", "decimal": "numeric",
    "boolean": "bool", "bool": "bool",
    "text": "text",
    "varchar": "varchar", "character varying": "varchar",
    "char": "bpchar", "character": "bpchar", "bpchar": "bpchar",
    "void": "void",
}

INTEGER_BASES = frozenset({"int2", "int4", "int8"})
FLOAT_BASES = frozenset({"float4", "float8", "numeric"})


@dataclass(frozen=True)
class SqlType:
    """A declared SQL type, e.g. CHAR, CHAR(2), NUMERIC(10,2), INT."""

    raw: str                      # verbatim declaration text
    base: str                     # normalized: int4, bpchar, text, ...
    length: int | None = None     # first typmod number, if written
    is_array: bool = False

    @property
    def is_char_unspecified(self) -> bool:
        return self.base == "bpchar" and self.length is None and not self.is_array

    @staticmethod
    def normalize_base(words: str) -> str:
        return _TYPE_NORMALIZATION.get(words.lower(), words.lower())


@dataclass
class Expression:
    """A verbatim SQL expression (or embedded query) with its variable refs.

    `refs` is the identifier scan result; `var_types` and `type_class` are
    filled in by typecheck.
    """

    text: str
    span: SourceSpan
    refs: frozenset[str] = frozenset()
    var_types: dict[str, SqlType] = field(default_factory=dict)
    type_class: str | None = None  # "integer" | "float" | "mixed-unknown"


@dataclass
class VarDecl:
    name: str
    sql_type: SqlType
    initializer: Expression | None
    span: SourceSpan
    name_span: SourceSpan | None = None
    type_span: SourceSpan | None = None

    @property
    def length_unspecified(self) -> bool:
        return self.sql_type.is_char_unspecified


@dataclass
class Param:
    name: str
    sql_type: SqlType
    span: SourceSpan
    mode: str = "IN"
    name_span: SourceSpan | None = None
    type_span: SourceSpan | None = None

    @property
    def length_unspecified(self) -> bool:
        return self.sql_type.is_char_unspecified


# ── Statements ───────────────────────────────────────────────────


@dataclass
class Statement:
    span: SourceSpan

    @property
    def kind(self) -> str:
        return _KIND_NAMES[type(self)]


@dataclass
class Block:
    statements: list[Statement]
    span: SourceSpan


@dataclass
class Assign(Statement):
    target: str
    expr: Expression
    target_span: SourceSpan | None = None


@dataclass
class If(Statement):
    cond: Expression
    then_block: Block
    elifs: list[tuple[Expression, Block]]
    else_block: Block | None


@dataclass
class CaseArm:
    conds: list[Expression]   # WHEN a, b THEN — multiple values in simple form
    block: Block


@dataclass
class CaseWhen(Statement):
    selector: Expression | None     # None = searched CASE
    arms: list[CaseArm]
    else_block: Block | None


@dataclass
class Assert(Statement):
    cond: Expression
    message: Expression | None


@dataclass
class Loop(Statement):
    body: Block
    label: str | None = None


@dataclass
class While(Statement):
    cond: Expression
    body: Block
    label: str | None = None


@dataclass
class ForRange(Statement):
    var: str
    lo: Expression
    hi: Expression
    step: Expression | None
    reverse: bool
    body: Block
    label: str | None = None


@dataclass
class ForEach(Statement):
    var: str
    array_expr: Expression
    body: Block
    label: str | None = None


@dataclass
class CursorFor(Statement):
    var: str
    query: Expression
    body: Block
    label: str | None = None


@dataclass
class Continue(Statement):
    label: str | None = None
    when: Expression | None = None


@dataclass
class Exit(Statement):
    label: str | None = None
    when: Expression | None = None


@dataclass
class Return(Statement):
    expr: Expression | None = None


@dataclass
class RaiseNotice(Statement):
    format: str                     # decoded literal text
    args: list[Expression] = field(default_factory=list)
    format_span: SourceSpan | None = None


@dataclass
class ExecuteDynamic(Statement):
    command: Expression
    into_targets: list[str] | None = None
    has_using: bool = False


@dataclass
class EmbeddedSql(Statement):
    query: Expression               # verbatim, INTO clause removed
    into_targets: list[str] | None = None
    dml_kind: str = "select"        # select | perform | insert | update | delete | other
    into_spans: list[SourceSpan] = field(default_factory=list)
    has_returning: bool = False


@dataclass
class NullStmt(Statement):
    pass


_KIND_NAMES: dict[type, str] = {
    Assign: "assign",
    If: "if",
    CaseWhen: "case_when",
    Assert: "assert",
    Loop: "loop",
    While: "while",
    ForRange: "for_range",
    ForEach: "foreach",
    CursorFor: "cursor_for",
    Continue: "continue",
    Exit: "exit",
    Return: "return",
    RaiseNotice: "raise_notice",
    ExecuteDynamic: "execute_dynamic",
    EmbeddedSql: "embedded_sql",
    NullStmt: "null",
}

TABLE_UNITS = (
    "declare", "assign", "return",
    "if", "case_when", "assert",
    "loop", "while", "for_range", "foreach", "continue", "exit", "cursor_for",
)


@dataclass
class PlsqlFunction:
    name: str
    params: list[Param]
    return_type: SqlType
    declarations: list[VarDecl]
    body: Block
    span: SourceSpan
    or_replace: bool = False
    name_span: SourceSpan | None = None

    @property
    def returns_void(self) -> bool:
        return self.return_type.base == "void"

    def scope(self) -> dict[str, SqlType]:
        out = {p.name: p.sql_type for p in self.params}
        out.update({d.name: d.sql_type for d in self.declarations})
        return out


# ── Structural equality (ignores spans and annotations) ─────────

_IGNORED_FIELDS = {
    "span", "name_span", "type_span", "target_span", "format_span",
    "into_spans", "var_types", "type_class", "refs",
}


def same_shape(a: object, b: object) -> bool:
    """Structural AST equality ignoring spans and derived annotations."""
    if type(a) is not type(b):
        return False
    if dataclasses.is_dataclass(a):
        for f in dataclasses.fields(a):
            if f.name in _IGNORED_FIELDS:
                continue
            if not same_shape(getattr(a, f.name), getattr(b, f.name)):
                return False
        return True
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(same_shape(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(same_shape(v, b[k]) for k, v in a.items())
    if isinstance(a, str):
        return a == b
    return a == b


def walk_statements(block: Block):
    """Yield every statement in the block, depth-first, pre-order."""
    for stmt in block.statements:
        yield stmt
        for sub in _child_blocks(stmt):
            yield from walk_statements(sub)


def _child_blocks(stmt: Statement) -> list[Block]:
    if isinstance(stmt, If):
        blocks = [stmt.then_block] + [b for _, b in stmt.elifs]
        if stmt.else_block:
            blocks.append(stmt.else_block)
        return blocks
    if isinstance(stmt, CaseWhen):
        blocks = [arm.block for arm in stmt.arms]
        if stmt.else_block:
            blocks.append(stmt.else_block)
        return blocks
    if isinstance(stmt, (Loop, While, ForRange, ForEach, CursorFor)):
        return [stmt.body]
    return []
