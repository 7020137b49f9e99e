"""Static mode: declarative inconsistency patterns over the typed AST.

No execution involved. Each built-in rule encodes one way a programmer's
SQL-informed reading diverges from the engine:

  P1  presumption  CHAR without length: SQL readers expect auto-truncation
                   to one character; the engine passes parameters through
  P2  overlook     non-integer FOR bound: the engine rounds it silently
  P3  equivocality SELECT ... INTO assigns variables, it does not create a
                   table as in SQL
  P4  equivocality EXECUTE runs a dynamic command string, not a prepared
                   statement; concatenating a parameter is an injection
                   surface
  P5  equivocality DML RETURNING without INTO silently discards the result

Users can add rules in a small declarative file format (see load_rules).
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .ast_nodes import (
    CursorFor,
    EmbeddedSql,
    ExecuteDynamic,
    Expression,
    ForEach,
    ForRange,
    PlsqlFunction,
    walk_statements,
)
from .lexer import TokenKind, lex
from .reports import Category, InconsistencyReport, Kind, Severity
from .source import SourceSpan, TextEdit, apply_edits
from .typecheck import CLASS_FLOAT, CLASS_MIXED_UNKNOWN


@dataclass
class PatternHit:
    span: SourceSpan
    message: str
    severity: Severity
    fix: list[TextEdit] | None = None


@dataclass
class PatternRule:
    id: str
    category: Category
    severity: Severity
    matcher: Callable[[PlsqlFunction], list[PatternHit]]
    message_template: str
    fix_builder: Callable | None = None
    doc_url: str = ""


class RuleFormatError(ValueError):
    def __init__(self, path: str, section: str, message: str) -> None:
        super().__init__(f"{path} [{section}]: {message}")
        self.path = path
        self.section = section


# ── expression iteration ────────────────────────────────────────

def iter_expressions(fn: PlsqlFunction):
    """Yield every expression in the function, declarations included."""
    for d in fn.declarations:
        if d.initializer is not None:
            yield d.initializer
    for stmt in walk_statements(fn.body):
        for attr in ("expr", "cond", "selector", "message", "command", "query",
                     "array_expr", "lo", "hi", "step", "when"):
            value = getattr(stmt, attr, None)
            if isinstance(value, Expression):
                yield value
        for pair in getattr(stmt, "elifs", []) or []:
            yield pair[0]
        for arm in getattr(stmt, "arms", []) or []:
            for cond in arm.conds:
                yield cond
        for arg in getattr(stmt, "args", []) or []:
            yield arg


_FLOW_TOKENS = {TokenKind.CONCAT, TokenKind.EQ, TokenKind.NEQ,
                TokenKind.LT, TokenKind.GT, TokenKind.LE, TokenKind.GE}


def _flows_into_concat_or_compare(fn: PlsqlFunction, name: str) -> list[Expression]:
    """Expressions where `name` meets a concatenation or comparison."""
    out = []
    for expr in iter_expressions(fn):
        if name not in expr.refs:
            continue
        if any(t.kind in _FLOW_TOKENS for t in lex(expr.text)):
            out.append(expr)
    return out


def _var_occurrences(expr: Expression, name: str) -> list[tuple[int, int]]:
    """Absolute byte spans of `name` as a bare identifier inside expr."""
    spans = []
    base = expr.span.start_byte
    toks = lex(expr.text)
    for i, tok in enumerate(toks):
        if tok.kind is TokenKind.WORD and tok.norm == name:
            prev = toks[i - 1] if i > 0 else None
            nxt = toks[i + 1] if i + 1 < len(toks) else None
            if prev is not None and prev.kind is TokenKind.DOT:
                continue
            if nxt is not None and nxt.kind in (TokenKind.DOT, TokenKind.LPAREN,
                                                TokenKind.TYPECAST):
                continue
            spans.append((base + tok.start, base + tok.end))
    return spans


# ── built-in rules ───────────────────────────────────────────────

def _p1_matcher(fn: PlsqlFunction) -> list[PatternHit]:
    hits: list[PatternHit] = []
    for entity, kind in [(p, "parameter") for p in fn.params] + \
                        [(d, "variable") for d in fn.declarations]:
        if not entity.length_unspecified:
            continue
        flows = _flows_into_concat_or_compare(fn, entity.name)
        if not flows:
            continue
        edits = [TextEdit(entity.type_span.start_byte, entity.type_span.end_byte,
                          "CHAR(1)")] if entity.type_span else []
        if kind == "parameter":
            # the engine discards parameter typmods, so the declaration edit
            # alone does not change runtime behavior: make the conversion
            # explicit where the value flows
            for expr in flows:
                for start, end in _var_occurrences(expr, entity.name):
                    edits.append(TextEdit(start, end, f"{entity.name}::char(1)"))
        hits.append(PatternHit(
            span=entity.span,
            message=(f"{kind} {entity.name} is CHAR with unspecified length: no "
                     f"automatic truncation is performed by the PL/pgSQL engine, "
                     f"the full value flows into concatenation/comparison"),
            severity=Severity.WARNING,
            fix=edits or None,
        ))
    return hits


def _p2_matcher(fn: PlsqlFunction) -> list[PatternHit]:
    hits: list[PatternHit] = []
    for stmt in walk_statements(fn.body):
        if not isinstance(stmt, ForRange):
            continue
        for bound in (stmt.lo, stmt.hi):
            if bound.type_class in (CLASS_FLOAT, CLASS_MIXED_UNKNOWN):
                hits.append(PatternHit(
                    span=bound.span,
                    message=(f"FOR bound {bound.text!r} is not integral: the loop "
                             f"bound is implicitly rounded, not floored"),
                    severity=Severity.WARNING,
                    fix=[TextEdit(bound.span.start_byte, bound.span.end_byte,
                                  f"FLOOR({bound.text})")],
                ))
    return hits


def _p3_matcher(fn: PlsqlFunction) -> list[PatternHit]:
    hits: list[PatternHit] = []
    scope = fn.scope()
    for stmt in walk_statements(fn.body):
        if not isinstance(stmt, EmbeddedSql) or not stmt.into_targets:
            continue
        undeclared = [t for t in stmt.into_targets if t not in scope]
        span = stmt.into_spans[0] if stmt.into_spans else stmt.span
        if undeclared:
            hits.append(PatternHit(
                span=span,
                message=(f"INTO target {undeclared[0]} is not a declared variable; "
                         f"in PL/pgSQL INTO assigns variables, it does not create "
                         f"a table as SELECT INTO does in SQL"),
                severity=Severity.ERROR,
            ))
        else:
            hits.append(PatternHit(
                span=span,
                message=("SELECT ... INTO assigns PL/pgSQL variables here; in plain "
                         "SQL the same syntax creates a new table"),
                severity=Severity.INFO,
            ))
    return hits


def _p4_matcher(fn: PlsqlFunction) -> list[PatternHit]:
    hits: list[PatternHit] = []
    params = {p.name for p in fn.params}
    for stmt in walk_statements(fn.body):
        if not isinstance(stmt, ExecuteDynamic):
            continue
        has_concat = any(t.kind is TokenKind.CONCAT for t in lex(stmt.command.text))
        touched = sorted(stmt.command.refs & params)
        if has_concat and touched:
            hits.append(PatternHit(
                span=stmt.span,
                message=(f"EXECUTE builds a dynamic command string by concatenating "
                         f"parameter {touched[0]}: unlike a SQL prepared statement "
                         f"this is an injection surface (consider format() with %L "
                         f"or quote_literal)"),
                severity=Severity.WARNING,
            ))
        else:
            hits.append(PatternHit(
                span=stmt.span,
                message=("EXECUTE here runs a dynamic command string; in SQL the "
                         "same keyword executes a prepared statement"),
                severity=Severity.INFO,
            ))
    return hits


def _p5_matcher(fn: PlsqlFunction) -> list[PatternHit]:
    hits: list[PatternHit] = []
    for stmt in walk_statements(fn.body):
        if not isinstance(stmt, EmbeddedSql):
            continue
        if stmt.dml_kind not in ("insert", "update", "delete") or not stmt.has_returning:
            continue
        toks = lex(stmt.query.text)
        after_returning = False
        has_into = False
        for tok in toks:
            if tok.is_kw("returning"):
                after_returning = True
            elif after_returning and tok.is_kw("into"):
                has_into = True
        if not has_into:
            hits.append(PatternHit(
                span=stmt.span,
                message=("RETURNING without INTO inside a function: the returned "
                         "rows are silently discarded"),
                severity=Severity.WARNING,
            ))
    return hits


def builtin_rules() -> list[PatternRule]:
    return [
        PatternRule("P1", Category.PRESUMPTION, Severity.WARNING, _p1_matcher,
                    "CHAR with unspecified length: no automatic truncation is performed"),
        PatternRule("P2", Category.OVERLOOK, Severity.WARNING, _p2_matcher,
                    "FOR bound is implicitly rounded, not floored"),
        PatternRule("P3", Category.EQUIVOCALITY, Severity.INFO, _p3_matcher,
                    "INTO assigns variables in PL/pgSQL, it does not create a table"),
        PatternRule("P4", Category.EQUIVOCALITY, Severity.INFO, _p4_matcher,
                    "EXECUTE runs a dynamic command string, not a prepared statement"),
        PatternRule("P5", Category.EQUIVOCALITY, Severity.WARNING, _p5_matcher,
                    "DML RETURNING without INTO is silently discarded"),
    ]


# ── matching ─────────────────────────────────────────────────────

def match_patterns(fn: PlsqlFunction,
                   rules: list[PatternRule]) -> list[InconsistencyReport]:
    """Deterministic, order-stable pattern matching over one function."""
    reports: list[InconsistencyReport] = []
    for rule in sorted(rules, key=lambda r: r.id):
        try:
            hits = rule.matcher(fn)
        except Exception as exc:  # a matcher exception is a rule bug
            raise RuntimeError(f"pattern {rule.id} matcher failed: {exc}") from exc
        for hit in hits:
            reports.append(InconsistencyReport(
                kind=Kind.STATIC_PATTERN,
                span=hit.span,
                category=rule.category,
                channel=None,
                suggestion=hit.message,
                pattern_id=rule.id,
                severity=hit.severity,
                fix=hit.fix,
            ))
    reports.sort(key=lambda r: (r.span.start_byte, r.pattern_id or ""))
    return reports


def apply_fix(source: str, fix: list[TextEdit]) -> str:
    """Apply a quick fix; the result is expected to reparse cleanly."""
    return apply_edits(source, fix)


# ── user-defined rules ───────────────────────────────────────────

_NODE_SELECTORS = ("var_decl", "param", "for_bound", "execute", "embedded_sql",
                   "raise_notice", "loop")

_ALLOWED_KEYS = {"category", "severity", "node", "where", "message", "fix", "doc_url"}


def load_rules(rules_dir: str | Path | None = None,
               builtin: list[PatternRule] | None = None) -> list[PatternRule]:
    """Built-in rules plus user rule files (*.rules) from a directory.

    One rule per section:

        [U100]
        category = overlook
        severity = warning
        node = for_bound
        where = type_class in float,mixed-unknown
        message = FOR bound {text} is rounded behind your back
        fix = FLOOR({text})

    Selectors: var_decl, param, for_bound, execute, embedded_sql,
    raise_notice, loop. `where` clauses (';'-separated):
    `type_class in a,b`, `char_unspecified = true`, `text_matches = regex`,
    `has_returning = true/false`, `has_into = true/false`.
    """
    rules = list(builtin if builtin is not None else builtin_rules())
    seen = {r.id for r in rules}
    if rules_dir is None:
        return rules
    rules_dir = Path(rules_dir)
    for path in sorted(rules_dir.glob("*.rules")):
        parser = configparser.ConfigParser()
        try:
            parser.read_string(path.read_text(), source=str(path))
        except configparser.Error as exc:
            raise RuleFormatError(str(path), "-", str(exc)) from exc
        for section in parser.sections():
            if section in seen:
                raise RuleFormatError(str(path), section, "duplicate rule id")
            seen.add(section)
            rules.append(_rule_from_section(path, section, parser[section]))
    return rules


def _rule_from_section(path: Path, section: str, body) -> PatternRule:
    unknown = set(body.keys()) - _ALLOWED_KEYS
    if unknown:
        raise RuleFormatError(str(path), section, f"unknown keys: {sorted(unknown)}")
    for required in ("category", "node", "message"):
        if required not in body:
            raise RuleFormatError(str(path), section, f"missing key {required}")
    try:
        category = Category(body["category"].strip().lower())
    except ValueError:
        raise RuleFormatError(str(path), section,
                              f"bad category {body['category']!r}") from None
    try:
        severity = Severity(body.get("severity", "warning").strip().lower())
    except ValueError:
        raise RuleFormatError(str(path), section,
                              f"bad severity {body['severity']!r}") from None
    node = body["node"].strip().lower()
    if node not in _NODE_SELECTORS:
        raise RuleFormatError(str(path), section, f"unknown node selector {node!r}")
    constraints = _parse_where(path, section, body.get("where", ""))
    message = body["message"]
    fix_template = body.get("fix")

    def matcher(fn: PlsqlFunction) -> list[PatternHit]:
        return _match_declarative(fn, node, constraints, message, fix_template, severity)

    return PatternRule(section, category, severity, matcher, message,
                       doc_url=body.get("doc_url", ""))


def _parse_where(path: Path, section: str, text: str) -> list[tuple[str, object]]:
    out: list[tuple[str, object]] = []
    for clause in filter(None, (c.strip() for c in text.split(";"))):
        m = re.match(r"^(\w+)\s+in\s+(.+)$", clause)
        if m:
            out.append((m.group(1), {v.strip() for v in m.group(2).split(",")}))
            continue
        m = re.match(r"^(\w+)\s*=\s*(.+)$", clause)
        if m:
            key, value = m.group(1), m.group(2).strip()
            if key == "text_matches":
                try:
                    out.append((key, re.compile(value)))
                except re.error as exc:
                    raise RuleFormatError(str(path), section,
                                          f"bad regex: {exc}") from exc
            elif value.lower() in ("true", "false"):
                out.append((key, value.lower() == "true"))
            else:
                out.append((key, value))
            continue
        raise RuleFormatError(str(path), section, f"cannot parse where clause {clause!r}")
    return out


def _match_declarative(fn: PlsqlFunction, node: str,
                       constraints: list[tuple[str, object]], message: str,
                       fix_template: str | None, severity: Severity) -> list[PatternHit]:
    candidates: list[tuple[SourceSpan, str, dict]] = []
    if node in ("var_decl", "param"):
        entities = fn.declarations if node == "var_decl" else fn.params
        for e in entities:
            candidates.append((e.span, e.sql_type.raw,
                               {"char_unspecified": e.length_unspecified}))
    elif node == "for_bound":
        for stmt in walk_statements(fn.body):
            if isinstance(stmt, ForRange):
                for bound in (stmt.lo, stmt.hi):
                    candidates.append((bound.span, bound.text,
                                       {"type_class": bound.type_class}))
    elif node == "execute":
        for stmt in walk_statements(fn.body):
            if isinstance(stmt, ExecuteDynamic):
                candidates.append((stmt.span, stmt.command.text, {}))
    elif node == "embedded_sql":
        for stmt in walk_statements(fn.body):
            if isinstance(stmt, EmbeddedSql):
                candidates.append((stmt.span, stmt.query.text,
                                   {"has_returning": stmt.has_returning,
                                    "has_into": bool(stmt.into_targets)}))
    elif node == "raise_notice":
        for stmt in walk_statements(fn.body):
            if stmt.kind == "raise_notice":
                candidates.append((stmt.span, stmt.format, {}))
    elif node == "loop":
        for stmt in walk_statements(fn.body):
            if isinstance(stmt, (ForRange, ForEach, CursorFor)) or stmt.kind in ("loop", "while"):
                candidates.append((stmt.span, "", {}))
    hits = []
    for span, text, facts in candidates:
        if not _constraints_hold(constraints, text, facts):
            continue
        fix = None
        if fix_template is not None:
            fix = [TextEdit(span.start_byte, span.end_byte,
                            fix_template.replace("{text}", text))]
        hits.append(PatternHit(span=span, message=message.replace("{text}", text),
                               severity=severity, fix=fix))
    return hits


def _constraints_hold(constraints: list[tuple[str, object]], text: str,
                      facts: dict) -> bool:
    for key, expected in constraints:
        if key == "text_matches":
            if not expected.search(text):
                return False
        elif isinstance(expected, set):
            if str(facts.get(key)) not in expected:
                return False
        else:
            if facts.get(key) != expected:
                return False
    return True
