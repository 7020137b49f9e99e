"""The inconsistency monitor: run both sides, compare channel by channel.

Verdicts are three-valued. A timeout or fuel exhaustion on either side is
Inconclusive, never an inconsistency; an engine error on one side against a
value on the other is a real finding (error-vs-value channel); errors on
both sides match when their SQLSTATE classes (first two characters) agree.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from decimal import Decimal

from .ast_nodes import PlsqlFunction
from .executor import (
    DbTarget,
    ExecutionOutcome,
    Executor,
    Invocation,
    STATUS_ERROR,
    STATUS_FUEL,
    STATUS_TIMEOUT,
    STATUS_VALUE,
    TypedValue,
)
from .parser import parse
from .reports import (
    Category,
    Channel,
    InconsistencyReport,
    Kind,
    SCHEMA_VERSION,
    Verdict,
)
from .source import SourceSpan
from .translate import Unsupported, translate
from .typecheck import typecheck_light
from .values import CHAR_PADDED_OIDS, NUMERIC_OIDS, OID_VOID, decode_scalar


@dataclass
class CompareConfig:
    float_rel_tol: float = 1e-12
    char_rtrim: bool = True
    sqlstate_class_len: int = 2

    def __post_init__(self) -> None:
        if self.float_rel_tol < 0:
            raise ValueError("tolerance must be >= 0")


@dataclass
class ChannelDiff:
    channel: Channel
    left: str
    right: str
    detail: str = ""
    inconclusive: bool = False


def compare(a: ExecutionOutcome, b: ExecutionOutcome,
            cfg: CompareConfig | None = None) -> list[ChannelDiff]:
    """Empty list iff the outcomes match on all compared channels."""
    cfg = cfg or CompareConfig()
    if a.status in (STATUS_TIMEOUT, STATUS_FUEL) or b.status in (STATUS_TIMEOUT, STATUS_FUEL):
        return [ChannelDiff(Channel.RETURN_VALUE, a.status, b.status,
                            detail="timeout or fuel exhaustion", inconclusive=True)]
    diffs: list[ChannelDiff] = []
    if a.status == STATUS_ERROR and b.status == STATUS_ERROR:
        ca = (a.error[0] if a.error else "")[:cfg.sqlstate_class_len]
        cb = (b.error[0] if b.error else "")[:cfg.sqlstate_class_len]
        if ca != cb:
            diffs.append(ChannelDiff(
                Channel.ERROR_CLASS,
                f"{a.error[0]}: {a.error[1]}" if a.error else "",
                f"{b.error[0]}: {b.error[1]}" if b.error else "",
                detail=f"SQLSTATE class {ca} vs {cb}"))
    elif a.status == STATUS_ERROR or b.status == STATUS_ERROR:
        diffs.append(ChannelDiff(
            Channel.ERROR_VS_VALUE,
            _side_summary(a), _side_summary(b),
            detail="one side raised an engine error, the other produced a value"))
    else:
        ra, rb = a.ret, b.ret
        if not _values_equal(ra, rb, cfg):
            diffs.append(ChannelDiff(
                Channel.RETURN_VALUE,
                _tv_text(ra), _tv_text(rb), detail="return values differ"))
    if not _lists_equal(a.notices, b.notices):
        diffs.append(ChannelDiff(
            Channel.NOTICES, _render_list(a.notices), _render_list(b.notices),
            detail=_list_diff_detail(a.notices, b.notices)))
    if not _lists_equal(a.exec_cmds, b.exec_cmds):
        diffs.append(ChannelDiff(
            Channel.EXEC_CMDS, _render_list(a.exec_cmds), _render_list(b.exec_cmds),
            detail=_list_diff_detail(a.exec_cmds, b.exec_cmds)))
    return diffs


def verdict_of(a: ExecutionOutcome, b: ExecutionOutcome,
               cfg: CompareConfig | None = None) -> tuple[Verdict, list[ChannelDiff]]:
    diffs = compare(a, b, cfg)
    if any(d.inconclusive for d in diffs):
        return Verdict.INCONCLUSIVE, diffs
    if diffs:
        return Verdict.INCONSISTENT, diffs
    if a.status != STATUS_VALUE or b.status != STATUS_VALUE:
        # matching errors on both sides: the engines agree, but there is no
        # value-level evidence of equivalence either; still Consistent per
        # the error-class rule
        return Verdict.CONSISTENT, diffs
    return Verdict.CONSISTENT, diffs


def _tv_text(tv: TypedValue | None) -> str:
    if tv is None or tv.text is None:
        return "NULL"
    return tv.text


def _side_summary(outcome: ExecutionOutcome) -> str:
    if outcome.status == STATUS_ERROR and outcome.error:
        return f"error {outcome.error[0]}: {outcome.error[1]}"
    return f"value {_tv_text(outcome.ret)}"


def _values_equal(a: TypedValue | None, b: TypedValue | None, cfg: CompareConfig) -> bool:
    if a is None or b is None:
        return (a is None or a.text is None) and (b is None or b.text is None)
    if a.oid == OID_VOID or b.oid == OID_VOID:
        return (a.text in (None, "")) and (b.text in (None, ""))
    if a.text is None or b.text is None:
        return a.text is None and b.text is None
    if a.oid in NUMERIC_OIDS and b.oid in NUMERIC_OIDS:
        try:
            va, vb = decode_scalar(a.text, a.oid), decode_scalar(b.text, b.oid)
        except (ValueError, ArithmeticError):
            return a.text == b.text  # malformed typed text: compare raw
        if isinstance(va, float) or isinstance(vb, float):
            fa, fb = float(va), float(vb)
            if fa == fb:
                return True
            scale = max(abs(fa), abs(fb))
            return abs(fa - fb) <= cfg.float_rel_tol * scale
        return Decimal(va) == Decimal(vb)
    ta, tb = a.text, b.text
    if cfg.char_rtrim and (a.oid in CHAR_PADDED_OIDS or b.oid in CHAR_PADDED_OIDS):
        ta, tb = ta.rstrip(" "), tb.rstrip(" ")
    return ta == tb


def _lists_equal(a: list[str], b: list[str]) -> bool:
    return len(a) == len(b) and all(x == y for x, y in zip(a, b))


def _render_list(items: list[str], limit: int = 8) -> str:
    shown = items[:limit]
    suffix = f" … (+{len(items) - limit} more)" if len(items) > limit else ""
    return f"[{len(items)}] " + " | ".join(shown) + suffix


def _list_diff_detail(a: list[str], b: list[str]) -> str:
    if len(a) != len(b):
        return f"lengths differ: {len(a)} vs {len(b)}"
    for i, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return f"first difference at index {i}: {x!r} vs {y!r}"
    return ""


@dataclass
class InspectionResult:
    verdict: Verdict | str
    reports: list[InconsistencyReport] = field(default_factory=list)
    plsql_outcome: ExecutionOutcome | None = None
    sql_outcome: ExecutionOutcome | None = None
    fingerprint: dict | None = None
    timings_ms: dict = field(default_factory=dict)
    equivalent_sql: str | None = None
    problem: str | None = None   # set for unsupported/parse failures

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "verdict": self.verdict.value if isinstance(self.verdict, Verdict) else self.verdict,
            "problem": self.problem,
            "reports": [r.to_json() for r in self.reports],
            "outcomes": {
                "plsql": self.plsql_outcome.to_json() if self.plsql_outcome else None,
                "sql": self.sql_outcome.to_json() if self.sql_outcome else None,
            },
            "fingerprint": self.fingerprint,
            "timings_ms": self.timings_ms,
        }


# Heuristic channel affinity used to attach a category when a static
# pattern also fires on the inspected function.
_PATTERN_CHANNEL_AFFINITY = {
    "P1": {Channel.EXEC_CMDS, Channel.RETURN_VALUE, Channel.ERROR_VS_VALUE},
    "P2": {Channel.RETURN_VALUE, Channel.NOTICES},
    "P3": {Channel.RETURN_VALUE, Channel.ERROR_VS_VALUE},
    "P4": {Channel.EXEC_CMDS},
    "P5": {Channel.RETURN_VALUE},
}


def inspect_dynamic(target: DbTarget | Executor, fn_source: str, inv: Invocation,
                    cfg: CompareConfig | None = None,
                    fuel: int | None = None,
                    file_id: str = "<input>") -> InspectionResult:
    """Parse, translate, execute both sides, compare. The full dynamic mode."""
    own_executor = not isinstance(target, Executor)
    executor = Executor(target) if own_executor else target
    try:
        return _inspect_with(executor, fn_source, inv, cfg, fuel, file_id)
    finally:
        if own_executor:
            executor.close()


def _inspect_with(executor: Executor, fn_source: str, inv: Invocation,
                  cfg: CompareConfig | None, fuel: int | None,
                  file_id: str) -> InspectionResult:
    timings: dict[str, float] = {}
    parsed = parse(fn_source, file_id)
    errors = [d for d in parsed.diagnostics if d.severity == "error"]
    fn = parsed.function(inv.function)
    if fn is None or errors:
        detail = "; ".join(d.message for d in errors[:3]) or \
            f"function {inv.function} not found in source"
        return InspectionResult(verdict="parse_error", problem=detail)
    typecheck_light(fn)
    try:
        eq = translate(fn, fuel=fuel or executor.target.fuel)
    except Unsupported as exc:
        return InspectionResult(
            verdict="unsupported",
            problem=f"{exc.unit}: {exc.message}",
        )
    fingerprint = executor.probe()

    # only the target function runs; surrounding statements in the file
    # (example calls, other functions) must not execute
    fn_slice = parsed.source[fn.span.start_byte:fn.span.end_byte]
    t0 = time.monotonic()
    plsql_outcome = executor.run_plsql(fn_slice, inv)
    timings["plsql"] = (time.monotonic() - t0) * 1000.0
    t0 = time.monotonic()
    sql_outcome = executor.run_equivalent(eq, inv)
    timings["sql"] = (time.monotonic() - t0) * 1000.0

    verdict, diffs = verdict_of(plsql_outcome, sql_outcome, cfg)
    reports = [_diff_to_report(d, fn, fn_source) for d in diffs if not d.inconclusive]
    return InspectionResult(
        verdict=verdict,
        reports=reports,
        plsql_outcome=plsql_outcome,
        sql_outcome=sql_outcome,
        fingerprint=fingerprint,
        timings_ms=timings,
        equivalent_sql=eq.sql_text,
    )


def _diff_to_report(diff: ChannelDiff, fn: PlsqlFunction,
                    fn_source: str) -> InconsistencyReport:
    category, pattern_id, span = _categorize(diff, fn)
    return InconsistencyReport(
        kind=Kind.DYNAMIC,
        span=span,
        category=category,
        channel=diff.channel,
        plsql_evidence=diff.left,
        sql_evidence=diff.right,
        pattern_id=pattern_id,
        suggestion=(f"{diff.channel.value} differs between the PL/pgSQL engine and "
                    f"the equivalent SQL query ({diff.detail}); the engine semantics "
                    f"differ from the SQL reading of this code"),
    )


def _categorize(diff: ChannelDiff, fn: PlsqlFunction) -> tuple[Category, str | None, SourceSpan]:
    from .patterns import builtin_rules, match_patterns
    hits = match_patterns(fn, builtin_rules())
    for hit in hits:
        affinity = _PATTERN_CHANNEL_AFFINITY.get(hit.pattern_id or "", set())
        if diff.channel in affinity:
            return Category(hit.category), hit.pattern_id, hit.span
    return Category.UNCATEGORIZED, None, fn.span
