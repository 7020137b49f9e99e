"""Command-line entry point.

Exit codes are a stable contract: 0 = clean/consistent, 1 = findings,
2 = tool/usage/parse error. JSON output is the canonical machine format;
human output renders spans as file:line:col with caret underlining and
carries no compatibility promise.

`check` is purely static: it never opens a network connection or spawns
the embedded engine.
"""

from __future__ import annotations

import argparse
import difflib
import json
import os
import sys
from pathlib import Path

from .executor import DbTarget, Invocation
from .fuzzer import CampaignConfig, propose_patterns, run_campaign
from .inspector import CompareConfig, Verdict, inspect_dynamic
from .parser import parse
from .patterns import apply_fix, builtin_rules, load_rules, match_patterns, RuleFormatError
from .reports import SCHEMA_VERSION, Severity
from .source import caret_frame
from .translate import DEFAULT_FUEL, Unsupported, translate
from .typecheck import typecheck_light

DSN_ENV_VAR = "PLPGCHECK_DSN"

EXIT_CLEAN = 0
EXIT_FINDINGS = 1
EXIT_ERROR = 2


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return EXIT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plpgcheck",
        description="Inspect PL/pgSQL code for divergences between its SQL "
                    "reading and the engine's actual semantics.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, dynamic: bool) -> None:
        p.add_argument("--format", choices=("human", "json"), default="human")
        p.add_argument("--rules", metavar="DIR", default=None,
                       help="directory of user .rules files")
        if dynamic:
            p.add_argument("--dsn", default=None,
                           help=f"postgresql://... or pglite://  (env {DSN_ENV_VAR})")
            p.add_argument("--timeout-ms", type=int, default=5000)
            p.add_argument("--fuel", type=int, default=DEFAULT_FUEL,
                           help="loop iteration budget in the equivalent query")

    p_check = sub.add_parser("check", help="static mode: patterns only, no server")
    p_check.add_argument("files", nargs="+")
    common(p_check, dynamic=False)
    p_check.set_defaults(handler=cmd_check)

    p_run = sub.add_parser("run", help="dynamic mode: differential execution")
    p_run.add_argument("file")
    p_run.add_argument("--fn", required=False, default=None,
                       help="function name (default: first in file)")
    p_run.add_argument("--args", nargs="*", default=[],
                       help="argument values as text; NULL for SQL NULL")
    p_run.add_argument("--setup-sql", action="append", default=[],
                       help="statement run (and rolled back) before each side")
    common(p_run, dynamic=True)
    p_run.set_defaults(handler=cmd_run)

    p_tr = sub.add_parser("translate", help="emit the equivalent SQL query")
    p_tr.add_argument("file")
    p_tr.add_argument("--fn", default=None)
    p_tr.add_argument("--fuel", type=int, default=DEFAULT_FUEL)
    p_tr.add_argument("--format", choices=("human", "json"), default="human")
    p_tr.set_defaults(handler=cmd_translate)

    p_fix = sub.add_parser("fix", help="apply or preview a pattern's quick fix")
    p_fix.add_argument("file")
    p_fix.add_argument("--pattern", required=True, help="rule id, e.g. P2")
    mode = p_fix.add_mutually_exclusive_group()
    mode.add_argument("--apply", action="store_true")
    mode.add_argument("--preview", action="store_true")
    common(p_fix, dynamic=False)
    p_fix.set_defaults(handler=cmd_fix)

    p_fuzz = sub.add_parser("fuzz", help="mutation campaign against a live engine")
    p_fuzz.add_argument("--seeds", required=True)
    p_fuzz.add_argument("--budget", type=int, required=True,
                        help="iteration budget")
    p_fuzz.add_argument("--workers", type=int, default=1)
    p_fuzz.add_argument("--rng-seed", type=int, default=0)
    p_fuzz.add_argument("--out", required=True, help="JSONL log path")
    p_fuzz.add_argument("--epoch", default=None,
                        help="fixed timestamp string for reproducible logs")
    common(p_fuzz, dynamic=True)
    p_fuzz.set_defaults(handler=cmd_fuzz)

    p_prop = sub.add_parser("propose", help="group fuzz log into rule candidates")
    p_prop.add_argument("log")
    p_prop.add_argument("--format", choices=("human", "json"), default="human")
    p_prop.set_defaults(handler=cmd_propose)

    p_lsp = sub.add_parser("lsp", help="run the language server on stdio")
    p_lsp.set_defaults(handler=cmd_lsp)
    return parser


def _resolve_dsn(args) -> str | None:
    return args.dsn or os.environ.get(DSN_ENV_VAR)


def _load_rule_set(args):
    try:
        return load_rules(args.rules) if args.rules else builtin_rules()
    except RuleFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_ERROR) from exc


def _severity_rank(severity: Severity) -> int:
    return {"error": 0, "warning": 1, "info": 2}[severity.value]


# ── check ────────────────────────────────────────────────────────

def cmd_check(args) -> int:
    """Exit 2 on unparseable input, 1 on error/warning findings, else 0
    (info-severity notes alone stay clean)."""
    rules = _load_rule_set(args)
    payload = {"schema": SCHEMA_VERSION, "mode": "static", "files": []}
    saw_parse_error = False
    saw_finding = False
    for file in args.files:
        source = Path(file).read_text()
        result = parse(source, file)
        diagnostics = list(result.diagnostics)
        reports = []
        for fn in result.functions:
            _, type_diags = typecheck_light(fn)
            diagnostics.extend(type_diags)
            reports.extend(match_patterns(fn, rules))
        if any(d.severity == "error" for d in diagnostics):
            saw_parse_error = True
        if any(r.severity in (Severity.ERROR, Severity.WARNING) for r in reports):
            saw_finding = True
        payload["files"].append({
            "file": file,
            "diagnostics": [d.to_json() for d in diagnostics],
            "reports": [r.to_json() for r in reports],
        })
        if args.format == "human":
            _print_static_human(file, source, diagnostics, reports)
    if args.format == "json":
        print(json.dumps(payload, indent=2))
    if saw_parse_error:
        return EXIT_ERROR
    return EXIT_FINDINGS if saw_finding else EXIT_CLEAN


def _print_static_human(file, source, diagnostics, reports) -> None:
    for d in diagnostics:
        print(f"{d.severity}: {d.message}")
        print("  " + caret_frame(source, d.span).replace("\n", "\n  "))
    for r in sorted(reports, key=lambda r: (r.span.start_byte, r.pattern_id or "")):
        print(f"{r.severity.value} [{r.pattern_id}] {r.category.value}: {r.suggestion}")
        print("  " + caret_frame(source, r.span).replace("\n", "\n  "))
        if r.fix:
            print("  fix available: plpgcheck fix --pattern", r.pattern_id, file)
    if not diagnostics and not reports:
        print(f"{file}: clean")


# ── run ──────────────────────────────────────────────────────────

def cmd_run(args) -> int:
    dsn = _resolve_dsn(args)
    if not dsn:
        print(f"error: dynamic mode needs --dsn or ${DSN_ENV_VAR}", file=sys.stderr)
        return EXIT_ERROR
    source = Path(args.file).read_text()
    result = parse(source, args.file)
    fn = result.function(args.fn)
    if fn is None:
        print(f"error: function {args.fn or '<first>'} not found", file=sys.stderr)
        return EXIT_ERROR
    arg_values = [None if a == "NULL" else a for a in args.args]
    if len(arg_values) != len(fn.params):
        print(f"error: {fn.name} takes {len(fn.params)} arguments, "
              f"got {len(arg_values)}", file=sys.stderr)
        return EXIT_ERROR
    inv = Invocation(
        function=fn.name,
        args=[(p.sql_type.raw, v) for p, v in zip(fn.params, arg_values)],
        setup_sql=list(args.setup_sql),
    )
    target = DbTarget(dsn=dsn, timeout_ms=args.timeout_ms, fuel=args.fuel)
    inspection = inspect_dynamic(target, source, inv, CompareConfig(), file_id=args.file)
    if args.format == "json":
        print(json.dumps(inspection.to_json(), indent=2))
    else:
        _print_dynamic_human(args.file, source, inspection)
    if inspection.verdict in ("parse_error", "unsupported"):
        return EXIT_ERROR
    return EXIT_FINDINGS if inspection.verdict is Verdict.INCONSISTENT else EXIT_CLEAN


def _print_dynamic_human(file, source, inspection) -> None:
    verdict = inspection.verdict.value if isinstance(inspection.verdict, Verdict) \
        else inspection.verdict
    print(f"{file}: {verdict.upper()}")
    if inspection.problem:
        print(f"  {inspection.problem}")
        return
    for r in inspection.reports:
        print(f"  channel {r.channel.value} ({r.category.value})")
        print(f"    PL/pgSQL side: {r.plsql_evidence}")
        print(f"    SQL side:      {r.sql_evidence}")
        print("  " + caret_frame(source, r.span).replace("\n", "\n  "))
    if inspection.plsql_outcome and inspection.sql_outcome:
        print(f"  timings: plsql {inspection.timings_ms.get('plsql', 0):.0f} ms, "
              f"sql {inspection.timings_ms.get('sql', 0):.0f} ms")


# ── translate ────────────────────────────────────────────────────

def cmd_translate(args) -> int:
    source = Path(args.file).read_text()
    result = parse(source, args.file)
    fn = result.function(args.fn)
    if fn is None or not result.ok:
        for d in result.diagnostics:
            print(f"error: {d.message}", file=sys.stderr)
        if fn is None:
            print(f"error: function {args.fn or '<first>'} not found", file=sys.stderr)
            return EXIT_ERROR
    typecheck_light(fn)
    try:
        eq = translate(fn, fuel=args.fuel)
    except Unsupported as exc:
        print(f"error: unsupported construct ({exc.unit}): {exc.message}",
              file=sys.stderr)
        return EXIT_ERROR
    if args.format == "json":
        print(json.dumps(eq.to_json(), indent=2))
    else:
        print(eq.sql_text)
        print("-- column map: " + json.dumps(eq.column_map))
    return EXIT_CLEAN


# ── fix ──────────────────────────────────────────────────────────

def cmd_fix(args) -> int:
    rules = _load_rule_set(args)
    source = Path(args.file).read_text()
    result = parse(source, args.file)
    edits = []
    for fn in result.functions:
        typecheck_light(fn)
        for report in match_patterns(fn, rules):
            if report.pattern_id == args.pattern and report.fix:
                edits.extend(report.fix)
    if not edits:
        print(f"{args.file}: pattern {args.pattern} does not match or has no fix; "
              "nothing to do")
        return EXIT_CLEAN
    fixed = apply_fix(source, edits)
    if args.apply:
        Path(args.file).write_text(fixed)
        print(f"{args.file}: applied {len(edits)} edit(s) for {args.pattern}")
    else:
        diff = difflib.unified_diff(
            source.splitlines(keepends=True), fixed.splitlines(keepends=True),
            fromfile=args.file, tofile=f"{args.file} (fixed)")
        sys.stdout.writelines(diff)
    return EXIT_CLEAN


# ── fuzz / propose ───────────────────────────────────────────────

def cmd_fuzz(args) -> int:
    dsn = _resolve_dsn(args)
    if not dsn:
        print(f"error: fuzzing needs --dsn or ${DSN_ENV_VAR}", file=sys.stderr)
        return EXIT_ERROR
    cfg = CampaignConfig(
        seed_dir=args.seeds,
        iterations=args.budget,
        target=DbTarget(dsn=dsn, timeout_ms=args.timeout_ms, fuel=args.fuel),
        out_path=args.out,
        workers=args.workers,
        rng_seed=args.rng_seed,
        epoch=args.epoch,
    )
    summary = run_campaign(cfg)
    if args.format == "json":
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        print(f"fuzz campaign: {summary['iterations']} iterations, "
              f"{summary['executions']} executions")
        print(f"  verdicts: {summary['verdicts']}")
        print(f"  logged {summary['records_logged']} records "
              f"({summary['dedup_groups']} dedup groups, "
              f"{summary['duplicates_suppressed']} duplicates suppressed)")
        if summary.get("aborted"):
            print(f"  aborted: {summary['aborted']}")
    if summary.get("aborted"):
        return EXIT_ERROR
    return EXIT_FINDINGS if summary["records_logged"] else EXIT_CLEAN


def cmd_propose(args) -> int:
    try:
        report = propose_patterns(args.log)
    except FileNotFoundError:
        print(f"error: no such log {args.log}", file=sys.stderr)
        return EXIT_ERROR
    if args.format == "json":
        print(json.dumps(report, indent=2))
        return EXIT_CLEAN
    if not report["groups"]:
        print("log is empty: no rule candidates")
        return EXIT_CLEAN
    for group in report["groups"]:
        print(f"signature {group['signature']}  ({group['count']} record(s))")
        rep = group["representative"]
        print("  trigger inputs:", json.dumps(rep["input_parameters"]))
        first_lines = rep["plsql_source"].strip().splitlines()
        for line in first_lines[:6]:
            print("  | " + line)
        if len(first_lines) > 6:
            print(f"  | ... ({len(first_lines) - 6} more lines)")
    return EXIT_CLEAN


def cmd_lsp(args) -> int:
    from .lsp import serve_stdio
    serve_stdio()
    return EXIT_CLEAN


if __name__ == "__main__":
    sys.exit(main())
