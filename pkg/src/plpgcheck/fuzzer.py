"""Offline fuzzing campaign: mutate seed programs, inspect each mutant
dynamically, and log deduplicated inconsistencies as JSONL.

Mutation operators are chosen to steer mutants toward the three
inconsistency categories (type presumption, implicit-operation overlook,
keyword equivocality). Every logged mutant reparses, and a log record
carries everything needed to replay it: source, equivalent SQL, inputs,
both outcomes, and the dedup signature (channel, anchor statement kind,
source/target type pair).

Seed files may carry their table setup inline as `-- setup: <sql>` comment
lines; those run (and roll back) with every execution of the seed's
mutants.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .ast_nodes import (
    Assign,
    EmbeddedSql,
    ExecuteDynamic,
    ForRange,
    PlsqlFunction,
    RaiseNotice,
    walk_statements,
)
from .executor import DbTarget, Executor, Invocation, ConnectionFailure
from .inspector import InspectionResult, Verdict, inspect_dynamic
from .lexer import TokenKind, lex
from .parser import parse
from .reports import Channel
from .source import TextEdit, apply_edits

SETUP_PREFIX = "-- setup:"


@dataclass
class FuzzSeed:
    path: str
    source: str
    parse_ok: bool
    function: str | None = None
    setup_sql: list[str] = field(default_factory=list)

    @staticmethod
    def load(path: Path) -> "FuzzSeed":
        source = path.read_text()
        setup = [line[len(SETUP_PREFIX):].strip()
                 for line in source.splitlines() if line.startswith(SETUP_PREFIX)]
        result = parse(source, str(path))
        fn = result.function()
        return FuzzSeed(
            path=str(path),
            source=source,
            parse_ok=result.ok and fn is not None,
            function=fn.name if fn else None,
            setup_sql=setup,
        )


class MutationFailed(Exception):
    pass


@dataclass
class MutationOp:
    name: str
    candidates: callable      # (fn, source) -> list of opaque candidates
    rewrite: callable         # (rng, source, candidate) -> new source


# ── mutation operators ───────────────────────────────────────────

def _body_number_tokens(fn: PlsqlFunction, source: str):
    toks = lex(source, fn.span.start_byte, fn.span.end_byte)
    return [t for t in toks if t.kind in (TokenKind.INT_LIT, TokenKind.NUM_LIT)]


def _op_number(rng: random.Random, source: str, tok) -> str:
    text = tok.text
    choice = rng.randrange(4)
    if choice == 0:
        new = f"({text} + 1)"
    elif choice == 1:
        new = f"({text} - 1)"
    elif choice == 2:
        new = f"(-{text})"
    else:
        new = f"({text} * {rng.choice(['0.9', '1.5', '0.58'])})"
    return apply_edits(source, [TextEdit(tok.start, tok.end, new)])


def _assign_statements(fn: PlsqlFunction, source: str):
    out = []
    for d in fn.declarations:
        if d.initializer is not None:
            out.append(d.initializer.span)
    for stmt in walk_statements(fn.body):
        if isinstance(stmt, Assign):
            out.append(stmt.expr.span)
    return out


def _op_null_inject(rng: random.Random, source: str, span) -> str:
    return apply_edits(source, [TextEdit(span.start_byte, span.end_byte, "NULL")])


_TYPE_SWAPS = {
    "int": ["numeric", "float8"],
    "integer": ["numeric", "float8"],
    "int4": ["numeric"],
    "numeric": ["int"],
    "float8": ["int", "numeric"],
    "float": ["int"],
    "text": ["varchar", "char"],
    "varchar": ["text", "char"],
    "char": ["varchar", "text"],
}


def _type_spans(fn: PlsqlFunction, source: str):
    out = []
    for entity in list(fn.params) + list(fn.declarations):
        if entity.type_span is None:
            continue
        base = source[entity.type_span.start_byte:entity.type_span.end_byte]
        word = base.split("(")[0].strip().lower()
        if word in _TYPE_SWAPS or "(" in base:
            out.append((entity.type_span, base))
    return out


def _op_type_swap(rng: random.Random, source: str, candidate) -> str:
    span, base = candidate
    word = base.split("(")[0].strip().lower()
    if "(" in base and rng.random() < 0.6:
        new = base.split("(")[0].strip()  # drop the length: CHAR(8) -> CHAR
    else:
        options = _TYPE_SWAPS.get(word)
        if not options:
            new = base.split("(")[0].strip()
        else:
            new = rng.choice(options)
    return apply_edits(source, [TextEdit(span.start_byte, span.end_byte, new)])


def _comparison_tokens(fn: PlsqlFunction, source: str):
    toks = lex(source, fn.span.start_byte, fn.span.end_byte)
    return [t for t in toks if t.kind in (TokenKind.LT, TokenKind.GT,
                                          TokenKind.LE, TokenKind.GE)]


_CMP_SWAP = {"<": "<=", "<=": "<", ">": ">=", ">=": ">"}


def _op_cmp_swap(rng: random.Random, source: str, tok) -> str:
    return apply_edits(source, [TextEdit(tok.start, tok.end, _CMP_SWAP[tok.text])])


def _condition_spans(fn: PlsqlFunction, source: str):
    out = []
    for stmt in walk_statements(fn.body):
        cond = getattr(stmt, "cond", None)
        if cond is not None:
            out.append(cond.span)
    return out


def _op_negate(rng: random.Random, source: str, span) -> str:
    text = source[span.start_byte:span.end_byte]
    return apply_edits(source, [TextEdit(span.start_byte, span.end_byte,
                                         f"NOT ({text})")])


def _for_bounds(fn: PlsqlFunction, source: str):
    return [stmt.hi.span for stmt in walk_statements(fn.body)
            if isinstance(stmt, ForRange)]


def _op_bound_wrap(rng: random.Random, source: str, span) -> str:
    text = source[span.start_byte:span.end_byte]
    factor = rng.choice(["0.9", "0.58", "1.1"])
    return apply_edits(source, [TextEdit(span.start_byte, span.end_byte,
                                         f"({text}) * {factor}")])


def _dup_del_statements(fn: PlsqlFunction, source: str):
    # side-channel statements duplicate/delete safely at block granularity
    return [stmt.span for stmt in walk_statements(fn.body)
            if isinstance(stmt, (Assign, RaiseNotice, ExecuteDynamic, EmbeddedSql))]


def _op_dup_del(rng: random.Random, source: str, span) -> str:
    text = source[span.start_byte:span.end_byte]
    if rng.random() < 0.5:
        return apply_edits(source, [TextEdit(span.end_byte, span.end_byte, " " + text)])
    return apply_edits(source, [TextEdit(span.start_byte, span.end_byte, "NULL;")])


MUTATION_OPS: list[MutationOp] = [
    MutationOp("number_perturb", _body_number_tokens, _op_number),
    MutationOp("null_inject", _assign_statements, _op_null_inject),
    MutationOp("type_swap", _type_spans, _op_type_swap),
    MutationOp("cmp_swap", _comparison_tokens, _op_cmp_swap),
    MutationOp("negate_condition", _condition_spans, _op_negate),
    MutationOp("for_bound_wrap", _for_bounds, _op_bound_wrap),
    MutationOp("dup_del_statement", _dup_del_statements, _op_dup_del),
]


def mutate(seed: FuzzSeed, rng: random.Random, max_ops: int = 3) -> str:
    """Apply 1..max_ops operators drawn from those with applicable sites;
    the result always reparses."""
    if not seed.parse_ok:
        raise MutationFailed("seed does not parse")
    source = seed.source
    applied = 0
    goal = rng.randint(1, max_ops)
    attempts = 0
    while applied < goal and attempts < 8:
        attempts += 1
        fn = parse(source).function()
        if fn is None:
            break
        applicable = []
        for op in MUTATION_OPS:
            candidates = op.candidates(fn, source)
            if candidates:
                applicable.append((op, candidates))
        if not applicable:
            break
        op, candidates = rng.choice(applicable)
        candidate = rng.choice(candidates)
        mutated = op.rewrite(rng, source, candidate)
        check = parse(mutated)
        if check.function() is not None and check.ok:
            source = mutated
            applied += 1
    if applied == 0:
        raise MutationFailed("no applicable operator")
    return source


# ── input generation ─────────────────────────────────────────────

_TEXT_BOUNDARIES = ["2 OR TRUE", "a", "", "x'y", "1; DROP TABLE users; --", "2"]


def generate_inputs(fn: PlsqlFunction, rng: random.Random) -> list[tuple[str, str | None]]:
    """Type-driven argument generation: boundary set plus random values."""
    args: list[tuple[str, str | None]] = []
    for p in fn.params:
        base = p.sql_type.base
        raw = p.sql_type.raw
        if base in ("int2", "int4", "int8"):
            value = rng.choice(["0", "-1", "1", "10", "5", None, str(rng.randint(-50, 50))])
        elif base in ("float4", "float8", "numeric"):
            value = rng.choice(["0.58", "0.5", "-1.5", "0", None, f"{rng.uniform(-3, 3):.2f}"])
        elif base == "bool":
            value = rng.choice(["true", "false", None])
        else:
            value = rng.choice(_TEXT_BOUNDARIES + [None])
        args.append((raw, value))
    return args


# ── dedup signature ──────────────────────────────────────────────

def dedup_signature(result: InspectionResult, fn: PlsqlFunction) -> str:
    """(channel, anchor statement kind, source/target type pair)."""
    if not result.reports:
        return "none"
    report = result.reports[0]
    channel = report.channel.value if report.channel else "unknown"
    anchor = "function"
    pair = ("", "")
    if report.pattern_id == "P1":
        anchor, pair = "execute_dynamic", ("text", "bpchar")
    elif report.pattern_id == "P2":
        anchor, pair = "for_range", ("float8", "int4")
    elif report.pattern_id in ("P3", "P5"):
        anchor, pair = "embedded_sql", ("", "")
    elif report.pattern_id == "P4":
        anchor, pair = "execute_dynamic", ("text", "text")
    else:
        defaults = {
            Channel.RETURN_VALUE: "return",
            Channel.NOTICES: "raise_notice",
            Channel.EXEC_CMDS: "execute_dynamic",
            Channel.ERROR_VS_VALUE: "function",
            Channel.ERROR_CLASS: "function",
        }
        anchor = defaults.get(report.channel, "function")
        kinds = {s.kind for s in walk_statements(fn.body)}
        if anchor not in kinds and anchor != "function":
            anchor = sorted(kinds)[0] if kinds else "function"
    src, dst = pair
    return f"{channel}|{anchor}|{src}->{dst}"


# ── campaign ─────────────────────────────────────────────────────

@dataclass
class CampaignConfig:
    seed_dir: str
    iterations: int
    target: DbTarget
    out_path: str
    workers: int = 1
    rng_seed: int = 0
    epoch: str | None = None   # fixed value makes the log byte-identical

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        if self.iterations < 0:
            raise ValueError("iteration budget must be >= 0")


def load_seeds(seed_dir: str) -> list[FuzzSeed]:
    seeds = [FuzzSeed.load(p) for p in sorted(Path(seed_dir).glob("*.sql"))]
    return [s for s in seeds if s.parse_ok]


def run_campaign(cfg: CampaignConfig) -> dict:
    """Mutate/inspect until the iteration budget is spent; JSONL log of
    deduplicated Inconsistent findings; returns (and writes) a summary."""
    started = time.time()
    epoch = cfg.epoch or time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(started))
    seeds = load_seeds(cfg.seed_dir)
    summary = {
        "iterations": 0,
        "executions": 0,
        "verdicts": {"consistent": 0, "inconsistent": 0, "inconclusive": 0,
                     "unsupported": 0, "parse_error": 0},
        "mutation_failures": 0,
        "records_logged": 0,
        "dedup_groups": 0,
        "duplicates_suppressed": 0,
        "seeds": len(seeds),
        "aborted": None,
    }
    if not seeds or cfg.iterations == 0:
        Path(cfg.out_path).write_text("")
        summary["duration_s"] = round(time.time() - started, 3)
        _write_summary(cfg, summary)
        return summary

    seen: set[str] = set()
    lock = threading.Lock()
    log_file = open(cfg.out_path, "w", encoding="utf-8")

    def worker(worker_id: int, budget: int) -> None:
        # integer-derived seed: tuple seeding is hash-based and would break
        # cross-process reproducibility
        rng = random.Random(cfg.rng_seed * 1_000_003 + worker_id)
        executor = Executor(cfg.target)
        try:
            for iteration in range(budget):
                with lock:
                    summary["iterations"] += 1
                seed = rng.choice(seeds)
                try:
                    mutant = mutate(seed, rng)
                except MutationFailed:
                    with lock:
                        summary["mutation_failures"] += 1
                    continue
                parsed = parse(mutant)
                fn = parsed.function()
                if fn is None:
                    with lock:
                        summary["verdicts"]["parse_error"] += 1
                    continue
                inv = Invocation(function=fn.name,
                                 args=generate_inputs(fn, rng),
                                 setup_sql=list(seed.setup_sql))
                result = inspect_dynamic(executor, mutant, inv)
                with lock:
                    summary["executions"] += 1
                    key = result.verdict.value if isinstance(result.verdict, Verdict) \
                        else str(result.verdict)
                    summary["verdicts"][key] = summary["verdicts"].get(key, 0) + 1
                if result.verdict is not Verdict.INCONSISTENT:
                    continue
                signature = dedup_signature(result, fn)
                with lock:
                    if signature in seen:
                        summary["duplicates_suppressed"] += 1
                        continue
                    seen.add(signature)
                    record = {
                        "timestamp": epoch,
                        "database": (result.fingerprint or {}).get("database"),
                        "schema": (result.fingerprint or {}).get("schema"),
                        "plsql_source": mutant,
                        "equivalent_sql": result.equivalent_sql,
                        "input_parameters": [
                            {"type": t, "value": v} for t, v in inv.args],
                        "plsql_outcome": result.plsql_outcome.to_json()
                                         if result.plsql_outcome else None,
                        "sql_outcome": result.sql_outcome.to_json()
                                       if result.sql_outcome else None,
                        "dedup_signature": signature,
                    }
                    record["plsql_outcome"].pop("wall_time_ms", None)
                    record["sql_outcome"].pop("wall_time_ms", None)
                    record["setup_sql"] = list(seed.setup_sql)
                    log_file.write(json.dumps(record, sort_keys=True) + "\n")
                    log_file.flush()
                    summary["records_logged"] += 1
        except ConnectionFailure as exc:
            with lock:
                summary["aborted"] = str(exc)
        finally:
            executor.close()

    if cfg.workers == 1:
        worker(0, cfg.iterations)
    else:
        per = cfg.iterations // cfg.workers
        extra = cfg.iterations % cfg.workers
        threads = [
            threading.Thread(target=worker, args=(i, per + (1 if i < extra else 0)))
            for i in range(cfg.workers)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
    log_file.close()
    summary["dedup_groups"] = len(seen)
    summary["duration_s"] = round(time.time() - started, 3)
    _write_summary(cfg, summary)
    return summary


def _write_summary(cfg: CampaignConfig, summary: dict) -> None:
    Path(cfg.out_path + ".summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")


def replay_record(record: dict, target: DbTarget) -> InspectionResult:
    """Re-run a logged finding; used by the validity property tests."""
    args = [(p["type"], p["value"]) for p in record["input_parameters"]]
    fn = parse(record["plsql_source"]).function()
    inv = Invocation(function=fn.name, args=args,
                     setup_sql=record.get("setup_sql", []))
    return inspect_dynamic(target, record["plsql_source"], inv)


def propose_patterns(log_path: str) -> dict:
    """Group log records by dedup signature into static-rule candidates."""
    groups: dict[str, dict] = {}
    path = Path(log_path)
    if not path.exists():
        raise FileNotFoundError(log_path)
    for line in path.read_text().splitlines():
        if not line.strip():
            continue
        record = json.loads(line)
        sig = record["dedup_signature"]
        group = groups.setdefault(sig, {
            "signature": sig,
            "count": 0,
            "representative": None,
        })
        group["count"] += 1
        if group["representative"] is None:
            group["representative"] = {
                "plsql_source": record["plsql_source"],
                "input_parameters": record["input_parameters"],
                "plsql_outcome": record.get("plsql_outcome"),
                "sql_outcome": record.get("sql_outcome"),
            }
    ordered = sorted(groups.values(), key=lambda g: (-g["count"], g["signature"]))
    return {"groups": ordered, "total_groups": len(ordered)}
