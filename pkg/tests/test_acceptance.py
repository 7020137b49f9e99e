"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL
line. Expected values marked as derived were computed on the live engine
(PostgreSQL via the embedded backend) and then frozen here.

Run with: pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))
from genprog import generate_program

from plpgcheck.executor import DbTarget, Executor, Invocation
from plpgcheck.fuzzer import CampaignConfig, replay_record, run_campaign
from plpgcheck.inspector import Verdict, inspect_dynamic
from plpgcheck.interp import run_function
from plpgcheck.parser import parse
from plpgcheck.patterns import apply_fix, builtin_rules, match_patterns
from plpgcheck.reports import Channel
from plpgcheck.translate import translate
from plpgcheck.typecheck import typecheck_light

from conftest import CORPUS, SEEDS, corpus_text

PATTERNS = CORPUS / "patterns"

USERS_SETUP = ["CREATE TABLE users (id int, userpass text)",
               "INSERT INTO users VALUES (1, 'secret'), (2, 'hunter2')"]

# Evidence strings derived from a live engine run and frozen as golden.
FIG1_PLSQL_CMD = "UPDATE users SET userpass = 'default' WHERE 1 = 2 OR TRUE"
FIG1_SQL_CMD = "UPDATE users SET userpass = 'default' WHERE 1 = 2"


def announce(criterion: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    line = f"[acceptance] {status}  {criterion}"
    if detail:
        line += f"  ({detail})"
    print(line, file=sys.__stdout__, flush=True)
    assert passed, f"{criterion}: {detail}"


class TestAcceptance:

    def test_fig1_sql_injection_reproduction(self, pg):
        """Injection-class inconsistency: differential command strings."""
        started = time.monotonic()
        source = corpus_text("fig1_reset.sql")

        inv_bad = Invocation(function="reset", args=[("CHAR", "2 OR TRUE")],
                             setup_sql=USERS_SETUP)
        bad = inspect_dynamic(pg, source, inv_bad)
        ok = bad.verdict is Verdict.INCONSISTENT
        ok = ok and [r.channel for r in bad.reports] == [Channel.EXEC_CMDS]
        ok = ok and bad.plsql_outcome.exec_cmds == [FIG1_PLSQL_CMD]
        ok = ok and bad.sql_outcome.exec_cmds == [FIG1_SQL_CMD]
        ok = ok and "OR TRUE" in bad.reports[0].plsql_evidence
        ok = ok and "OR TRUE" not in bad.reports[0].sql_evidence

        inv_ok = Invocation(function="reset", args=[("CHAR", "2")],
                            setup_sql=USERS_SETUP)
        benign = inspect_dynamic(pg, source, inv_ok)
        ok = ok and benign.verdict is Verdict.CONSISTENT

        elapsed = time.monotonic() - started
        ok = ok and elapsed < 5.0
        announce("Fig.1 reproduction (SQL-injection inconsistency)", ok,
                 f"{elapsed:.2f}s")

    def test_fig5_for_bound_rounding_reproduction(self, pg):
        """Bound-rounding inconsistency plus quick-fix round trip."""
        started = time.monotonic()
        source = corpus_text("award.sql")
        inv = Invocation(function="award", args=[("int", "10"), ("float", "0.58")])

        before = inspect_dynamic(pg, source, inv)
        ok = before.verdict is Verdict.INCONSISTENT
        ok = ok and before.plsql_outcome.ret.text == "6"
        ok = ok and len(before.plsql_outcome.notices) == 6
        ok = ok and before.sql_outcome.ret.text == "5"
        ok = ok and len(before.sql_outcome.notices) == 5

        fn = parse(source).function()
        typecheck_light(fn)
        (p2,) = [r for r in match_patterns(fn, builtin_rules())
                 if r.pattern_id == "P2"]
        fixed = apply_fix(source, p2.fix)
        ok = ok and "FLOOR(total_num * percentage)" in fixed
        after = inspect_dynamic(pg, fixed, inv)
        ok = ok and after.verdict is Verdict.CONSISTENT

        elapsed = time.monotonic() - started
        ok = ok and elapsed < 5.0
        announce("Fig.5 reproduction (FOR-bound rounding + quick fix)", ok,
                 f"{elapsed:.2f}s")

    def test_translation_oracle_property_suite(self, pg):
        """>= 50 random subset programs: both engines and the reference
        interpreter agree on every one."""
        started = time.monotonic()
        count = 50
        failures = []
        for seed in range(count):
            source, args = generate_program(seed)
            fn = parse(source).function()
            typecheck_light(fn)
            eq = translate(fn)
            inv = Invocation(
                function=fn.name,
                args=[("int", None if a is None else str(a)) for a in args])
            plsql = pg.run_plsql(source, inv)
            sql = pg.run_equivalent(eq, inv)
            interp = run_function(fn, args)

            from plpgcheck.inspector import verdict_of
            verdict, _ = verdict_of(plsql, sql)
            if verdict is not Verdict.CONSISTENT:
                failures.append((seed, "engines diverge"))
                continue
            if plsql.status == "value" and interp.status == "value":
                expected = None if interp.ret is None else str(interp.ret)
                if plsql.ret.text != expected or plsql.notices != interp.notices:
                    failures.append((seed, "interpreter disagrees"))
            elif plsql.status == "error" and interp.status == "error":
                if plsql.error[0][:2] != interp.error[0][:2]:
                    failures.append((seed, "error classes disagree"))
            else:
                failures.append((seed, "status mismatch"))
        elapsed = time.monotonic() - started
        ok = not failures and elapsed < 300.0
        announce("Translation-oracle property suite (50 programs, 3 oracles)",
                 ok, f"{count - len(failures)}/{count} consistent, {elapsed:.1f}s"
                     + (f"; failures: {failures[:3]}" if failures else ""))

    # (positive file, expected span text, negative files) per rule
    PRECISION = {
        "P1": ("p1_pos.sql", "account_prefix CHAR",
               ["p1_neg_length.sql", "p1_neg_text.sql", "p1_neg_noflow.sql"]),
        "P2": ("p2_pos.sql", "total_num * percentage",
               ["p2_neg_literal.sql", "p2_neg_intvar.sql", "p2_neg_floor.sql"]),
        "P3": ("p3_pos.sql", "v", ["p3_neg_perform.sql", "p3_neg_plain.sql"]),
        "P4": ("p4_pos.sql",
               "EXECUTE 'DELETE FROM audit WHERE note = ' || note_text;",
               ["p4_neg_noexec.sql", "p4_neg_noexec2.sql"]),
        "P5": ("p5_pos.sql", "INSERT INTO audit (note) VALUES (v) RETURNING id;",
               ["p5_neg_noreturning.sql", "p5_neg_into.sql"]),
    }

    def test_static_pattern_precision(self):
        """Positives fire exactly once at golden spans, negatives never,
        fixes reach their fixpoint. No database involved."""
        problems = []
        for rule_id, (pos, span_text, negatives) in sorted(self.PRECISION.items()):
            source = (PATTERNS / pos).read_text()
            fn = parse(source).function()
            typecheck_light(fn)
            hits = [r for r in match_patterns(fn, builtin_rules())
                    if r.pattern_id == rule_id]
            if len(hits) != 1:
                problems.append(f"{rule_id}: fired {len(hits)}x in {pos}")
                continue
            actual = source[hits[0].span.start_byte:hits[0].span.end_byte]
            if actual != span_text:
                problems.append(f"{rule_id}: span {actual!r}")
            for neg in negatives:
                neg_source = (PATTERNS / neg).read_text()
                neg_fn = parse(neg_source).function()
                typecheck_light(neg_fn)
                neg_hits = [r for r in match_patterns(neg_fn, builtin_rules())
                            if r.pattern_id == rule_id]
                if neg_hits:
                    problems.append(f"{rule_id}: fired in negative {neg}")
            if hits[0].fix:
                fixed = apply_fix(source, hits[0].fix)
                fixed_result = parse(fixed)
                if not fixed_result.ok:
                    problems.append(f"{rule_id}: fix does not reparse")
                else:
                    ffn = fixed_result.function()
                    typecheck_light(ffn)
                    refires = [r for r in match_patterns(ffn, builtin_rules())
                               if r.pattern_id == rule_id]
                    if refires:
                        problems.append(f"{rule_id}: fix is not a fixpoint")
        announce("Static pattern precision (P1-P5 corpus + fixpoint)",
                 not problems, "; ".join(problems) or "all golden")

    def test_fuzz_smoke_campaign(self, tmp_path):
        """1000 iterations, fixed seed: finds both flagship classes and the
        log replays to identical verdicts."""
        started = time.monotonic()
        log = tmp_path / "campaign.jsonl"
        cfg = CampaignConfig(
            seed_dir=str(SEEDS), iterations=1000,
            target=DbTarget(dsn="pglite://", timeout_ms=1500),
            out_path=str(log), rng_seed=42, epoch="acceptance")
        summary = run_campaign(cfg)
        signatures = [json.loads(line)["dedup_signature"]
                      for line in log.read_text().splitlines()]
        p1_class = [s for s in signatures
                    if s.startswith("exec_cmds|execute_dynamic|text->bpchar")]
        p2_class = [s for s in signatures
                    if s.startswith("return_value|for_range|float8->int4")
                    or s.startswith("notices|for_range|float8->int4")]
        ok = bool(p1_class) and bool(p2_class)
        ok = ok and summary["records_logged"] == len(set(signatures))

        replay_target = DbTarget(dsn="pglite://", timeout_ms=3000)
        for line in log.read_text().splitlines():
            record = json.loads(line)
            if replay_record(record, replay_target).verdict is not Verdict.INCONSISTENT:
                ok = False
                break
        elapsed = time.monotonic() - started
        ok = ok and elapsed < 600.0
        announce("Fuzz smoke campaign (1000 iterations, P1+P2 classes, replay)",
                 ok, f"{summary['records_logged']} records, "
                     f"{len(p1_class)} P1-class, {len(p2_class)} P2-class, "
                     f"{elapsed:.0f}s")

    def test_sandbox_invariant(self, tmp_path):
        """A full run + fuzz session against a persistent data directory
        leaves every user table checksum unchanged."""
        dsn = f"pglite://{tmp_path}/data"
        target = DbTarget(dsn=dsn, timeout_ms=1500)

        def checksums(executor: Executor) -> dict:
            result = executor.backend.query(
                "SELECT c.relname FROM pg_class c JOIN pg_namespace n "
                "ON n.oid = c.relnamespace "
                "WHERE n.nspname = 'public' AND c.relkind = 'r' ORDER BY 1")
            out = {}
            for (name,) in result.rows:
                r = executor.backend.query(
                    f"SELECT md5(coalesce(string_agg(t::text, '|' ORDER BY t::text), '')) "
                    f"FROM {name} AS t")
                out[name] = r.rows[0][0]
            return out

        fixture = Executor(target)
        fixture.backend.query(
            "CREATE TABLE acct_fixture (id int, balance int)")
        fixture.backend.query(
            "INSERT INTO acct_fixture SELECT g, g * 100 FROM generate_series(1, 20) g")
        before = checksums(fixture)
        fixture.close()

        session = Executor(target)
        inv = Invocation(function="reset", args=[("CHAR", "2 OR TRUE")],
                         setup_sql=USERS_SETUP)
        result = inspect_dynamic(session, corpus_text("fig1_reset.sql"), inv)
        assert result.verdict is Verdict.INCONSISTENT
        session.close()

        cfg = CampaignConfig(
            seed_dir=str(SEEDS), iterations=40, target=target,
            out_path=str(tmp_path / "sandbox_fuzz.jsonl"), rng_seed=7, epoch="E")
        run_campaign(cfg)

        check = Executor(target)
        after = checksums(check)
        check.close()
        announce("Sandbox invariant (user tables unchanged after run + fuzz)",
                 before == after and "acct_fixture" in before,
                 f"{len(before)} tables checksummed")
