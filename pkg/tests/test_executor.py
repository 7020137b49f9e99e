"""Executor: sandboxing, instrumentation, outcome normalization, probe."""

from __future__ import annotations

import pytest

from plpgcheck.backend import BackendError
from plpgcheck.executor import (
    CMD_NOTICE_PREFIX,
    DbTarget,
    ExecutionOutcome,
    Executor,
    Invocation,
    TypedValue,
    instrument_execute_capture,
)
from plpgcheck.parser import parse
from plpgcheck.translate import translate
from plpgcheck.typecheck import typecheck_light

from conftest import corpus_text, function_source, parse_corpus


def table_checksums(pg: Executor) -> dict[str, str | None]:
    """Checksum of every user table's full contents."""
    result = pg.backend.query(
        "SELECT c.relname FROM pg_class c JOIN pg_namespace n "
        "ON n.oid = c.relnamespace "
        "WHERE n.nspname = 'public' AND c.relkind = 'r' ORDER BY 1")
    sums: dict[str, str | None] = {}
    for (name,) in result.rows:
        r = pg.backend.query(
            f"SELECT md5(coalesce(string_agg(t::text, '|' ORDER BY t::text), '')) "
            f"FROM {name} AS t")
        sums[name] = r.rows[0][0]
    return sums


class TestPlsqlSide:
    def test_fig1_command_capture(self, pg):
        source, result = parse_corpus("fig1_reset.sql")
        fn = result.function()
        inv = Invocation(
            function="reset", args=[("CHAR", "2")],
            setup_sql=["CREATE TABLE users (id int, userpass text)",
                       "INSERT INTO users VALUES (1, 'secret')"])
        outcome = pg.run_plsql(function_source(source, fn), inv)
        assert outcome.status == "value"
        assert outcome.exec_cmds == [
            "UPDATE users SET userpass = 'default' WHERE 1 = 2"]
        assert outcome.notices == []

    def test_award_engine_side(self, pg):
        source, result = parse_corpus("award.sql")
        fn = result.function()
        inv = Invocation(function="award", args=[("int", "10"), ("float", "0.58")])
        outcome = pg.run_plsql(function_source(source, fn), inv)
        assert outcome.status == "value"
        assert outcome.ret.text == "6"
        assert len(outcome.notices) == 6

    def test_constant_function(self, pg):
        source = "CREATE FUNCTION c1() RETURNS int AS $$ BEGIN RETURN 1; END; $$ LANGUAGE plpgsql;"
        outcome = pg.run_plsql(source, Invocation(function="c1"))
        assert outcome.status == "value" and outcome.ret.text == "1"

    def test_engine_error_recorded_not_thrown(self, pg):
        source = """CREATE FUNCTION boom() RETURNS int AS $$
BEGIN
  RETURN 1 / 0;
END;
$$ LANGUAGE plpgsql;"""
        outcome = pg.run_plsql(source, Invocation(function="boom"))
        assert outcome.status == "error"
        assert outcome.error[0] == "22012"

    def test_timeout_recorded(self, pg):
        source = """CREATE FUNCTION spin() RETURNS int AS $$
DECLARE
  s INT := 0;
BEGIN
  WHILE TRUE LOOP
    s := s + 1;
  END LOOP;
  RETURN s;
END;
$$ LANGUAGE plpgsql;"""
        fast = Executor(DbTarget(dsn="pglite://", timeout_ms=1500))
        try:
            outcome = fast.run_plsql(source, Invocation(function="spin"))
            assert outcome.status == "timeout"
        finally:
            fast.close()


class TestSandbox:
    def test_database_unchanged_by_full_inspection(self, pg):
        # committed fixture data, then a full differential run on top of it
        pg.backend.query("CREATE TABLE IF NOT EXISTS sandbox_probe (x int, y text)")
        pg.backend.query("DELETE FROM sandbox_probe")
        pg.backend.query("INSERT INTO sandbox_probe VALUES (1, 'a'), (2, 'b')")
        before = table_checksums(pg)

        source, result = parse_corpus("fig1_reset.sql")
        fn = result.function()
        inv = Invocation(
            function="reset", args=[("CHAR", "2 OR TRUE")],
            setup_sql=["CREATE TABLE users (id int, userpass text)",
                       "INSERT INTO users VALUES (1, 'secret')"])
        pg.run_plsql(function_source(source, fn), inv)
        typecheck_light(fn)
        pg.run_equivalent(translate(fn), inv)

        after = table_checksums(pg)
        assert before == after
        # the rolled-back objects are gone entirely
        with pytest.raises(BackendError):
            pg.backend.query("SELECT 1 FROM users")
        pg.backend.query("DROP TABLE sandbox_probe")

    def test_function_does_not_leak(self, pg):
        pg.run_plsql(
            "CREATE FUNCTION ghost99() RETURNS int AS $$ BEGIN RETURN 9; END; $$ LANGUAGE plpgsql;",
            Invocation(function="ghost99"))
        with pytest.raises(BackendError) as err:
            pg.backend.query("SELECT ghost99()")
        assert err.value.sqlstate == "42883"


class TestInstrumentation:
    def test_inserts_notice_before_each_execute(self):
        source, result = parse_corpus("fig1_reset.sql")
        instrumented = instrument_execute_capture(source)
        assert instrumented.count(CMD_NOTICE_PREFIX) == 1
        idx_notice = instrumented.index(CMD_NOTICE_PREFIX)
        idx_execute = instrumented.index("EXECUTE")
        assert idx_notice < idx_execute
        assert parse(instrumented).ok

    def test_noop_without_execute(self):
        source = corpus_text("award.sql")
        assert instrument_execute_capture(source) == source


class TestOutcomeNormalization:
    def test_json_round_trip(self, pg):
        source, result = parse_corpus("award.sql")
        fn = result.function()
        inv = Invocation(function="award", args=[("int", "10"), ("float", "0.58")])
        outcome = pg.run_plsql(function_source(source, fn), inv)
        round_tripped = ExecutionOutcome.from_json(outcome.to_json())
        assert round_tripped.status == outcome.status
        assert round_tripped.final_values == outcome.final_values
        assert round_tripped.notices == outcome.notices
        assert round_tripped.exec_cmds == outcome.exec_cmds
        assert round_tripped.error == outcome.error

    def test_typed_value(self):
        tv = TypedValue("42", 23)
        assert tv.to_json() == {"text": "42", "oid": 23}


class TestOneShotHelpers:
    def test_exec_plsql_and_exec_sql(self):
        from plpgcheck.executor import exec_plsql, exec_sql
        target = DbTarget(dsn="pglite://", timeout_ms=8000)
        source = ("CREATE FUNCTION one() RETURNS int AS $$ BEGIN RETURN 1; END; "
                  "$$ LANGUAGE plpgsql;")
        outcome = exec_plsql(target, source, Invocation(function="one"))
        assert outcome.ret.text == "1"
        fn = parse(source).function()
        typecheck_light(fn)
        outcome = exec_sql(target, translate(fn), Invocation(function="one"))
        assert outcome.ret.text == "1"


class TestProbe:
    def test_fingerprint(self, pg_fingerprint):
        assert "PostgreSQL" in pg_fingerprint["version"]
        assert pg_fingerprint["database"]
        assert pg_fingerprint["schema"]
        assert pg_fingerprint["below_minimum"] is False

    def test_unreachable_dsn(self):
        from plpgcheck.executor import ConnectionFailure, probe
        with pytest.raises(ConnectionFailure):
            probe(DbTarget(dsn="postgresql://nobody@127.0.0.1:1/na", timeout_ms=1000))

    def test_environment_equality_within_inspection(self, pg):
        fp1 = pg.probe()
        fp2 = pg.probe()
        assert fp1 == fp2
