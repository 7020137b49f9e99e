"""Translator: shape of the emitted SQL, fragment laws, engine-verified
semantics of each translation rule, and the unsupported-construct paths."""

from __future__ import annotations

import pytest

from plpgcheck.executor import Executor, Invocation
from plpgcheck.parser import parse
from plpgcheck.translate import (
    DEFAULT_FUEL,
    Translator,
    Unsupported,
    compose_fragments,
    identity_fragment,
    translate,
    translate_conditional,
    translate_loop,
    translate_variable,
)
from plpgcheck.typecheck import typecheck_light

from conftest import corpus_text, function_source, parse_corpus


def fn_of(source: str):
    result = parse(source)
    assert result.ok, [d.message for d in result.diagnostics]
    fn = result.function()
    typecheck_light(fn)
    return fn


def run_eq(pg: Executor, source: str, fn_name: str, args=(), setup=()) -> dict:
    """Translate + execute the equivalent query; returns the outcome."""
    fn = fn_of(source)
    eq = translate(fn)
    typed = [(p.sql_type.raw, None if v is None else str(v))
             for p, v in zip(fn.params, args)]
    inv = Invocation(function=fn_name, args=typed, setup_sql=list(setup))
    return pg.run_equivalent(eq, inv)


CONST_FN = "CREATE FUNCTION f() RETURNS int AS $$ BEGIN RETURN 1; END; $$ LANGUAGE plpgsql;"


class TestQueryShape:
    def test_constant_function_shape(self):
        eq = translate(fn_of(CONST_FN))
        assert "(1)::int" in eq.sql_text
        assert eq.column_map["ret"] >= 1
        assert eq.param_placeholders == []
        assert eq.return_type == "int4"

    def test_fig1_contains_lateral_param_cast_and_cmds(self):
        source, result = parse_corpus("fig1_reset.sql")
        fn = result.function()
        typecheck_light(fn)
        eq = translate(fn)
        assert "LATERAL (SELECT ($1)::CHAR)" in eq.sql_text
        assert "account_prefix" in eq.sql_text
        assert "__cmds" in eq.sql_text and "exec_cmds" in eq.column_map
        assert eq.param_placeholders == [("account_prefix", "CHAR")]

    def test_award_is_recursive_with_verbatim_bound(self):
        source, result = parse_corpus("award.sql")
        fn = result.function()
        typecheck_light(fn)
        eq = translate(fn)
        assert "WITH RECURSIVE" in eq.sql_text
        # the bound expression is embedded verbatim, never cast to int
        assert "(total_num * percentage)" in eq.sql_text
        assert "(total_num * percentage)::" not in eq.sql_text

    def test_determinism(self):
        source, result = parse_corpus("award.sql")
        fn = result.function()
        typecheck_light(fn)
        assert translate(fn).sql_text == translate(fn).sql_text

    def test_fuel_is_embedded(self):
        fn = fn_of(corpus_text("award.sql"))
        eq = translate(fn, fuel=777)
        assert "777" in eq.sql_text and eq.fuel == 777

    def test_fuel_must_be_positive(self):
        with pytest.raises(ValueError):
            translate(fn_of(CONST_FN), fuel=0)


class TestFragmentLaws:
    def test_identity(self):
        assert identity_fragment("SELECT 1") == "SELECT 1"

    def test_composition_associative(self):
        f = lambda s: f"A({s})"
        g = lambda s: f"B({s})"
        h = lambda s: f"C({s})"
        left = compose_fragments([compose_fragments([f, g]), h])
        right = compose_fragments([f, compose_fragments([g, h])])
        assert left("x") == right("x") == "C(B(A(x)))"

    def test_identity_is_neutral(self):
        f = lambda s: f"A({s})"
        assert compose_fragments([identity_fragment, f])("x") == \
            compose_fragments([f, identity_fragment])("x") == "A(x)"


class TestVariableRule:
    def test_declaration_emits_lateral(self):
        fn = fn_of("""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT := 3;
BEGIN
  RETURN x;
END;
$$ LANGUAGE plpgsql;""")
        fragment = translate_variable(fn, fn.declarations[0])
        sql = fragment("SELECT 0 AS __iter")
        assert "CROSS JOIN LATERAL (SELECT" in sql
        assert "(3)::INT" in sql

    def test_assignment_arithmetic(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT := 3;
BEGIN
  x := x + 1;
  RETURN x;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f")
        assert outcome.ret.text == "4"

    def test_char_param_cast_truncates_on_sql_side(self, pg):
        # SELECT '2 OR TRUE'::CHAR is '2' on the engine; the equivalent
        # query must reproduce exactly that
        source = """CREATE FUNCTION f(c CHAR) RETURNS text AS $$
BEGIN
  RETURN 'got ' || c;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f", args=["2 OR TRUE"])
        assert outcome.ret.text == "got 2"


class TestConditionalRule:
    def test_constant_condition(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT;
BEGIN
  IF TRUE THEN
    x := 1;
  ELSE
    x := 2;
  END IF;
  RETURN x;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "1"

    def test_null_condition_takes_else(self, pg):
        # verified against the engine: IF NULL runs the ELSE branch
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT;
BEGIN
  IF (NULL::boolean) THEN
    x := 1;
  ELSE
    x := 2;
  END IF;
  RETURN x;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "2"

    def test_overlapping_case_first_match_wins(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT := 5;
  r INT;
BEGIN
  CASE WHEN x > 1 THEN r := 10; WHEN x > 2 THEN r := 20; ELSE r := 30; END CASE;
  RETURN r;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "10"

    def test_branch_exclusivity_all_condition_values(self, pg):
        """Exactly one branch survives for TRUE, FALSE and NULL conditions."""
        for cond, expected in (("TRUE", "1"), ("FALSE", "2"), ("NULL::boolean", "2")):
            source = f"""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT;
BEGIN
  IF ({cond}) THEN
    x := 1;
  ELSE
    x := 2;
  END IF;
  RETURN x;
END;
$$ LANGUAGE plpgsql;"""
            outcome = run_eq(pg, source, "f")
            assert outcome.status == "value", (cond, outcome.error)
            assert outcome.ret.text == expected, cond

    def test_case_no_match_is_engine_error(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  x INT := 5;
BEGIN
  CASE WHEN x > 100 THEN x := 1; END CASE;
  RETURN x;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f")
        assert outcome.status == "error"
        assert outcome.error[0] == "20000"

    def test_assert_failure_maps_to_error(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  ASSERT 1 = 2, 'boom';
  RETURN 1;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f")
        assert outcome.status == "error"
        assert outcome.error == ("P0004", "boom")

    def test_simple_case_selector(self, pg):
        source = """CREATE FUNCTION f(n int) RETURNS text AS $$
DECLARE
  r TEXT;
BEGIN
  CASE n
    WHEN 0, 1 THEN r := 'small';
    WHEN 2 THEN r := 'two';
    ELSE r := 'big';
  END CASE;
  RETURN r;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f", args=[1]).ret.text == "small"
        assert run_eq(pg, source, "f", args=[2]).ret.text == "two"
        assert run_eq(pg, source, "f", args=[9]).ret.text == "big"


class TestLoopRule:
    def test_for_sum(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  s INT := 0;
BEGIN
  FOR i IN 1 .. 3 LOOP
    s := s + i;
  END LOOP;
  RETURN s;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "6"

    def test_while_false_keeps_init_state(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  s INT := 42;
BEGIN
  WHILE FALSE LOOP
    s := 0;
  END LOOP;
  RETURN s;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "42"

    def test_award_sql_side_runs_five_iterations(self, pg):
        # while the engine rounds the bound to 6, the literal reading of
        # i <= 5.8 stops after 5
        outcome = run_eq(pg, corpus_text("award.sql"), "award", args=[10, 0.58])
        assert outcome.ret.text == "5"
        assert len(outcome.notices) == 5

    def test_unroll_equivalence_trip_count(self, pg):
        """For statically known trip count k, the terminal iter equals k."""
        for k in (0, 1, 4, 7):
            source = f"""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  s INT := 0;
BEGIN
  FOR i IN 1 .. {k} LOOP
    s := s + 1;
  END LOOP;
  RETURN s;
END;
$$ LANGUAGE plpgsql;"""
            fn = fn_of(source)
            eq = translate(fn)
            inv = Invocation(function="f", args=[])
            outcome = pg.run_equivalent(eq, inv)
            assert outcome.ret.text == str(k)
            iter_tv = outcome.final_values.get("iter")
            assert iter_tv is not None and iter_tv.text == str(k)

    def test_fuel_exhaustion_is_distinct_outcome(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  s INT := 0;
BEGIN
  WHILE TRUE LOOP
    s := s + 1;
  END LOOP;
  RETURN s;
END;
$$ LANGUAGE plpgsql;"""
        fn = fn_of(source)
        eq = translate(fn, fuel=50)
        outcome = pg.run_equivalent(eq, Invocation(function="f"))
        assert outcome.status == "fuel_exhausted"

    def test_fuel_monotonicity(self, pg):
        """More fuel never changes a program that already terminated."""
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  s INT := 0;
BEGIN
  FOR i IN 1 .. 6 LOOP
    s := s + i;
  END LOOP;
  RETURN s;
END;
$$ LANGUAGE plpgsql;"""
        fn = fn_of(source)
        results = []
        for fuel in (10, 100, 10_000):
            eq = translate(fn, fuel=fuel)
            results.append(pg.run_equivalent(eq, Invocation(function="f")).ret.text)
        assert results == ["21", "21", "21"]

    def test_labeled_exit_to_outer(self, pg):
        source = corpus_text("units/exit.sql")
        outcome = run_eq(pg, source, "u_exit")
        assert outcome.ret.text == "8"

    def test_foreach(self, pg):
        outcome = run_eq(pg, corpus_text("units/foreach.sql"), "u_foreach")
        assert outcome.ret.text == "10"

    def test_cursor_for_scalar(self, pg):
        outcome = run_eq(pg, corpus_text("units/cursor_for.sql"), "u_cursor")
        assert outcome.ret.text == "6"

    def test_reverse_with_step(self, pg):
        outcome = run_eq(pg, corpus_text("units/for.sql"), "u_for")
        # 1+2+3+4+5 = 15, then minus (4 + 2) = 9
        assert outcome.ret.text == "9"

    def test_continue_when(self, pg):
        outcome = run_eq(pg, corpus_text("units/continue.sql"), "u_continue")
        assert outcome.ret.text == "25"

    def test_nested_loop_shadowing(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  i INT := 99;
  s INT := 0;
BEGIN
  FOR i IN 1 .. 3 LOOP
    s := s + i;
  END LOOP;
  RETURN s * 100 + i;
END;
$$ LANGUAGE plpgsql;"""
        # the loop shadows i; after the loop the outer i is untouched
        assert run_eq(pg, source, "f").ret.text == "699"


class TestSideChannels:
    def test_notice_per_iteration(self, pg):
        outcome = run_eq(pg, corpus_text("award.sql"), "award", args=[3, 1.0])
        assert outcome.notices == [
            "Prize for the person with ranking 1",
            "Prize for the person with ranking 2",
            "Prize for the person with ranking 3",
        ]

    def test_constant_execute_command_captured_not_executed(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  EXECUTE 'DROP TABLE precious';
  RETURN 1;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f",
                         setup=["CREATE TABLE precious (x int)"])
        assert outcome.status == "value"
        assert outcome.exec_cmds == ["DROP TABLE precious"]

    def test_notice_percent_escapes(self, pg):
        source = """CREATE FUNCTION f() RETURNS void AS $$
BEGIN
  RAISE NOTICE 'a 100%% b %', 'x';
  RAISE NOTICE 'nil %', NULL::int;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f")
        assert outcome.notices == ["a 100% b x", "nil <NULL>"]

    def test_select_into(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  v INT;
BEGIN
  SELECT x INTO v FROM (VALUES (41)) AS t(x);
  RETURN v + 1;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "42"

    def test_select_into_no_rows_yields_null(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  v INT := 7;
BEGIN
  SELECT x INTO v FROM (VALUES (41)) AS t(x) WHERE FALSE;
  IF v IS NULL THEN
    RETURN -1;
  END IF;
  RETURN v;
END;
$$ LANGUAGE plpgsql;"""
        assert run_eq(pg, source, "f").ret.text == "-1"

    def test_missing_return_maps_to_2f005(self, pg):
        source = """CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  v INT;
BEGIN
  v := 1;
END;
$$ LANGUAGE plpgsql;"""
        outcome = run_eq(pg, source, "f")
        assert outcome.status == "error" and outcome.error[0] == "2F005"


class TestUnsupported:
    def expect_unsupported(self, source: str, unit: str):
        fn = fn_of(source)
        with pytest.raises(Unsupported) as err:
            translate(fn)
        assert err.value.unit == unit
        return err.value

    def test_execute_into(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  v INT;
BEGIN
  EXECUTE 'SELECT 1' INTO v;
  RETURN v;
END;
$$ LANGUAGE plpgsql;""", "execute")

    def test_embedded_dml(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS void AS $$
BEGIN
  INSERT INTO t VALUES (1);
END;
$$ LANGUAGE plpgsql;""", "embedded_sql")

    def test_cursor_for_record_var(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  FOR r IN SELECT 1 AS x LOOP
    RETURN 1;
  END LOOP;
  RETURN 0;
END;
$$ LANGUAGE plpgsql;""", "cursor_for")

    def test_reserved_prefix_identifier(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  __iter INT := 1;
BEGIN
  RETURN __iter;
END;
$$ LANGUAGE plpgsql;""", "declare")

    def test_return_value_in_void_function(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS void AS $$
BEGIN
  RETURN 1;
END;
$$ LANGUAGE plpgsql;""", "return")

    def test_continue_outside_loop(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  CONTINUE;
  RETURN 1;
END;
$$ LANGUAGE plpgsql;""", "continue")

    def test_exit_with_unknown_label(self):
        self.expect_unsupported("""CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  FOR i IN 1 .. 2 LOOP
    EXIT nosuch;
  END LOOP;
  RETURN 1;
END;
$$ LANGUAGE plpgsql;""", "exit")


class TestPerUnitFragments:
    def test_conditional_fragment_shape(self):
        fn = fn_of(corpus_text("units/if_else.sql"))
        fragment = translate_conditional(fn, fn.body.statements[0])
        sql = fragment("SELECT 'NORMAL'::text AS __ctrl")
        assert "UNION ALL" in sql
        assert "IS TRUE" in sql

    def test_loop_fragment_shape(self):
        fn = fn_of(corpus_text("units/while.sql"))
        fragment = translate_loop(fn, fn.body.statements[0])
        sql = fragment("SELECT 'NORMAL'::text AS __ctrl")
        assert "WITH RECURSIVE" in sql
        assert "ORDER BY __iter DESC LIMIT 1" in sql
