"""Scope checks and the FOR-bound type classes used by pattern P2."""

from __future__ import annotations

import pytest

from plpgcheck.ast_nodes import ForRange, SqlType
from plpgcheck.parser import parse
from plpgcheck.typecheck import (
    CLASS_FLOAT,
    CLASS_INTEGER,
    CLASS_MIXED_UNKNOWN,
    classify_bound,
    typecheck_light,
)

from conftest import parse_corpus


def classify(text: str, **scope_types) -> str:
    from plpgcheck.ast_nodes import Expression
    from plpgcheck.source import LineIndex, SourceSpan
    scope = {}
    for name, base in scope_types.items():
        scope[name] = SqlType(raw=base, base=SqlType.normalize_base(base))
    expr = Expression(text=text, span=SourceSpan("<t>", 0, len(text), 1, 1, 1, len(text) + 1))
    return classify_bound(expr, scope)


class TestTypeClasses:
    def test_award_bound_is_mixed(self):
        assert classify("total_num * percentage",
                        total_num="int", percentage="float") == CLASS_MIXED_UNKNOWN

    def test_literal_bounds(self):
        assert classify("10") == CLASS_INTEGER
        assert classify("1 + 2 * 3") == CLASS_INTEGER
        assert classify("5.8") == CLASS_FLOAT
        assert classify("2.5e1") == CLASS_FLOAT

    def test_declared_type_propagation(self):
        assert classify("n", n="int") == CLASS_INTEGER
        assert classify("n + 1", n="int") == CLASS_INTEGER
        assert classify("x", x="float8") == CLASS_FLOAT
        assert classify("n * 0.9", n="int") == CLASS_MIXED_UNKNOWN

    def test_integral_wrappers_stay_integer(self):
        assert classify("FLOOR(total_num * percentage)",
                        total_num="int", percentage="float") == CLASS_INTEGER
        assert classify("ceil(x)", x="float8") == CLASS_INTEGER
        assert classify("round(x / 2.0)", x="float8") == CLASS_INTEGER

    def test_top_level_integral_cast(self):
        assert classify("(n * 0.9)::int", n="int") == CLASS_INTEGER

    def test_unknown_calls_are_mixed_unknown(self):
        assert classify("some_func(n)", n="int") == CLASS_MIXED_UNKNOWN
        assert classify("'5'") == CLASS_MIXED_UNKNOWN

    def test_integer_division_stays_integer(self):
        assert classify("n / 2", n="int") == CLASS_INTEGER


class TestAnnotation:
    def test_award_annotations(self):
        _, result = parse_corpus("award.sql")
        fn = result.function()
        _, diags = typecheck_light(fn)
        assert diags == []
        loop = fn.body.statements[0]
        assert isinstance(loop, ForRange)
        assert loop.hi.type_class == CLASS_MIXED_UNKNOWN
        assert loop.lo.type_class == CLASS_INTEGER
        assert loop.hi.var_types["total_num"].base == "int4"
        assert loop.hi.var_types["percentage"].base == "float8"

    def test_scope_error_for_undeclared(self):
        fn = parse("""CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  RETURN nothere + 1;
END;
$$ LANGUAGE plpgsql;""").function()
        _, diags = typecheck_light(fn)
        assert any(d.code == "scope" and "nothere" in d.message for d in diags)

    def test_for_variable_in_scope_inside_body_only(self):
        fn = parse("""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  s INT := 0;
BEGIN
  FOR i IN 1 .. 3 LOOP
    s := s + i;
  END LOOP;
  RETURN s + i;
END;
$$ LANGUAGE plpgsql;""").function()
        _, diags = typecheck_light(fn)
        assert any("i" == d.message.split()[-1] for d in diags), \
            [d.message for d in diags]

    def test_assignment_to_undeclared(self):
        fn = parse("""CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  ghost := 1;
  RETURN 1;
END;
$$ LANGUAGE plpgsql;""").function()
        _, diags = typecheck_light(fn)
        assert any("ghost" in d.message for d in diags)

    def test_embedded_query_scope_is_loose(self):
        fn = parse("""CREATE FUNCTION f() RETURNS int AS $$
DECLARE
  v INT;
BEGIN
  SELECT col_from_table INTO v FROM some_table WHERE key = v;
  RETURN v;
END;
$$ LANGUAGE plpgsql;""").function()
        _, diags = typecheck_light(fn)
        assert diags == [], [d.message for d in diags]
