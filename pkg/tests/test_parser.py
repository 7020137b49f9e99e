"""Parser: the paper examples, every translation unit, spans, recovery."""

from __future__ import annotations

from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from plpgcheck.ast_nodes import (
    Assign,
    CaseWhen,
    Continue,
    CursorFor,
    EmbeddedSql,
    ExecuteDynamic,
    Exit,
    ForEach,
    ForRange,
    If,
    RaiseNotice,
    Return,
    While,
    walk_statements,
)
from plpgcheck.lexer import TokenKind, lex
from plpgcheck.parser import parse

from conftest import CORPUS, corpus_text, parse_corpus


class TestPaperExamples:
    def test_fig1_reset(self):
        source, result = parse_corpus("fig1_reset.sql")
        fn = result.function()
        assert fn.name == "reset"
        assert [(p.name, p.sql_type.base, p.sql_type.length) for p in fn.params] == \
            [("account_prefix", "bpchar", None)]
        assert fn.params[0].length_unspecified
        assert fn.returns_void
        (stmt,) = fn.body.statements
        assert isinstance(stmt, ExecuteDynamic)
        assert "account_prefix" in stmt.command.refs

    def test_award(self):
        source, result = parse_corpus("award.sql")
        fn = result.function()
        assert fn.name == "award"
        assert [p.sql_type.base for p in fn.params] == ["int4", "float8"]
        loop, ret = fn.body.statements
        assert isinstance(loop, ForRange)
        assert loop.hi.text == "total_num * percentage"
        assert {"total_num", "percentage"} <= loop.hi.refs
        kinds = [s.kind for s in loop.body.statements]
        assert kinds == ["raise_notice", "assign"]
        assert isinstance(ret, Return)

    def test_minimal_function(self):
        result = parse("CREATE FUNCTION f() RETURNS int AS $$ BEGIN RETURN 1; END; $$ LANGUAGE plpgsql;")
        fn = result.function()
        assert result.ok and fn.name == "f"
        (stmt,) = fn.body.statements
        assert isinstance(stmt, Return) and stmt.expr.text == "1"


UNIT_EXPECTATIONS = {
    "declare.sql": lambda fn: len(fn.declarations) == 3,
    "assign.sql": lambda fn: all(isinstance(s, (Assign, Return))
                                 for s in fn.body.statements),
    "return.sql": lambda fn: isinstance(fn.body.statements[0], Return),
    "if_else.sql": lambda fn: isinstance(fn.body.statements[0], If)
                              and len(fn.body.statements[0].elifs) == 1,
    "case_when.sql": lambda fn: isinstance(fn.body.statements[0], CaseWhen)
                                and fn.body.statements[1].selector is not None,
    "assert.sql": lambda fn: fn.body.statements[0].kind == "assert",
    "loop.sql": lambda fn: fn.body.statements[0].kind == "loop",
    "while.sql": lambda fn: isinstance(fn.body.statements[0], While),
    "for.sql": lambda fn: isinstance(fn.body.statements[0], ForRange)
                          and fn.body.statements[1].reverse
                          and fn.body.statements[1].step is not None,
    "foreach.sql": lambda fn: isinstance(fn.body.statements[0], ForEach),
    "continue.sql": lambda fn: any(isinstance(s, Continue)
                                   for s in walk_statements(fn.body)),
    "exit.sql": lambda fn: any(isinstance(s, Exit) and s.label == "outer_loop"
                               for s in walk_statements(fn.body)),
    "cursor_for.sql": lambda fn: isinstance(fn.body.statements[0], CursorFor),
}


@pytest.mark.parametrize("name", sorted(UNIT_EXPECTATIONS))
def test_unit_coverage(name):
    """Each of the thirteen supported syntax units parses from the corpus."""
    source = (CORPUS / "units" / name).read_text()
    result = parse(source, name)
    assert result.ok, [d.message for d in result.diagnostics]
    fn = result.function()
    assert fn is not None
    assert UNIT_EXPECTATIONS[name](fn), name


class TestSpans:
    def test_span_soundness(self):
        """Every statement's span lexes to the same tokens as its node."""
        for name in sorted((CORPUS / "units").glob("*.sql")):
            source = name.read_text()
            result = parse(source, str(name))
            for fn in result.functions:
                for stmt in walk_statements(fn.body):
                    text = source[stmt.span.start_byte:stmt.span.end_byte]
                    assert text.strip(), f"{name}: empty span for {stmt.kind}"
                    toks = [t for t in lex(text) if t.kind is not TokenKind.EOF]
                    assert toks, f"{name}: span lexes to nothing"

    def test_function_span_reconstructs_source(self):
        source, result = parse_corpus("award.sql")
        fn = result.function()
        text = source[fn.span.start_byte:fn.span.end_byte]
        assert text.startswith("CREATE FUNCTION award")
        assert text.rstrip().endswith("plpgsql;")
        reparsed = parse(text)
        assert reparsed.ok and reparsed.function().name == "award"

    def test_positions_are_one_based(self):
        result = parse("CREATE FUNCTION f() RETURNS int AS $$ BEGIN RETURN 1; END; $$ LANGUAGE plpgsql;")
        fn = result.function()
        assert fn.span.start_line == 1 and fn.span.start_col == 1


class TestRecoveryAndErrors:
    def test_recovers_at_statement_boundary(self):
        source = """CREATE FUNCTION broken() RETURNS int AS $$
DECLARE
  x INT := 1;
BEGIN
  x := ;
  IF THEN END something;
  RETURN x;
END;
$$ LANGUAGE plpgsql;"""
        result = parse(source)
        assert not result.ok
        fn = result.function()
        assert fn is not None
        assert any(isinstance(s, Return) for s in fn.body.statements)

    def test_sql_operator_chars_stay_in_expressions(self):
        # @ is a real SQL operator; expressions are verbatim, the engine judges
        result = parse("""CREATE FUNCTION f(x int) RETURNS int AS $$
BEGIN
  RETURN @ x;
END;
$$ LANGUAGE plpgsql;""")
        assert result.ok
        assert result.function().body.statements[0].expr.text == "@ x"

    def test_duplicate_params_flagged(self):
        result = parse("CREATE FUNCTION f(a int, a int) RETURNS int AS $$ BEGIN RETURN 1; END; $$ LANGUAGE plpgsql;")
        assert any(d.code == "scope" for d in result.diagnostics)

    def test_var_colliding_with_param_flagged(self):
        result = parse("""CREATE FUNCTION f(a int) RETURNS int AS $$
DECLARE
  a INT := 2;
BEGIN
  RETURN a;
END;
$$ LANGUAGE plpgsql;""")
        assert any(d.code == "scope" for d in result.diagnostics)

    def test_unsupported_raise_level(self):
        result = parse("""CREATE FUNCTION f() RETURNS int AS $$
BEGIN
  RAISE EXCEPTION 'no';
  RETURN 1;
END;
$$ LANGUAGE plpgsql;""")
        assert any(d.code == "unsupported" for d in result.diagnostics)

    def test_non_plpgsql_language_skipped(self):
        result = parse("CREATE FUNCTION f() RETURNS int AS $$ SELECT 1 $$ LANGUAGE sql;")
        assert result.functions == []
        assert any("LANGUAGE sql" in d.message for d in result.diagnostics)

    def test_multi_function_files(self):
        source = corpus_text("units/return.sql") + "\n" + corpus_text("units/loop.sql")
        result = parse(source)
        assert [f.name for f in result.functions] == ["u_return", "u_loop"]

    def test_toplevel_calls_are_skipped_silently(self):
        _, result = parse_corpus("fig1_reset.sql")
        assert len(result.functions) == 1 and result.ok


class TestEmbeddedSql:
    def test_select_into_extraction(self):
        source = (CORPUS / "patterns" / "p3_pos.sql").read_text()
        fn = parse(source).function()
        stmt = fn.body.statements[0]
        assert isinstance(stmt, EmbeddedSql)
        assert stmt.into_targets == ["v"]
        assert "INTO" not in stmt.query.text.upper().split()
        assert stmt.query.text.startswith("SELECT x")

    def test_returning_flag(self):
        source = (CORPUS / "patterns" / "p5_pos.sql").read_text()
        fn = parse(source).function()
        stmt = fn.body.statements[0]
        assert stmt.dml_kind == "insert" and stmt.has_returning

    def test_perform(self):
        source = (CORPUS / "patterns" / "p3_neg_perform.sql").read_text()
        fn = parse(source).function()
        stmt = fn.body.statements[0]
        assert stmt.dml_kind == "perform"
        assert stmt.into_targets is None


class TestTotality:
    @settings(max_examples=150, deadline=None)
    @given(st.text(max_size=200))
    def test_parser_never_raises(self, source):
        parse(source)

    @settings(max_examples=100, deadline=None)
    @given(st.binary(max_size=120))
    def test_parser_never_raises_on_bytes(self, raw):
        parse(raw.decode("utf-8", errors="replace"))

    def test_keyword_soup(self):
        parse("CREATE FUNCTION f() RETURNS int AS $$ BEGIN IF LOOP END WHILE "
              "CASE FOR EXIT CONTINUE END; $$ LANGUAGE plpgsql;")
