"""Pure in-process reference interpreter for the inconsistency-free subset.

Used as the third oracle in the translation property suite: on programs
limited to integer arithmetic, boolean conditions and the core control
units, it must agree with both database-side executions. It deliberately
implements only that subset; anything else raises InterpUnsupported so a
test can never silently compare garbage.

Value domain: None (SQL NULL), bool, int (int4 range-checked), float
(float8), str. Three-valued logic follows SQL.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ast_nodes import (
    Assert,
    Assign,
    Block,
    CaseWhen,
    Continue,
    Exit,
    Expression,
    ForRange,
    If,
    Loop,
    NullStmt,
    PlsqlFunction,
    RaiseNotice,
    Return,
    SqlType,
    While,
    ExecuteDynamic,
    INTEGER_BASES,
    FLOAT_BASES,
)
from .lexer import Token, TokenKind, lex

INT4_MIN, INT4_MAX = -(2 ** 31), 2 ** 31 - 1


class InterpError(Exception):
    """Engine-equivalent runtime error with an SQLSTATE."""

    def __init__(self, sqlstate: str, message: str) -> None:
        super().__init__(f"{sqlstate}: {message}")
        self.sqlstate = sqlstate
        self.message = message


class InterpUnsupported(Exception):
    """Construct outside the reference subset."""


@dataclass
class InterpOutcome:
    status: str                      # "value" | "error"
    ret: object = None
    final_values: dict = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)
    exec_cmds: list[str] = field(default_factory=list)
    error: tuple[str, str] | None = None


# ── control-flow signals ─────────────────────────────────────────

class _Return(Exception):
    def __init__(self, value: object) -> None:
        self.value = value


class _Exit(Exception):
    def __init__(self, label: str | None) -> None:
        self.label = label


class _Continue(Exception):
    def __init__(self, label: str | None) -> None:
        self.label = label


# ── expression evaluation ───────────────────────────────────────

_COMPARES = {
    TokenKind.EQ: "=", TokenKind.NEQ: "<>", TokenKind.LT: "<",
    TokenKind.GT: ">", TokenKind.LE: "<=", TokenKind.GE: ">=",
}


class _ExprParser:
    """Pratt parser/evaluator for the arithmetic-boolean expression subset."""

    def __init__(self, tokens: list[Token], env: dict[str, object]) -> None:
        self.toks = [t for t in tokens if t.kind is not TokenKind.EOF]
        self.i = 0
        self.env = env

    def parse(self) -> object:
        value = self._or()
        if self.i < len(self.toks):
            raise InterpUnsupported(f"trailing tokens at {self.toks[self.i].text!r}")
        return value

    def _peek(self) -> Token | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def _advance(self) -> Token:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def _or(self) -> object:
        left = self._and()
        while (t := self._peek()) is not None and t.is_kw("or"):
            self._advance()
            right = self._and()
            left = _sql_or(_to_bool(left), _to_bool(right))
        return left

    def _and(self) -> object:
        left = self._not()
        while (t := self._peek()) is not None and t.is_kw("and"):
            self._advance()
            right = self._not()
            left = _sql_and(_to_bool(left), _to_bool(right))
        return left

    def _not(self) -> object:
        t = self._peek()
        if t is not None and t.is_kw("not"):
            self._advance()
            value = _to_bool(self._not())
            return None if value is None else not value
        return self._comparison()

    def _comparison(self) -> object:
        left = self._additive()
        t = self._peek()
        if t is not None and t.kind in _COMPARES:
            op = _COMPARES[self._advance().kind]
            right = self._additive()
            return _compare(op, left, right)
        if t is not None and t.is_kw("is"):
            self._advance()
            negate = False
            t2 = self._peek()
            if t2 is not None and t2.is_kw("not"):
                negate = True
                self._advance()
            word = self._advance()
            if word.is_kw("null"):
                result = left is None
            elif word.is_kw("true"):
                result = left is True
            elif word.is_kw("false"):
                result = left is False
            else:
                raise InterpUnsupported(f"IS {word.text}")
            return (not result) if negate else result
        return left

    def _additive(self) -> object:
        left = self._multiplicative()
        while (t := self._peek()) is not None and t.kind in (
                TokenKind.PLUS, TokenKind.MINUS, TokenKind.CONCAT):
            op = self._advance().kind
            right = self._multiplicative()
            if op is TokenKind.CONCAT:
                left = None if left is None or right is None else _text(left) + _text(right)
            else:
                left = _arith("+" if op is TokenKind.PLUS else "-", left, right)
        return left

    def _multiplicative(self) -> object:
        left = self._unary()
        while (t := self._peek()) is not None and t.kind in (
                TokenKind.STAR, TokenKind.SLASH, TokenKind.PERCENT):
            op = self._advance().kind
            right = self._unary()
            sym = {TokenKind.STAR: "*", TokenKind.SLASH: "/", TokenKind.PERCENT: "%"}[op]
            left = _arith(sym, left, right)
        return left

    def _unary(self) -> object:
        t = self._peek()
        if t is not None and t.kind is TokenKind.MINUS:
            self._advance()
            value = self._unary()
            if value is None:
                return None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InterpUnsupported("unary minus on a non-number")
            return _int4_check(-value) if isinstance(value, int) else -value
        if t is not None and t.kind is TokenKind.PLUS:
            self._advance()
            return self._unary()
        return self._postfix()

    def _postfix(self) -> object:
        value = self._atom()
        while (t := self._peek()) is not None and t.kind is TokenKind.TYPECAST:
            self._advance()
            words = []
            while (w := self._peek()) is not None and w.kind is TokenKind.WORD \
                    and len(words) < 2:
                words.append(w.norm)
                self._advance()
            if not words:
                raise InterpUnsupported("cast without a type")
            value = _cast_value(value, SqlType.normalize_base(" ".join(words)))
        return value

    def _atom(self) -> object:
        t = self._peek()
        if t is None:
            raise InterpUnsupported("unexpected end of expression")
        if t.kind is TokenKind.LPAREN:
            self._advance()
            value = self._or()
            nxt = self._peek()
            if nxt is None or nxt.kind is not TokenKind.RPAREN:
                raise InterpUnsupported("unbalanced parentheses")
            self._advance()
            return value
        if t.kind is TokenKind.INT_LIT:
            self._advance()
            return int(t.text)
        if t.kind is TokenKind.NUM_LIT:
            self._advance()
            return float(t.text)
        if t.kind is TokenKind.STRING:
            self._advance()
            return t.value
        if t.kind is TokenKind.WORD:
            if t.is_kw("true"):
                self._advance()
                return True
            if t.is_kw("false"):
                self._advance()
                return False
            if t.is_kw("null"):
                self._advance()
                return None
            if t.norm in self.env:
                self._advance()
                return self.env[t.norm]
            raise InterpUnsupported(f"identifier {t.norm!r} (function call or unknown)")
        raise InterpUnsupported(f"token {t.text!r}")


def _sql_and(a: object, b: object) -> object:
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def _sql_or(a: object, b: object) -> object:
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def _to_bool(value: object) -> object:
    if value is None or isinstance(value, bool):
        return value
    raise InterpUnsupported(f"non-boolean in boolean context: {value!r}")


def _compare(op: str, a: object, b: object) -> object:
    if a is None or b is None:
        return None
    try:
        if op == "=":
            return a == b
        if op == "<>":
            return a != b
        if op == "<":
            return a < b
        if op == ">":
            return a > b
        if op == "<=":
            return a <= b
        if op == ">=":
            return a >= b
    except TypeError as exc:
        raise InterpUnsupported(str(exc)) from exc
    raise InterpUnsupported(op)


def _int4_check(value: int) -> int:
    if not (INT4_MIN <= value <= INT4_MAX):
        raise InterpError("22003", "integer out of range")
    return value


def _arith(op: str, a: object, b: object) -> object:
    if a is None or b is None:
        return None
    if isinstance(a, bool) or isinstance(b, bool):
        raise InterpUnsupported("boolean arithmetic")
    if not isinstance(a, (int, float)) or not isinstance(b, (int, float)):
        raise InterpUnsupported(f"arithmetic on {type(a).__name__}/{type(b).__name__}")
    both_int = isinstance(a, int) and isinstance(b, int)
    if op == "+":
        out = a + b
    elif op == "-":
        out = a - b
    elif op == "*":
        out = a * b
    elif op == "/":
        if both_int:
            if b == 0:
                raise InterpError("22012", "division by zero")
            q = abs(a) // abs(b)  # integer division truncates toward zero
            out = q if (a >= 0) == (b >= 0) else -q
        else:
            if b == 0:
                raise InterpError("22012", "division by zero")
            out = a / b
    elif op == "%":
        if not both_int:
            raise InterpUnsupported("modulo on non-integers")
        if b == 0:
            raise InterpError("22012", "division by zero")
        q = abs(a) // abs(b)
        q = q if (a >= 0) == (b >= 0) else -q
        out = a - q * b
    else:
        raise InterpUnsupported(op)
    if both_int:
        return _int4_check(out)
    return out


def _cast_value(value: object, base: str) -> object:
    """Explicit `::type` cast over the interpreter's value domain."""
    if value is None:
        return None
    if base in INTEGER_BASES:
        if isinstance(value, bool):
            return 1 if value else 0
        if isinstance(value, float):
            return _int4_check(int(round(value)))
        if isinstance(value, str):
            try:
                return _int4_check(int(value.strip()))
            except ValueError:
                raise InterpError("22P02",
                                  f"invalid input syntax for type integer: {value!r}") from None
        return _int4_check(int(value))
    if base in FLOAT_BASES:
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                raise InterpError("22P02",
                                  f"invalid input syntax for type numeric: {value!r}") from None
        return float(value)
    if base in ("text", "varchar"):
        return _text(value)
    if base == "bool" and isinstance(value, bool):
        return value
    raise InterpUnsupported(f"cast to {base}")


def _text(value: object) -> str:
    """Cast to text the way the engine renders it."""
    if value is None:
        return ""
    if value is True:
        return "true"
    if value is False:
        return "false"
    if isinstance(value, float):
        out = repr(value)
        return out[:-2] if out.endswith(".0") else out
    return str(value)


def eval_expression(expr: Expression, env: dict[str, object]) -> object:
    return _ExprParser(lex(expr.text), env).parse()


# ── statement execution ─────────────────────────────────────────

class Interpreter:
    def __init__(self, fn: PlsqlFunction, fuel: int = 100_000) -> None:
        self.fn = fn
        self.fuel = fuel
        self.iterations = 0
        self.notices: list[str] = []
        self.exec_cmds: list[str] = []
        self.types = fn.scope()

    def run(self, args: list[object]) -> InterpOutcome:
        if len(args) != len(self.fn.params):
            raise ValueError("arity mismatch")
        env: dict[str, object] = {}
        try:
            for p, a in zip(self.fn.params, args):
                env[p.name] = self._cast(a, p.sql_type)
            for d in self.fn.declarations:
                value = eval_expression(d.initializer, env) if d.initializer else None
                env[d.name] = self._cast(value, d.sql_type)
            self._block(self.fn.body, env)
            if not self.fn.returns_void:
                raise InterpError("2F005", "control reached end of function without RETURN")
            ret: object = None
        except _Return as r:
            ret = r.value
        except InterpError as e:
            return InterpOutcome(status="error", error=(e.sqlstate, e.message),
                                 notices=self.notices, exec_cmds=self.exec_cmds)
        return InterpOutcome(status="value", ret=ret, final_values=dict(env),
                             notices=self.notices, exec_cmds=self.exec_cmds)

    def _cast(self, value: object, sql_type: SqlType) -> object:
        if value is None:
            return None
        base = sql_type.base
        if base in INTEGER_BASES:
            if isinstance(value, bool):
                raise InterpUnsupported("bool to int cast")
            if isinstance(value, float):
                return _int4_check(int(_round_half_even(value)))
            return _int4_check(int(value))
        if base in FLOAT_BASES:
            return float(value)
        if base == "bool":
            if isinstance(value, bool):
                return value
            raise InterpUnsupported(f"cast {value!r} to bool")
        if base in ("text", "varchar"):
            return _text(value)
        raise InterpUnsupported(f"cast to {base}")

    def _tick(self) -> None:
        self.iterations += 1
        if self.iterations > self.fuel:
            raise InterpError("54000", "loop fuel exhausted")

    def _block(self, block: Block, env: dict[str, object]) -> None:
        for stmt in block.statements:
            self._stmt(stmt, env)

    def _stmt(self, stmt, env: dict[str, object]) -> None:
        if isinstance(stmt, Assign):
            value = eval_expression(stmt.expr, env)
            sql_type = self.types.get(stmt.target)
            env[stmt.target] = self._cast(value, sql_type) if sql_type else value
        elif isinstance(stmt, Return):
            if stmt.expr is None:
                raise _Return(None)
            value = eval_expression(stmt.expr, env)
            raise _Return(self._cast(value, self.fn.return_type))
        elif isinstance(stmt, If):
            if eval_expression(stmt.cond, env) is True:
                self._block(stmt.then_block, env)
                return
            for cond, block in stmt.elifs:
                if eval_expression(cond, env) is True:
                    self._block(block, env)
                    return
            if stmt.else_block is not None:
                self._block(stmt.else_block, env)
        elif isinstance(stmt, CaseWhen):
            if stmt.selector is not None:
                sel = eval_expression(stmt.selector, env)
                for arm in stmt.arms:
                    for cond in arm.conds:
                        if _compare("=", sel, eval_expression(cond, env)) is True:
                            self._block(arm.block, env)
                            return
            else:
                for arm in stmt.arms:
                    if eval_expression(arm.conds[0], env) is True:
                        self._block(arm.block, env)
                        return
            if stmt.else_block is not None:
                self._block(stmt.else_block, env)
                return
            raise InterpError("20000", "case not found")
        elif isinstance(stmt, Assert):
            if eval_expression(stmt.cond, env) is not True:
                msg = _text(eval_expression(stmt.message, env)) if stmt.message else "assertion failed"
                raise InterpError("P0004", msg)
        elif isinstance(stmt, Loop):
            self._loop(stmt.label, lambda: True, stmt.body, env)
        elif isinstance(stmt, While):
            self._loop(stmt.label, lambda: eval_expression(stmt.cond, env) is True,
                       stmt.body, env)
        elif isinstance(stmt, ForRange):
            self._for_range(stmt, env)
        elif isinstance(stmt, Continue):
            if stmt.when is None or eval_expression(stmt.when, env) is True:
                raise _Continue(stmt.label)
        elif isinstance(stmt, Exit):
            if stmt.when is None or eval_expression(stmt.when, env) is True:
                raise _Exit(stmt.label)
        elif isinstance(stmt, RaiseNotice):
            self.notices.append(self._format_notice(stmt, env))
        elif isinstance(stmt, ExecuteDynamic):
            if stmt.into_targets is not None or stmt.has_using:
                raise InterpUnsupported("EXECUTE INTO/USING")
            value = eval_expression(stmt.command, env)
            if value is None:
                raise InterpError("22004", "query string argument of EXECUTE is null")
            self.exec_cmds.append(_text(value))
        elif isinstance(stmt, NullStmt):
            pass
        else:
            raise InterpUnsupported(f"statement {stmt.kind}")

    def _loop(self, label: str | None, cond, body: Block, env: dict[str, object]) -> None:
        while True:
            if not cond():
                return
            self._tick()
            try:
                self._block(body, env)
            except _Continue as c:
                if c.label is not None and c.label != label:
                    raise
            except _Exit as e:
                if e.label is not None and e.label != label:
                    raise
                return

    def _for_range(self, stmt: ForRange, env: dict[str, object]) -> None:
        lo = self._bound_to_int(eval_expression(stmt.lo, env))
        hi = self._bound_to_int(eval_expression(stmt.hi, env))
        step = self._bound_to_int(eval_expression(stmt.step, env)) if stmt.step else 1
        if step <= 0:
            raise InterpError("22023", "BY value of FOR loop must be greater than zero")
        saved = env.get(stmt.var, _MISSING)
        i = lo  # hidden counter, like the engine: body assignments to the
        try:    # loop variable never affect iteration
            while (i >= hi) if stmt.reverse else (i <= hi):
                self._tick()
                env[stmt.var] = i
                try:
                    self._block(stmt.body, env)
                except _Continue as c:
                    if c.label is not None and c.label != stmt.label:
                        raise
                except _Exit as e:
                    if e.label is not None and e.label != stmt.label:
                        raise
                    return
                i = i - step if stmt.reverse else i + step
        finally:
            if saved is _MISSING:
                env.pop(stmt.var, None)
            else:
                env[stmt.var] = saved

    def _bound_to_int(self, value: object) -> int:
        if value is None:
            raise InterpError("22004", "FOR bound cannot be null")
        if isinstance(value, bool):
            raise InterpUnsupported("boolean FOR bound")
        if isinstance(value, float):
            return _int4_check(int(_round_half_even(value)))
        return _int4_check(int(value))

    def _format_notice(self, stmt: RaiseNotice, env: dict[str, object]) -> str:
        out: list[str] = []
        args = iter(stmt.args)
        used = 0
        i = 0
        fmt = stmt.format
        while i < len(fmt):
            ch = fmt[i]
            if ch == "%":
                if i + 1 < len(fmt) and fmt[i + 1] == "%":
                    out.append("%")
                    i += 2
                    continue
                try:
                    arg = next(args)
                except StopIteration:
                    raise InterpError("42601", "too few parameters specified for RAISE") from None
                value = eval_expression(arg, env)
                out.append("<NULL>" if value is None else _text(value))
                used += 1
                i += 1
                continue
            out.append(ch)
            i += 1
        if used < len(stmt.args):
            raise InterpError("42601", "too many parameters specified for RAISE")
        return "".join(out)


_MISSING = object()


def _round_half_even(value: float) -> int:
    return int(round(value))  # Python round() is banker's, like float8 -> int


def run_function(fn: PlsqlFunction, args: list[object], fuel: int = 100_000) -> InterpOutcome:
    """Interpret fn on the given Python-domain argument values."""
    return Interpreter(fn, fuel).run(args)
