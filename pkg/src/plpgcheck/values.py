"""PostgreSQL text-format value handling: OIDs, array literals, decoding.

Both backends fetch every value in text representation together with its
type OID; typed interpretation happens here and comparison policy lives in
the inspector.
"""

from __future__ import annotations

from decimal import Decimal, InvalidOperation

OID_BOOL = 16
OID_INT8 = 20
OID_INT2 = 21
OID_INT4 = 23
OID_TEXT = 25
OID_FLOAT4 = 700
OID_FLOAT8 = 701
OID_BPCHAR = 1042
OID_VARCHAR = 1043
OID_NUMERIC = 1700
OID_VOID = 2278
OID_TEXT_ARRAY = 1009

INT_OIDS = frozenset({OID_INT2, OID_INT4, OID_INT8})
FLOAT_OIDS = frozenset({OID_FLOAT4, OID_FLOAT8})
NUMERIC_OIDS = INT_OIDS | FLOAT_OIDS | {OID_NUMERIC}
CHAR_PADDED_OIDS = frozenset({OID_BPCHAR})
TEXTUAL_OIDS = frozenset({OID_TEXT, OID_VARCHAR, OID_BPCHAR, 19, 18})

# OIDs the bridge passes through as raw text (identity parsers).
RAW_TEXT_OIDS = (
    16, 17, 18, 19, 20, 21, 23, 24, 25, 26, 114, 142, 600, 650, 700, 701,
    790, 829, 869, 1000, 1001, 1002, 1003, 1005, 1007, 1009, 1014, 1015,
    1016, 1021, 1022, 1028, 1042, 1043, 1082, 1083, 1114, 1184, 1186, 1231,
    1700, 2278, 2950, 3802,
)


class ArrayParseError(ValueError):
    pass


def parse_pg_array(text: str) -> list[str | None]:
    """Parse a one-dimensional PostgreSQL array literal into text elements.

    `{a,"b,c",NULL}` -> ["a", "b,c", None]. Quoted elements may escape `"`
    and `\\`. Nested arrays are out of scope here.
    """
    s = text.strip()
    if not (s.startswith("{") and s.endswith("}")):
        raise ArrayParseError(f"not an array literal: {text!r}")
    body = s[1:-1]
    out: list[str | None] = []
    i = 0
    n = len(body)
    if n == 0:
        return out
    while i <= n:
        # one element per loop iteration
        if i < n and body[i] == '"':
            i += 1
            buf: list[str] = []
            while i < n:
                ch = body[i]
                if ch == "\\" and i + 1 < n:
                    buf.append(body[i + 1])
                    i += 2
                    continue
                if ch == '"':
                    i += 1
                    break
                buf.append(ch)
                i += 1
            out.append("".join(buf))
            if i < n and body[i] == ",":
                i += 1
                continue
            break
        start = i
        while i < n and body[i] != ",":
            i += 1
        raw = body[start:i]
        out.append(None if raw.upper() == "NULL" else raw)
        if i < n and body[i] == ",":
            i += 1
            continue
        break
    return out


def format_pg_array(elements: list[str | None]) -> str:
    parts = []
    for el in elements:
        if el is None:
            parts.append("NULL")
        else:
            escaped = el.replace("\\", "\\\\").replace('"', '\\"')
            parts.append(f'"{escaped}"')
    return "{" + ",".join(parts) + "}"


def decode_scalar(text: str | None, oid: int):
    """Interpret a text-format value by OID: int, Decimal, float, bool, str."""
    if text is None:
        return None
    if oid in INT_OIDS:
        return int(text)
    if oid in FLOAT_OIDS:
        return float(text)
    if oid == OID_NUMERIC:
        try:
            return Decimal(text)
        except InvalidOperation as exc:
            raise ValueError(f"bad numeric {text!r}") from exc
    if oid == OID_BOOL:
        return text == "t" or text == "true"
    return text


def quote_sql_literal(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


_NUMERIC_TYPE_WORDS = frozenset({
    "int", "integer", "int2", "int4", "int8", "bigint", "smallint",
    "numeric", "decimal", "real", "float", "float4", "float8",
    "double precision", "double",
})


def render_argument(sql_type: str, text: str | None) -> str:
    """Render an invocation argument the way a programmer would write the
    call: bare literals for numeric/boolean parameter types, quoted strings
    otherwise."""
    if text is None:
        return "NULL"
    bare = text.strip()
    base = sql_type.split("(")[0].strip().lower()
    if base in _NUMERIC_TYPE_WORDS and _looks_numeric(bare):
        return bare
    if base in ("boolean", "bool") and bare.lower() in ("true", "false"):
        return bare.lower()
    return quote_sql_literal(text)


def _looks_numeric(text: str) -> bool:
    if not text:
        return False
    body = text[1:] if text[0] in "+-" else text
    if not body:
        return False
    parts = body.split(".")
    if len(parts) > 2:
        return False
    return all(p.isdigit() for p in parts if p != "") and any(p for p in parts)


def substitute_placeholders(sql: str, literals: list[str]) -> str:
    """Replace $1..$n with rendered literals, skipping strings and comments.

    The scan understands single quotes (with '' doubling), dollar quoting,
    double-quoted identifiers and both comment forms, so a `$1` inside a
    string literal is never touched.
    """
    out: list[str] = []
    i = 0
    n = len(sql)
    while i < n:
        ch = sql[i]
        if ch == "'":
            j = i + 1
            while j < n:
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        j += 2
                        continue
                    j += 1
                    break
                j += 1
            out.append(sql[i:j])
            i = j
            continue
        if ch == '"':
            j = sql.find('"', i + 1)
            j = n if j < 0 else j + 1
            out.append(sql[i:j])
            i = j
            continue
        if sql.startswith("--", i):
            j = sql.find("\n", i)
            j = n if j < 0 else j
            out.append(sql[i:j])
            i = j
            continue
        if sql.startswith("/*", i):
            depth = 1
            j = i + 2
            while j < n and depth:
                if sql.startswith("/*", j):
                    depth += 1
                    j += 2
                elif sql.startswith("*/", j):
                    depth -= 1
                    j += 2
                else:
                    j += 1
            out.append(sql[i:j])
            i = j
            continue
        if ch == "$":
            j = i + 1
            while j < n and sql[j].isdigit():
                j += 1
            if j > i + 1:
                idx = int(sql[i + 1:j]) - 1
                if 0 <= idx < len(literals):
                    out.append(literals[idx])
                    i = j
                    continue
            # dollar-quoted string: $tag$...$tag$
            k = i + 1
            while k < n and (sql[k].isalnum() or sql[k] == "_"):
                k += 1
            if k < n and sql[k] == "$":
                opener = sql[i:k + 1]
                close = sql.find(opener, k + 1)
                close = n if close < 0 else close + len(opener)
                out.append(sql[i:close])
                i = close
                continue
        out.append(ch)
        i += 1
    return "".join(out)
