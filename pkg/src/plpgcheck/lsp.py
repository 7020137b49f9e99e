"""Language server: static-mode diagnostics, quick-fix code actions, and a
custom dynamic-inspection request, over LSP stdio framing.

Custom methods (documented contract):

  inspect/dynamic    params {uri, version?, function, args: [string|null],
                     setupSql?: [string]} -> the JSON report schema.
                     Runs on a worker thread so diagnostics stay live.
  inspect/signatures params {uri} -> [{name, params: [{name, type}],
                     returns}] for panel form generation.

Database settings arrive only via initializationOptions or
workspace/didChangeConfiguration under the "plpgcheck" key
({dsn, timeoutMs, fuel}); the server never reads project files for
credentials.

Error codes: -32001 configuration required, -32002 stale document version,
-32003 connection failure, -32010 parse/unsupported input.
"""

from __future__ import annotations

import json
import sys
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .executor import ConnectionFailure, DbTarget, Invocation
from .inspector import CompareConfig, inspect_dynamic
from .parser import ParseResult, parse
from .patterns import PatternRule, builtin_rules, load_rules, match_patterns
from .reports import InconsistencyReport, Severity
from .source import LineIndex, SourceSpan
from .typecheck import typecheck_light

ERR_CONFIG_REQUIRED = -32001
ERR_STALE_VERSION = -32002
ERR_CONNECTION = -32003
ERR_BAD_INPUT = -32010

_SEVERITY_MAP = {Severity.ERROR: 1, Severity.WARNING: 2, Severity.INFO: 3}


@dataclass
class _Document:
    text: str
    version: int
    parsed: ParseResult | None = None


@dataclass
class SessionState:
    documents: dict[str, _Document] = field(default_factory=dict)
    dsn: str | None = None
    timeout_ms: int = 5000
    fuel: int = 100_000
    rules: list[PatternRule] = field(default_factory=builtin_rules)


class LspServer:
    def __init__(self, reader=None, writer=None) -> None:
        self.reader = reader if reader is not None else sys.stdin.buffer
        self.writer = writer if writer is not None else sys.stdout.buffer
        self.state = SessionState()
        self._write_lock = threading.Lock()
        self._state_lock = threading.Lock()
        self._pool = ThreadPoolExecutor(max_workers=2,
                                        thread_name_prefix="plpgcheck-dyn")
        self._shutdown = False
        self._running = True

    # ── framing ──────────────────────────────────────────────────

    def _read_message(self) -> dict | None:
        headers = {}
        while True:
            line = self.reader.readline()
            if not line:
                return None
            line = line.strip()
            if not line:
                break
            key, _, value = line.partition(b":")
            headers[key.strip().lower()] = value.strip()
        length = int(headers.get(b"content-length", b"0"))
        if length <= 0:
            return None
        body = self.reader.read(length)
        return json.loads(body.decode("utf-8"))

    def _write_message(self, payload: dict) -> None:
        body = json.dumps(payload).encode("utf-8")
        with self._write_lock:
            self.writer.write(f"Content-Length: {len(body)}\r\n\r\n".encode())
            self.writer.write(body)
            self.writer.flush()

    def _respond(self, msg_id, result=None, error: dict | None = None) -> None:
        payload: dict = {"jsonrpc": "2.0", "id": msg_id}
        if error is not None:
            payload["error"] = error
        else:
            payload["result"] = result
        self._write_message(payload)

    def _notify(self, method: str, params: dict) -> None:
        self._write_message({"jsonrpc": "2.0", "method": method, "params": params})

    # ── main loop ────────────────────────────────────────────────

    def serve(self) -> None:
        while self._running:
            msg = self._read_message()
            if msg is None:
                break
            self._dispatch(msg)
        self._pool.shutdown(wait=False)

    def _dispatch(self, msg: dict) -> None:
        method = msg.get("method", "")
        msg_id = msg.get("id")
        params = msg.get("params") or {}
        try:
            if method == "initialize":
                self._on_initialize(msg_id, params)
            elif method == "initialized":
                pass
            elif method == "shutdown":
                self._shutdown = True
                self._respond(msg_id, None)
            elif method == "exit":
                self._running = False
            elif method == "textDocument/didOpen":
                self._on_open(params)
            elif method == "textDocument/didChange":
                self._on_change(params)
            elif method == "textDocument/didClose":
                self._on_close(params)
            elif method == "textDocument/codeAction":
                self._respond(msg_id, self._on_code_action(params))
            elif method == "workspace/didChangeConfiguration":
                self._on_configuration(params.get("settings") or {})
            elif method == "inspect/dynamic":
                self._pool.submit(self._on_inspect_dynamic, msg_id, params)
            elif method == "inspect/signatures":
                self._respond(msg_id, self._on_signatures(params))
            elif msg_id is not None:
                self._respond(msg_id, error={"code": -32601,
                                             "message": f"method {method} not found"})
        except Exception as exc:  # never crash the server on malformed input
            if msg_id is not None:
                self._respond(msg_id, error={"code": -32603, "message": str(exc)})

    # ── lifecycle / config ───────────────────────────────────────

    def _on_initialize(self, msg_id, params: dict) -> None:
        options = params.get("initializationOptions") or {}
        self._on_configuration({"plpgcheck": options} if options else {})
        self._respond(msg_id, {
            "capabilities": {
                "textDocumentSync": {"openClose": True, "change": 1},  # full sync
                "codeActionProvider": {"codeActionKinds": ["quickfix"]},
            },
            "serverInfo": {"name": "plpgcheck", "version": "0.1.0"},
        })

    def _on_configuration(self, settings: dict) -> None:
        cfg = settings.get("plpgcheck") or {}
        with self._state_lock:
            if "dsn" in cfg:
                self.state.dsn = cfg["dsn"] or None
            if "timeoutMs" in cfg:
                self.state.timeout_ms = int(cfg["timeoutMs"])
            if "fuel" in cfg:
                self.state.fuel = int(cfg["fuel"])
            if "rulesDir" in cfg:
                try:
                    self.state.rules = load_rules(cfg["rulesDir"]) \
                        if cfg["rulesDir"] else builtin_rules()
                except Exception:
                    self.state.rules = builtin_rules()

    # ── documents & diagnostics ──────────────────────────────────

    def _on_open(self, params: dict) -> None:
        doc = params["textDocument"]
        self._update_document(doc["uri"], doc["text"], doc.get("version", 0))

    def _on_change(self, params: dict) -> None:
        doc = params["textDocument"]
        changes = params.get("contentChanges") or []
        if not changes:
            return
        text = changes[-1].get("text", "")
        self._update_document(doc["uri"], text, doc.get("version", 0))

    def _on_close(self, params: dict) -> None:
        uri = params["textDocument"]["uri"]
        with self._state_lock:
            self.state.documents.pop(uri, None)
        self._notify("textDocument/publishDiagnostics",
                     {"uri": uri, "diagnostics": []})

    def _update_document(self, uri: str, text: str, version: int) -> None:
        with self._state_lock:
            current = self.state.documents.get(uri)
            if current is not None and version < current.version:
                return  # stale change: never publish for superseded versions
            parsed = parse(text, uri)
            self.state.documents[uri] = _Document(text=text, version=version,
                                                  parsed=parsed)
            rules = self.state.rules
        diagnostics = self._diagnostics_for(parsed, rules)
        with self._state_lock:
            latest = self.state.documents.get(uri)
            if latest is None or latest.version != version:
                return
        self._notify("textDocument/publishDiagnostics", {
            "uri": uri, "version": version, "diagnostics": diagnostics,
        })

    def _diagnostics_for(self, parsed: ParseResult, rules) -> list[dict]:
        text = parsed.source
        out = []
        for d in parsed.diagnostics:
            out.append({
                "range": _span_to_range(text, d.span),
                "severity": 1 if d.severity == "error" else 2,
                "code": d.code,
                "source": "plpgcheck",
                "message": d.message,
            })
        for fn in parsed.functions:
            _, type_diags = typecheck_light(fn)
            for d in type_diags:
                out.append({
                    "range": _span_to_range(text, d.span),
                    "severity": 1,
                    "code": d.code,
                    "source": "plpgcheck",
                    "message": d.message,
                })
            for report in match_patterns(fn, rules):
                out.append(_report_to_diagnostic(text, report))
        return out

    # ── code actions ─────────────────────────────────────────────

    def _on_code_action(self, params: dict) -> list[dict]:
        uri = params["textDocument"]["uri"]
        rng = params["range"]
        with self._state_lock:
            doc = self.state.documents.get(uri)
            rules = self.state.rules
        if doc is None or doc.parsed is None:
            return []
        actions = []
        for fn in doc.parsed.functions:
            typecheck_light(fn)
            for report in match_patterns(fn, rules):
                if not report.fix:
                    continue
                report_range = _span_to_range(doc.text, report.span)
                if not _ranges_intersect(report_range, rng):
                    continue
                actions.append({
                    "title": _fix_title(report),
                    "kind": "quickfix",
                    "diagnostics": [_report_to_diagnostic(doc.text, report)],
                    "edit": {"changes": {uri: [
                        _edit_to_lsp(doc.text, e.start_byte, e.end_byte, e.new_text)
                        for e in report.fix
                    ]}},
                })
        return actions

    # ── custom requests ──────────────────────────────────────────

    def _on_signatures(self, params: dict) -> list[dict]:
        uri = params["textDocument"]["uri"] if "textDocument" in params else params["uri"]
        with self._state_lock:
            doc = self.state.documents.get(uri)
        if doc is None or doc.parsed is None:
            return []
        return [
            {
                "name": fn.name,
                "params": [{"name": p.name, "type": p.sql_type.raw} for p in fn.params],
                "returns": fn.return_type.raw,
            }
            for fn in doc.parsed.functions
        ]

    def _on_inspect_dynamic(self, msg_id, params: dict) -> None:
        uri = params.get("uri")
        with self._state_lock:
            doc = self.state.documents.get(uri) if uri else None
            dsn = self.state.dsn
            timeout_ms = self.state.timeout_ms
            fuel = self.state.fuel
        if doc is None:
            self._respond(msg_id, error={"code": ERR_BAD_INPUT,
                                         "message": f"document {uri} is not open"})
            return
        version = params.get("version")
        if version is not None and version != doc.version:
            self._respond(msg_id, error={
                "code": ERR_STALE_VERSION,
                "message": f"document version {version} superseded by {doc.version}"})
            return
        if not dsn:
            self._respond(msg_id, error={
                "code": ERR_CONFIG_REQUIRED,
                "message": "no database configured: set plpgcheck.dsn"})
            return
        fn_name = params.get("function")
        fn = doc.parsed.function(fn_name) if doc.parsed else None
        if fn is None:
            self._respond(msg_id, error={
                "code": ERR_BAD_INPUT,
                "message": f"function {fn_name!r} not found in {uri}"})
            return
        args = params.get("args") or []
        if len(args) != len(fn.params):
            self._respond(msg_id, error={
                "code": ERR_BAD_INPUT,
                "message": f"{fn.name} takes {len(fn.params)} arguments, got {len(args)}"})
            return
        inv = Invocation(
            function=fn.name,
            args=[(p.sql_type.raw, a) for p, a in zip(fn.params, args)],
            setup_sql=list(params.get("setupSql") or []),
        )
        target = DbTarget(dsn=dsn, timeout_ms=timeout_ms, fuel=fuel)
        try:
            result = inspect_dynamic(target, doc.text, inv, CompareConfig(),
                                     file_id=uri)
        except ConnectionFailure as exc:
            self._respond(msg_id, error={"code": ERR_CONNECTION, "message": str(exc)})
            return
        if result.verdict in ("parse_error", "unsupported"):
            self._respond(msg_id, error={
                "code": ERR_BAD_INPUT,
                "message": f"{result.verdict}: {result.problem}"})
            return
        self._respond(msg_id, result.to_json())


# ── position plumbing ────────────────────────────────────────────

def _utf16_col(line_text: str, col_codepoints: int) -> int:
    prefix = line_text[:col_codepoints - 1]
    return len(prefix.encode("utf-16-le")) // 2


def _span_to_range(text: str, span: SourceSpan) -> dict:
    index = LineIndex(text)
    start_line_text = index.line_text(span.start_line)
    end_line_text = index.line_text(span.end_line)
    return {
        "start": {"line": span.start_line - 1,
                  "character": _utf16_col(start_line_text, span.start_col)},
        "end": {"line": span.end_line - 1,
                "character": _utf16_col(end_line_text, span.end_col)},
    }


def _edit_to_lsp(text: str, start_byte: int, end_byte: int, new_text: str) -> dict:
    index = LineIndex(text)
    sl, sc = index.position(start_byte)
    el, ec = index.position(end_byte)
    return {
        "range": {
            "start": {"line": sl - 1, "character": _utf16_col(index.line_text(sl), sc)},
            "end": {"line": el - 1, "character": _utf16_col(index.line_text(el), ec)},
        },
        "newText": new_text,
    }


def _ranges_intersect(a: dict, b: dict) -> bool:
    def before(x, y):  # x strictly before y
        return (x["line"], x["character"]) < (y["line"], y["character"])
    return not (before(a["end"], b["start"]) or before(b["end"], a["start"]))


def _report_to_diagnostic(text: str, report: InconsistencyReport) -> dict:
    return {
        "range": _span_to_range(text, report.span),
        "severity": _SEVERITY_MAP[report.severity],
        "code": report.pattern_id or "dynamic",
        "source": "plpgcheck",
        "message": report.suggestion,
    }


def _fix_title(report: InconsistencyReport) -> str:
    titles = {
        "P1": "Annotate explicit CHAR length and make the conversion explicit",
        "P2": "Wrap bound in FLOOR(...)",
    }
    return titles.get(report.pattern_id or "", f"Apply {report.pattern_id} fix")


def serve_stdio() -> None:
    LspServer().serve()
