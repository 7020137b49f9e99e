"""Language server: protocol lifecycle, diagnostics parity with cmd_check,
code-action fidelity against apply_fix, and the dynamic-inspection request."""

from __future__ import annotations

import json
import os
import threading

import pytest

from plpgcheck.lsp import LspServer
from plpgcheck.parser import parse
from plpgcheck.patterns import apply_fix, builtin_rules, match_patterns
from plpgcheck.source import LineIndex
from plpgcheck.typecheck import typecheck_light

from conftest import CORPUS, corpus_text


class LspClient:
    """Drives an in-process LspServer over real pipes."""

    def __init__(self):
        client_to_server_r, self._to_server = os.pipe()
        self._from_server, server_to_client_w = os.pipe()
        self.server = LspServer(
            reader=os.fdopen(client_to_server_r, "rb"),
            writer=os.fdopen(server_to_client_w, "wb"),
        )
        self.thread = threading.Thread(target=self.server.serve, daemon=True)
        self.thread.start()
        self._write = os.fdopen(self._to_server, "wb")
        self._read = os.fdopen(self._from_server, "rb")
        self._next_id = 0
        self._pending: list[dict] = []

    def send(self, method: str, params: dict | None = None,
             request: bool = True) -> int | None:
        payload: dict = {"jsonrpc": "2.0", "method": method,
                         "params": params or {}}
        msg_id = None
        if request:
            self._next_id += 1
            msg_id = self._next_id
            payload["id"] = msg_id
        body = json.dumps(payload).encode()
        self._write.write(f"Content-Length: {len(body)}\r\n\r\n".encode() + body)
        self._write.flush()
        return msg_id

    def read_message(self) -> dict:
        if self._pending:
            return self._pending.pop(0)
        headers = {}
        while True:
            line = self._read.readline()
            assert line, "server closed the stream"
            if line.strip() == b"":
                break
            key, _, value = line.partition(b":")
            headers[key.strip().lower()] = value.strip()
        length = int(headers[b"content-length"])
        return json.loads(self._read.read(length))

    def wait_response(self, msg_id: int) -> dict:
        while True:
            msg = self.read_message()
            if msg.get("id") == msg_id and ("result" in msg or "error" in msg):
                return msg
            self._pending.append(msg)

    def wait_notification(self, method: str) -> dict:
        for i, msg in enumerate(self._pending):
            if msg.get("method") == method:
                return self._pending.pop(i)
        while True:
            msg = self.read_message()
            if msg.get("method") == method:
                return msg
            self._pending.append(msg)

    def initialize(self, options: dict | None = None) -> dict:
        msg_id = self.send("initialize", {"initializationOptions": options or {}})
        response = self.wait_response(msg_id)
        self.send("initialized", {}, request=False)
        return response["result"]

    def open(self, uri: str, text: str, version: int = 1) -> list[dict]:
        self.send("textDocument/didOpen",
                  {"textDocument": {"uri": uri, "languageId": "plpgsql",
                                    "version": version, "text": text}},
                  request=False)
        note = self.wait_notification("textDocument/publishDiagnostics")
        return note["params"]["diagnostics"]

    def change(self, uri: str, text: str, version: int) -> list[dict]:
        self.send("textDocument/didChange",
                  {"textDocument": {"uri": uri, "version": version},
                   "contentChanges": [{"text": text}]},
                  request=False)
        note = self.wait_notification("textDocument/publishDiagnostics")
        return note["params"]["diagnostics"]

    def shutdown(self):
        msg_id = self.send("shutdown")
        self.wait_response(msg_id)
        self.send("exit", {}, request=False)


@pytest.fixture
def client():
    c = LspClient()
    c.initialize()
    yield c
    try:
        c.shutdown()
    except Exception:
        pass


AWARD_URI = "file:///work/award.sql"


def apply_lsp_edits(text: str, edits: list[dict]) -> str:
    """Apply LSP text edits (UTF-16 positions) to a document."""
    index = LineIndex(text)
    def to_offset(pos):
        line_start = index._starts[pos["line"]]
        line_text = index.line_text(pos["line"] + 1)
        # UTF-16 -> codepoint offset
        units = 0
        for i, ch in enumerate(line_text):
            if units >= pos["character"]:
                return line_start + i
            units += len(ch.encode("utf-16-le")) // 2
        return line_start + len(line_text)
    spans = sorted(
        ((to_offset(e["range"]["start"]), to_offset(e["range"]["end"]), e["newText"])
         for e in edits), reverse=True)
    for start, end, new in spans:
        text = text[:start] + new + text[end:]
    return text


class TestLifecycleAndDiagnostics:
    def test_initialize_capabilities(self):
        c = LspClient()
        result = c.initialize()
        assert result["capabilities"]["codeActionProvider"]
        assert result["serverInfo"]["name"] == "plpgcheck"
        c.shutdown()

    def test_open_publishes_p2_diagnostic(self, client):
        diagnostics = client.open(AWARD_URI, corpus_text("award.sql"))
        p2 = [d for d in diagnostics if d["code"] == "P2"]
        assert len(p2) == 1
        assert p2[0]["severity"] == 2
        assert p2[0]["source"] == "plpgcheck"
        assert p2[0]["range"]["start"]["line"] == 7  # 0-based

    def test_clean_file_empty_diagnostics(self, client):
        diagnostics = client.open(
            "file:///clean.sql",
            "CREATE FUNCTION ok() RETURNS int AS $$ BEGIN RETURN 1; END; $$ LANGUAGE plpgsql;")
        assert diagnostics == []

    def test_edit_that_fixes_clears_diagnostics(self, client):
        client.open(AWARD_URI, corpus_text("award.sql"))
        fixed = corpus_text("award.sql").replace(
            "total_num * percentage LOOP", "FLOOR(total_num * percentage) LOOP")
        diagnostics = client.change(AWARD_URI, fixed, version=2)
        assert [d for d in diagnostics if d["code"] == "P2"] == []

    def test_malformed_text_never_crashes(self, client):
        diagnostics = client.open("file:///junk.sql", "CREATE FUNCTION (((")
        assert any(d["code"] == "syntax" for d in diagnostics)

    def test_parity_with_static_check(self, client):
        """(span, pattern) pairs from diagnostics equal match_patterns output."""
        source = corpus_text("fig1_reset.sql")
        diagnostics = client.open("file:///fig1.sql", source)
        lsp_set = {(d["range"]["start"]["line"], d["range"]["start"]["character"],
                    d["code"]) for d in diagnostics}
        fn = parse(source).function()
        typecheck_light(fn)
        expected = set()
        for r in match_patterns(fn, builtin_rules()):
            expected.add((r.span.start_line - 1, r.span.start_col - 1, r.pattern_id))
        assert lsp_set == expected


class TestCodeActions:
    def test_quickfix_equals_apply_fix(self, client):
        source = corpus_text("award.sql")
        client.open(AWARD_URI, source)
        msg_id = client.send("textDocument/codeAction", {
            "textDocument": {"uri": AWARD_URI},
            "range": {"start": {"line": 7, "character": 16},
                      "end": {"line": 7, "character": 20}},
        })
        actions = client.wait_response(msg_id)["result"]
        assert len(actions) == 1
        action = actions[0]
        assert action["kind"] == "quickfix"
        assert "FLOOR" in action["title"]
        edited = apply_lsp_edits(source, action["edit"]["changes"][AWARD_URI])

        fn = parse(source).function()
        typecheck_light(fn)
        (p2,) = [r for r in match_patterns(fn, builtin_rules())
                 if r.pattern_id == "P2"]
        assert edited == apply_fix(source, p2.fix)

    def test_range_without_diagnostic_yields_no_actions(self, client):
        client.open(AWARD_URI, corpus_text("award.sql"))
        msg_id = client.send("textDocument/codeAction", {
            "textDocument": {"uri": AWARD_URI},
            "range": {"start": {"line": 0, "character": 0},
                      "end": {"line": 0, "character": 1}},
        })
        assert client.wait_response(msg_id)["result"] == []


class TestCustomRequests:
    def test_signatures(self, client):
        client.open(AWARD_URI, corpus_text("award.sql"))
        msg_id = client.send("inspect/signatures", {"uri": AWARD_URI})
        result = client.wait_response(msg_id)["result"]
        assert result == [{
            "name": "award",
            "params": [{"name": "total_num", "type": "int"},
                       {"name": "percentage", "type": "float"}],
            "returns": "int",
        }]

    def test_dynamic_requires_configuration(self, client):
        client.open(AWARD_URI, corpus_text("award.sql"))
        msg_id = client.send("inspect/dynamic", {
            "uri": AWARD_URI, "function": "award", "args": ["10", "0.58"]})
        error = client.wait_response(msg_id)["error"]
        assert error["code"] == -32001

    def test_dynamic_inspection_flow(self):
        c = LspClient()
        c.initialize(options={"dsn": "pglite://", "timeoutMs": 8000})
        c.open(AWARD_URI, corpus_text("award.sql"))
        msg_id = c.send("inspect/dynamic", {
            "uri": AWARD_URI, "version": 1, "function": "award",
            "args": ["10", "0.58"]})
        result = c.wait_response(msg_id)["result"]
        assert result["verdict"] == "inconsistent"
        channels = {r["channel"] for r in result["reports"]}
        assert channels == {"return_value", "notices"}
        c.shutdown()

    def test_stale_version_rejected(self, client):
        client.open(AWARD_URI, corpus_text("award.sql"), version=3)
        msg_id = client.send("inspect/dynamic", {
            "uri": AWARD_URI, "version": 2, "function": "award",
            "args": ["10", "0.58"]})
        error = client.wait_response(msg_id)["error"]
        assert error["code"] == -32002

    def test_unknown_function_rejected(self, client):
        client.send("workspace/didChangeConfiguration",
                    {"settings": {"plpgcheck": {"dsn": "pglite://"}}},
                    request=False)
        client.open(AWARD_URI, corpus_text("award.sql"))
        msg_id = client.send("inspect/dynamic", {
            "uri": AWARD_URI, "function": "nosuch", "args": []})
        error = client.wait_response(msg_id)["error"]
        assert error["code"] == -32010

    def test_unknown_method_error(self, client):
        msg_id = client.send("bogus/method", {})
        assert client.wait_response(msg_id)["error"]["code"] == -32601
