"""Minimal PostgreSQL wire-protocol (v3) client over stdlib sockets.

Simple-query protocol only; values arrive in text format with type OIDs,
which is exactly what the executor wants. Auth: trust, cleartext password,
md5, and SCRAM-SHA-256 (without channel binding). TLS is not attempted;
point the tool at a server that accepts plain connections or use the
embedded engine.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import os
import socket
import struct
from dataclasses import dataclass
from urllib.parse import parse_qs, unquote, urlparse

from .backend import BackendConnectionError, BackendError, BackendTimeout, QueryResult

PROTOCOL_VERSION = 196608  # 3.0


@dataclass
class Dsn:
    host: str
    port: int
    user: str
    password: str
    database: str

    @staticmethod
    def parse(dsn: str) -> "Dsn":
        parsed = urlparse(dsn)
        if parsed.scheme not in ("postgresql", "postgres"):
            raise BackendConnectionError(f"unsupported DSN scheme {parsed.scheme!r}")
        query = parse_qs(parsed.query)
        host = parsed.hostname or query.get("host", ["localhost"])[0]
        return Dsn(
            host=unquote(host) if host else "localhost",
            port=parsed.port or 5432,
            user=unquote(parsed.username or os.environ.get("PGUSER", "postgres")),
            password=unquote(parsed.password or os.environ.get("PGPASSWORD", "")),
            database=unquote(parsed.path.lstrip("/")) or "postgres",
        )


class WireBackend:
    def __init__(self, dsn: str, connect_timeout_s: float = 10.0) -> None:
        self.dsn = Dsn.parse(dsn)
        self.connect_timeout_s = connect_timeout_s
        self._sock: socket.socket | None = None
        self.parameters: dict[str, str] = {}

    # ── connection ───────────────────────────────────────────────

    def _connect(self) -> None:
        d = self.dsn
        try:
            if d.host.startswith("/"):
                sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
                sock.settimeout(self.connect_timeout_s)
                sock.connect(os.path.join(d.host, f".s.PGSQL.{d.port}"))
            else:
                sock = socket.create_connection((d.host, d.port),
                                                timeout=self.connect_timeout_s)
        except OSError as exc:
            raise BackendConnectionError(f"cannot connect to {d.host}:{d.port}: {exc}") from exc
        self._sock = sock
        try:
            self._startup()
        except Exception:
            self.close()
            raise

    def _startup(self) -> None:
        params = {
            "user": self.dsn.user,
            "database": self.dsn.database,
            "client_encoding": "UTF8",
            "application_name": "plpgcheck",
        }
        body = struct.pack("!i", PROTOCOL_VERSION)
        for key, value in params.items():
            body += key.encode() + b"\0" + value.encode() + b"\0"
        body += b"\0"
        self._send_raw(struct.pack("!i", len(body) + 4) + body)
        scram: _Scram | None = None
        while True:
            kind, payload = self._recv()
            if kind == b"R":
                (subtype,) = struct.unpack_from("!i", payload)
                if subtype == 0:
                    continue
                if subtype == 3:
                    self._send(b"p", self.dsn.password.encode() + b"\0")
                elif subtype == 5:
                    salt = payload[4:8]
                    inner = hashlib.md5(
                        (self.dsn.password + self.dsn.user).encode()).hexdigest()
                    digest = hashlib.md5(inner.encode() + salt).hexdigest()
                    self._send(b"p", b"md5" + digest.encode() + b"\0")
                elif subtype == 10:
                    mechanisms = payload[4:].split(b"\0")
                    if b"SCRAM-SHA-256" not in mechanisms:
                        raise BackendConnectionError(
                            f"server offers no supported SASL mechanism: {mechanisms}")
                    scram = _Scram(self.dsn.password)
                    first = scram.client_first()
                    self._send(b"p", b"SCRAM-SHA-256\0"
                               + struct.pack("!i", len(first)) + first)
                elif subtype == 11:
                    assert scram is not None, "SASLContinue before SASLInitial"
                    self._send(b"p", scram.client_final(payload[4:]))
                elif subtype == 12:
                    assert scram is not None
                    scram.verify_server(payload[4:])
                else:
                    raise BackendConnectionError(
                        f"unsupported authentication request {subtype}")
            elif kind == b"S":
                name, value = payload.split(b"\0")[:2]
                self.parameters[name.decode()] = value.decode()
            elif kind == b"K":
                pass
            elif kind == b"Z":
                return
            elif kind == b"E":
                fields = _error_fields(payload)
                raise BackendConnectionError(
                    f"server refused connection: {fields.get('M', 'unknown')}")
            elif kind == b"N":
                pass
            else:
                raise BackendConnectionError(f"unexpected message {kind!r} during startup")

    def close(self) -> None:
        if self._sock is not None:
            try:
                self._send(b"X", b"")
            except Exception:
                pass
            try:
                self._sock.close()
            except Exception:
                pass
            self._sock = None

    # ── framing ──────────────────────────────────────────────────

    def _send_raw(self, data: bytes) -> None:
        assert self._sock is not None
        self._sock.sendall(data)

    def _send(self, kind: bytes, body: bytes) -> None:
        self._send_raw(kind + struct.pack("!i", len(body) + 4) + body)

    def _recv(self) -> tuple[bytes, bytes]:
        assert self._sock is not None
        header = self._recv_exact(5)
        kind = header[:1]
        (length,) = struct.unpack("!i", header[1:5])
        payload = self._recv_exact(length - 4) if length > 4 else b""
        return kind, payload

    def _recv_exact(self, count: int) -> bytes:
        assert self._sock is not None
        chunks = []
        remaining = count
        while remaining:
            chunk = self._sock.recv(remaining)
            if not chunk:
                raise BackendConnectionError("connection closed by server")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    # ── queries ──────────────────────────────────────────────────

    def query(self, sql: str, timeout_ms: int = 30_000) -> QueryResult:
        if self._sock is None:
            self._connect()
        assert self._sock is not None
        self._sock.settimeout(timeout_ms / 1000.0 + 2.0)
        try:
            self._send(b"Q", sql.encode() + b"\0")
            fields: list[tuple[str, int]] = []
            rows: list[list[str | None]] = []
            notices: list[str] = []
            error: dict[str, str] | None = None
            tag = ""
            while True:
                kind, payload = self._recv()
                if kind == b"T":
                    fields = _parse_row_description(payload)
                    rows = []
                elif kind == b"D":
                    rows.append(_parse_data_row(payload))
                elif kind == b"C":
                    tag = payload.rstrip(b"\0").decode()
                elif kind == b"E":
                    error = _error_fields(payload)
                elif kind == b"N":
                    notices.append(_error_fields(payload).get("M", ""))
                elif kind == b"S":
                    name, value = payload.split(b"\0")[:2]
                    self.parameters[name.decode()] = value.decode()
                elif kind == b"I":
                    tag = ""
                elif kind == b"Z":
                    break
            if error is not None:
                raise BackendError(error.get("C", "XX000"), error.get("M", "unknown"),
                                   notices=notices)
            return QueryResult(rows=rows, fields=fields, notices=notices, command_tag=tag)
        except socket.timeout as exc:
            self.close()
            raise BackendTimeout(f"statement exceeded {timeout_ms} ms") from exc
        except OSError as exc:
            self.close()
            raise BackendConnectionError(str(exc)) from exc


def _parse_row_description(payload: bytes) -> list[tuple[str, int]]:
    (nfields,) = struct.unpack_from("!h", payload)
    fields = []
    offset = 2
    for _ in range(nfields):
        end = payload.index(b"\0", offset)
        name = payload[offset:end].decode()
        offset = end + 1
        _table, _attnum, type_oid, _typlen, _typmod, _fmt = struct.unpack_from(
            "!ihihih", payload, offset)
        offset += 18
        fields.append((name, type_oid))
    return fields


def _parse_data_row(payload: bytes) -> list[str | None]:
    (ncols,) = struct.unpack_from("!h", payload)
    offset = 2
    row: list[str | None] = []
    for _ in range(ncols):
        (length,) = struct.unpack_from("!i", payload, offset)
        offset += 4
        if length < 0:
            row.append(None)
        else:
            row.append(payload[offset:offset + length].decode())
            offset += length
    return row


def _error_fields(payload: bytes) -> dict[str, str]:
    fields: dict[str, str] = {}
    offset = 0
    while offset < len(payload) and payload[offset] != 0:
        code = chr(payload[offset])
        end = payload.index(b"\0", offset + 1)
        fields[code] = payload[offset + 1:end].decode(errors="replace")
        offset = end + 1
    return fields


class _Scram:
    """SCRAM-SHA-256 client (RFC 5802/7677), gs2 header 'n,,'."""

    def __init__(self, password: str) -> None:
        self.password = password.encode()
        self.nonce = base64.b64encode(os.urandom(18)).decode()
        self.client_first_bare = f"n=,r={self.nonce}"
        self.auth_message = b""
        self.salted = b""

    def client_first(self) -> bytes:
        return ("n,," + self.client_first_bare).encode()

    def client_final(self, server_first: bytes) -> bytes:
        text = server_first.decode()
        parts = dict(item.split("=", 1) for item in text.split(","))
        full_nonce = parts["r"]
        if not full_nonce.startswith(self.nonce):
            raise BackendConnectionError("SCRAM nonce mismatch")
        salt = base64.b64decode(parts["s"])
        iterations = int(parts["i"])
        self.salted = hashlib.pbkdf2_hmac("sha256", self.password, salt, iterations)
        client_key = hmac.new(self.salted, b"Client Key", hashlib.sha256).digest()
        stored_key = hashlib.sha256(client_key).digest()
        without_proof = "c=" + base64.b64encode(b"n,,").decode() + ",r=" + full_nonce
        self.auth_message = ",".join(
            [self.client_first_bare, text, without_proof]).encode()
        signature = hmac.new(stored_key, self.auth_message, hashlib.sha256).digest()
        proof = bytes(a ^ b for a, b in zip(client_key, signature))
        return (without_proof + ",p=" + base64.b64encode(proof).decode()).encode()

    def verify_server(self, server_final: bytes) -> None:
        parts = dict(item.split("=", 1) for item in server_final.decode().split(","))
        server_key = hmac.new(self.salted, b"Server Key", hashlib.sha256).digest()
        expected = hmac.new(server_key, self.auth_message, hashlib.sha256).digest()
        if base64.b64decode(parts.get("v", "")) != expected:
            raise BackendConnectionError("SCRAM server signature verification failed")
