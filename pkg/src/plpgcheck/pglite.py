"""Embedded-PostgreSQL backend: drives a PGlite (WASM) instance via Node.

PGlite is a genuine PostgreSQL build, so dynamic differential runs work
without a server. The single-threaded WASM runtime cannot interrupt a
running statement, so timeouts are enforced here by killing the bridge
process; the instance respawns lazily on next use (state is per-process,
which is fine because every execution is wrapped in BEGIN..ROLLBACK).
"""

from __future__ import annotations

import json
import os
import queue
import shutil
import subprocess
import threading
from pathlib import Path

from .backend import BackendConnectionError, BackendError, BackendTimeout, QueryResult

PGLITE_PACKAGE = "@electric-sql/pglite"
_ENV_DIR_VAR = "PLPGCHECK_PGLITE_DIR"


def default_env_dir() -> Path:
    if os.environ.get(_ENV_DIR_VAR):
        return Path(os.environ[_ENV_DIR_VAR])
    return Path.home() / ".cache" / "plpgcheck" / "pglite"


def bridge_script() -> Path:
    return Path(__file__).parent / "data" / "pglite_bridge.mjs"


def ensure_pglite(env_dir: Path | None = None) -> Path:
    """Provision a node_modules with PGlite; returns the package directory.

    Requires `node` and, on first run, `npm` with network access.
    """
    env_dir = env_dir or default_env_dir()
    pkg_dir = env_dir / "node_modules" / PGLITE_PACKAGE
    if (pkg_dir / "package.json").exists():
        return pkg_dir
    if shutil.which("npm") is None:
        raise BackendConnectionError(
            "npm not found: cannot provision the embedded PostgreSQL engine")
    env_dir.mkdir(parents=True, exist_ok=True)
    manifest = env_dir / "package.json"
    if not manifest.exists():
        manifest.write_text(json.dumps({
            "name": "plpgcheck-pglite-env",
            "private": True,
            "type": "module",
            "dependencies": {PGLITE_PACKAGE: "^0.5.4"},
        }, indent=2))
    proc = subprocess.run(
        ["npm", "install", "--no-fund", "--no-audit"],
        cwd=env_dir, capture_output=True, text=True, timeout=600,
    )
    if proc.returncode != 0 or not (pkg_dir / "package.json").exists():
        raise BackendConnectionError(
            f"npm install of {PGLITE_PACKAGE} failed:\n{proc.stderr[-2000:]}")
    return pkg_dir


class PgliteBackend:
    """One embedded PostgreSQL instance (one connection's worth of state)."""

    def __init__(self, data_dir: str | None = None, env_dir: Path | None = None,
                 spawn_timeout_s: float = 120.0) -> None:
        self.data_dir = data_dir or "memory://"
        self.env_dir = env_dir
        self.spawn_timeout_s = spawn_timeout_s
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue[str | None] = queue.Queue()
        self._next_id = 0
        self._lock = threading.Lock()

    # ── process management ───────────────────────────────────────

    def _spawn(self) -> None:
        pkg_dir = ensure_pglite(self.env_dir)
        if shutil.which("node") is None:
            raise BackendConnectionError("node not found: the embedded engine needs Node.js")
        self._proc = subprocess.Popen(
            ["node", str(bridge_script()), str(pkg_dir), self.data_dir],
            stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True, bufsize=1,
        )
        self._lines = queue.Queue()
        t = threading.Thread(target=self._reader, args=(self._proc,), daemon=True)
        t.start()
        ready = self._read_line(self.spawn_timeout_s)
        if ready is None or not json.loads(ready).get("ready"):
            self._kill()
            raise BackendConnectionError("embedded PostgreSQL failed to start")

    def _reader(self, proc: subprocess.Popen) -> None:
        assert proc.stdout is not None
        for line in proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _read_line(self, timeout_s: float) -> str | None:
        try:
            return self._lines.get(timeout=timeout_s)
        except queue.Empty:
            return None

    def _kill(self) -> None:
        if self._proc is not None:
            try:
                self._proc.kill()
                self._proc.wait(timeout=10)
            except Exception:
                pass
        self._proc = None

    def close(self) -> None:
        with self._lock:
            if self._proc is not None and self._proc.poll() is None:
                try:
                    self._request({"op": "close"}, timeout_s=5)
                except Exception:
                    pass
            self._kill()

    # ── queries ──────────────────────────────────────────────────

    def query(self, sql: str, timeout_ms: int = 30_000) -> QueryResult:
        """Run one statement; text-format values. Kills the engine on timeout."""
        with self._lock:
            if self._proc is None or self._proc.poll() is not None:
                self._spawn()
            resp = self._request({"op": "query", "sql": sql},
                                 timeout_s=timeout_ms / 1000.0)
        notices = resp.get("notices", [])
        if not resp.get("ok"):
            err = resp.get("error", {})
            raise BackendError(err.get("sqlstate", "XX000"),
                               err.get("message", "unknown error"), notices=notices)
        return QueryResult(
            rows=[[v for v in row] for row in resp.get("rows", [])],
            fields=[(f["name"], int(f["oid"])) for f in resp.get("fields", [])],
            notices=notices,
        )

    def _request(self, payload: dict, timeout_s: float) -> dict:
        assert self._proc is not None and self._proc.stdin is not None
        self._next_id += 1
        payload = dict(payload, id=self._next_id)
        try:
            self._proc.stdin.write(json.dumps(payload) + "\n")
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._kill()
            raise BackendConnectionError(f"bridge write failed: {exc}") from exc
        while True:
            line = self._read_line(timeout_s)
            if line is None:
                self._kill()
                raise BackendTimeout(
                    f"statement did not finish within {timeout_s:.1f}s; engine restarted")
            try:
                resp = json.loads(line)
            except json.JSONDecodeError:
                continue
            if resp.get("id") == self._next_id:
                return resp
            if resp.get("id") is None and not resp.get("ok", True):
                return resp
