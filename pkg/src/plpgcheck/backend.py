"""Common backend surface shared by the wire-protocol and embedded engines."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class QueryResult:
    rows: list[list[str | None]]            # text-format values
    fields: list[tuple[str, int]]           # (column name, type OID)
    notices: list[str] = field(default_factory=list)
    command_tag: str = ""


class BackendError(Exception):
    """The engine reported an error (SQLSTATE carried along)."""

    def __init__(self, sqlstate: str, message: str,
                 notices: list[str] | None = None) -> None:
        super().__init__(f"{sqlstate}: {message}")
        self.sqlstate = sqlstate
        self.message = message
        self.notices = notices or []


class BackendTimeout(Exception):
    pass


class BackendConnectionError(Exception):
    pass
