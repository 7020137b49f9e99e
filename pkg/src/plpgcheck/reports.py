"""Shared report model: findings from dynamic differential runs and from
static pattern matches, plus the versioned JSON report schema."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .source import SourceSpan, TextEdit

SCHEMA_VERSION = "plpgcheck-report/1"


class Kind(str, enum.Enum):
    DYNAMIC = "dynamic"
    STATIC_PATTERN = "static_pattern"


class Category(str, enum.Enum):
    PRESUMPTION = "presumption"
    OVERLOOK = "overlook"
    EQUIVOCALITY = "equivocality"
    UNCATEGORIZED = "uncategorized"


class Channel(str, enum.Enum):
    RETURN_VALUE = "return_value"
    NOTICES = "notices"
    EXEC_CMDS = "exec_cmds"
    ERROR_VS_VALUE = "error_vs_value"
    ERROR_CLASS = "error_class"


class Severity(str, enum.Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


class Verdict(str, enum.Enum):
    CONSISTENT = "consistent"
    INCONSISTENT = "inconsistent"
    INCONCLUSIVE = "inconclusive"


@dataclass
class InconsistencyReport:
    kind: Kind
    span: SourceSpan
    category: Category
    suggestion: str
    channel: Channel | None = None
    plsql_evidence: str | None = None
    sql_evidence: str | None = None
    pattern_id: str | None = None
    severity: Severity = Severity.WARNING
    fix: list[TextEdit] | None = None

    def __post_init__(self) -> None:
        if self.kind is Kind.DYNAMIC:
            assert self.plsql_evidence is not None and self.sql_evidence is not None, \
                "dynamic reports carry evidence from both sides"
        if self.kind is Kind.STATIC_PATTERN:
            assert self.pattern_id, "static reports carry their pattern id"

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "span": self.span.to_json(),
            "category": self.category.value,
            "channel": self.channel.value if self.channel else None,
            "severity": self.severity.value,
            "pattern_id": self.pattern_id,
            "suggestion": self.suggestion,
            "plsql_evidence": self.plsql_evidence,
            "sql_evidence": self.sql_evidence,
            "fix": [e.to_json() for e in self.fix] if self.fix else None,
        }
