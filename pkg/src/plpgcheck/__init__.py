"""plpgcheck: inspect PL/pgSQL code for divergences between its SQL reading
and the engine's actual semantics.

Dynamic mode translates a function into an equivalent literal SQL query and
executes both on the same PostgreSQL engine; static mode matches declarative
inconsistency patterns with one-click fixes. A fuzzing campaign grows the
pattern set from differential findings.
"""

from .ast_nodes import PlsqlFunction, SqlType
from .executor import (
    DbTarget,
    ExecutionOutcome,
    Executor,
    Invocation,
    exec_plsql,
    exec_sql,
    probe,
)
from .fuzzer import CampaignConfig, mutate, propose_patterns, run_campaign
from .inspector import CompareConfig, Verdict, compare, inspect_dynamic
from .interp import run_function
from .parser import ParseResult, parse
from .patterns import apply_fix, builtin_rules, load_rules, match_patterns
from .reports import Category, Channel, InconsistencyReport, Kind, Severity
from .source import Diagnostic, SourceSpan, TextEdit
from .translate import EquivalentQuery, Unsupported, translate
from .typecheck import typecheck_light

__version__ = "0.1.0"

__all__ = [
    "CampaignConfig", "Category", "Channel", "CompareConfig", "DbTarget",
    "Diagnostic", "EquivalentQuery", "ExecutionOutcome", "Executor",
    "InconsistencyReport", "Invocation", "Kind", "ParseResult",
    "PlsqlFunction", "Severity", "SourceSpan", "SqlType", "TextEdit",
    "Unsupported", "Verdict", "apply_fix", "builtin_rules", "compare",
    "exec_plsql", "exec_sql", "inspect_dynamic", "load_rules",
    "match_patterns", "mutate", "parse", "probe", "propose_patterns",
    "run_campaign", "run_function", "translate", "typecheck_light",
]
