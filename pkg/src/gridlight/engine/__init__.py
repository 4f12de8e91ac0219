from .aggregates import Histogram
from .batch import RowBatch
from .envelopes import compute_envelopes, envelope_predicate
from .executor import DEFAULT_MAX_CELLS, Engine, QueryResult, QueryStats
from .expressions import evaluate_expression, evaluate_predicate
from .planner import JoinSpec, PhysicalPlan, ScanSpec, plan
from .scan import FileStats, execute_scan

__all__ = [
    "DEFAULT_MAX_CELLS", "Engine", "FileStats", "Histogram", "JoinSpec", "PhysicalPlan", "QueryResult",
    "QueryStats", "RowBatch", "ScanSpec", "compute_envelopes", "envelope_predicate", "evaluate_expression",
    "evaluate_predicate", "execute_scan", "plan",
]
