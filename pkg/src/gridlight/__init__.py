"""Predicate pushdown and block pruning for SQL over collections of classic grid files."""

from .catalog import Catalog
from .engine import Engine, QueryResult
from .errors import GridlightError

__all__ = ["Catalog", "Engine", "GridlightError", "QueryResult"]
__version__ = "0.1.0"
