from .ast import (
    Aggregate,
    And,
    Atom,
    BinOp,
    BoundColumn,
    Call,
    ColumnRef,
    Join,
    Literal,
    Neg,
    Not,
    Or,
    QueryAst,
    SelectItem,
    TableRef,
)
from .binder import BoundQuery, Source, bind
from .parser import parse_predicate, parse_query

__all__ = [
    "Aggregate", "And", "Atom", "BinOp", "BoundColumn", "BoundQuery", "Call", "ColumnRef", "Join",
    "Literal", "Neg", "Not", "Or", "QueryAst", "SelectItem", "Source", "TableRef", "bind",
    "parse_predicate", "parse_query",
]
