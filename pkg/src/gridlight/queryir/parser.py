"""Recursive-descent parser for the SQL subset.

Grammar (keywords case-insensitive)::

    query     := SELECT item (',' item)* FROM table [JOIN table ON key (AND key)*] [WHERE pred]
    item      := expr [AS ident]
    table     := ident [ident]
    key       := colref '=' colref
    pred      := conj (OR conj)*
    conj      := neg (AND neg)*
    neg       := NOT neg | '(' pred ')' | atom
    atom      := operand cmp operand | colref [NOT] IN '(' literal (',' literal)* ')'
    expr      := term (('+' | '-') term)*
    term      := factor (('*' | '/') factor)*
    factor    := '-' factor | number | string | call | colref | '(' expr ')'

AND and OR associate to the right.
"""

from __future__ import annotations

import re

from ..errors import QuerySyntaxError
from .ast import (
    AGGREGATES,
    FUNCTIONS,
    MIRRORED_OP,
    Aggregate,
    And,
    Atom,
    BinOp,
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

KEYWORDS = {"SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "IN", "JOIN", "ON", "AS"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<string>'(?:[^']|'')*')
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|==|=|<|>|\+|-|\*|/|\(|\)|,|\.)
    """,
    re.VERBOSE,
)

_CMP = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "=": "==", "==": "==", "!=": "!=", "<>": "!="}


class _Token:
    __slots__ = ("kind", "text", "pos")

    def __init__(self, kind, text, pos):
        self.kind = kind
        self.text = text
        self.pos = pos

    def __repr__(self):
        return f"{self.kind}:{self.text}"


def tokenize(text: str) -> list[_Token]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise QuerySyntaxError(pos, ["token"], text[pos])
        kind = m.lastgroup
        if kind != "ws":
            tok = m.group()
            if kind == "ident" and tok.upper() in KEYWORDS:
                kind, tok = "kw", tok.upper()
            out.append(_Token(kind, tok, pos))
        pos = m.end()
    out.append(_Token("eof", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # helpers

    @property
    def tok(self) -> _Token:
        return self.toks[self.i]

    def peek(self, k=1) -> _Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, *expected):
        tok = self.tok
        raise QuerySyntaxError(tok.pos, expected, tok.text or "end of input")

    def at(self, kind, text=None) -> bool:
        return self.tok.kind == kind and (text is None or self.tok.text == text)

    def accept(self, kind, text=None):
        if self.at(kind, text):
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, kind, text=None, label=None):
        tok = self.accept(kind, text)
        if tok is None:
            self.error(label or text or kind)
        return tok

    # query

    def query(self) -> QueryAst:
        self.expect("kw", "SELECT")
        items = [self.select_item()]
        while self.accept("op", ","):
            items.append(self.select_item())
        self.expect("kw", "FROM")
        source = self.table()
        join = None
        if self.accept("kw", "JOIN"):
            table = self.table()
            self.expect("kw", "ON")
            keys = [self.join_key()]
            while self.accept("kw", "AND"):
                keys.append(self.join_key())
            join = Join(table, tuple(keys))
        where = None
        if self.accept("kw", "WHERE"):
            where = self.predicate()
        if not self.at("eof"):
            self.error("end of input", "WHERE" if where is None else "AND", "OR")
        return QueryAst(tuple(items), source, join, where)

    def select_item(self) -> SelectItem:
        if self.at("kw", "FROM") or self.at("eof"):
            self.error("expression")
        expr = self.expr()
        alias = None
        if self.accept("kw", "AS"):
            alias = self.expect("ident", label="alias").text
        return SelectItem(expr, alias)

    def table(self) -> TableRef:
        name = self.expect("ident", label="dataset name").text
        alias = None
        if self.at("ident"):
            alias = self.accept("ident").text
        return TableRef(name, alias)

    def join_key(self):
        left = self.colref()
        if not (self.accept("op", "=") or self.accept("op", "==")):
            self.error("=")
        right = self.colref()
        return (left, right)

    def colref(self) -> ColumnRef:
        name = self.expect("ident", label="column").text
        if self.accept("op", "."):
            return ColumnRef(self.expect("ident", label="column").text, name)
        return ColumnRef(name)

    # predicates

    def predicate(self):
        left = self.conjunction()
        if self.accept("kw", "OR"):
            return Or(left, self.predicate())
        return left

    def conjunction(self):
        left = self.negation()
        if self.accept("kw", "AND"):
            return And(left, self.conjunction())
        return left

    def negation(self):
        if self.accept("kw", "NOT"):
            return Not(self.negation())
        if self.at("op", "("):
            self.i += 1
            inner = self.predicate()
            self.expect("op", ")")
            return inner
        return self.atom()

    def atom(self) -> Atom:
        start = self.tok
        lhs = self.operand()
        if self.at("kw", "NOT") and self.peek().kind == "kw" and self.peek().text == "IN":
            self.i += 2
            return self._in_list(lhs, "NOT IN", start)
        if self.accept("kw", "IN"):
            return self._in_list(lhs, "IN", start)
        if self.tok.kind != "op" or self.tok.text not in _CMP:
            self.error("comparison operator", "IN", "NOT IN")
        op = _CMP[self.tok.text]
        self.i += 1
        rhs = self.operand()
        if isinstance(lhs, ColumnRef):
            return Atom(lhs, op, rhs)
        if isinstance(rhs, ColumnRef):
            return Atom(rhs, MIRRORED_OP[op], lhs)
        raise QuerySyntaxError(start.pos, ["column"], start.text)

    def _in_list(self, lhs, op, start) -> Atom:
        if not isinstance(lhs, ColumnRef):
            raise QuerySyntaxError(start.pos, ["column"], start.text)
        self.expect("op", "(")
        values = [self.literal()]
        while self.accept("op", ","):
            values.append(self.literal())
        self.expect("op", ")")
        return Atom(lhs, op, tuple(values))

    def operand(self):
        if self.at("ident"):
            return self.colref()
        return self.literal()

    def literal(self) -> Literal:
        sign = 1.0
        if self.accept("op", "-"):
            sign = -1.0
        elif self.accept("op", "+"):
            pass
        tok = self.tok
        if tok.kind == "number":
            self.i += 1
            return Literal(sign * float(tok.text))
        if tok.kind == "string" and sign == 1.0:
            self.i += 1
            return Literal(tok.text[1:-1].replace("''", "'"))
        self.error("number", "string")

    # expressions

    def expr(self):
        left = self.term()
        while self.at("op", "+") or self.at("op", "-"):
            op = self.accept("op").text
            left = BinOp(op, left, self.term())
        return left

    def term(self):
        left = self.factor()
        while self.at("op", "*") or self.at("op", "/"):
            op = self.accept("op").text
            left = BinOp(op, left, self.factor())
        return left

    def factor(self):
        tok = self.tok
        if self.accept("op", "-"):
            inner = self.factor()
            if isinstance(inner, Literal) and isinstance(inner.value, float):
                return Literal(-inner.value)
            return Neg(inner)
        if tok.kind == "number":
            self.i += 1
            return Literal(float(tok.text))
        if tok.kind == "string":
            self.i += 1
            return Literal(tok.text[1:-1].replace("''", "'"))
        if self.accept("op", "("):
            inner = self.expr()
            self.expect("op", ")")
            return inner
        if tok.kind == "ident":
            if self.peek().kind == "op" and self.peek().text == "(":
                return self.call()
            return self.colref()
        self.error("expression")

    def call(self):
        name_tok = self.expect("ident")
        func = name_tok.text.lower()
        self.expect("op", "(")
        if func in AGGREGATES:
            if func == "count" and self.accept("op", "*"):
                self.expect("op", ")")
                return Aggregate("count", None)
            arg = self.expr()
            params = ()
            if func == "histogram":
                params = []
                for _ in range(3):
                    self.expect("op", ",")
                    params.append(self.literal().value)
                if any(isinstance(p, str) for p in params):
                    raise QuerySyntaxError(name_tok.pos, ["numeric histogram parameters"])
                lo, hi, bins = params
                if bins != int(bins) or bins <= 0 or not hi > lo:
                    raise QuerySyntaxError(name_tok.pos, ["histogram(expr, lo, hi, positive int bins) with lo < hi"])
                params = (float(lo), float(hi), int(bins))
            self.expect("op", ")")
            return Aggregate(func, arg, params)
        if func in FUNCTIONS:
            arg = self.expr()
            self.expect("op", ")")
            return Call(func, (arg,))
        raise QuerySyntaxError(name_tok.pos, list(FUNCTIONS) + list(AGGREGATES), name_tok.text)


def parse_query(text: str) -> QueryAst:
    return _Parser(text).query()


def parse_predicate(text: str):
    p = _Parser(text)
    pred = p.predicate()
    if not p.at("eof"):
        p.error("end of input")
    return pred
