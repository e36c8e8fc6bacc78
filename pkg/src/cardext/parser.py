"""Text <-> AST for the supported SQL subset.

    query    := SELECT [DISTINCT] ('*' | col (',' col)*) FROM name (',' name)*
                [WHERE (TRUE | expr)]
    expr     := conj (OR conj)*
    conj     := neg (AND neg)*
    neg      := NOT neg | '(' expr ')' | col op (int | col)
    op       := '<' | '=' | '>'

Keywords are case-insensitive. NOT binds tighter than AND, AND tighter than OR.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .errors import SqlSyntaxError
from .query import (
    STAR,
    And,
    ColumnRef,
    JoinAtom,
    Not,
    Or,
    PredAtom,
    QueryAst,
    canonical_query,
    join,
    validate,
)

KEYWORDS = {"SELECT", "DISTINCT", "FROM", "WHERE", "AND", "OR", "NOT", "TRUE"}


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int


@dataclass(frozen=True)
class Token:
    kind: str  # KW, IDENT, INT, OP, PUNCT, EOF
    text: str
    span: SourceSpan


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[<=>])
  | (?P<punct>[.,*()])
    """,
    re.VERBOSE,
)


def tokenize(text: str) -> list:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SqlSyntaxError(f"unexpected character {text[pos]!r}", SourceSpan(pos, pos + 1))
        kind = m.lastgroup
        span = SourceSpan(m.start(), m.end())
        pos = m.end()
        if kind == "ws":
            continue
        value = m.group()
        if kind == "ident" and value.upper() in KEYWORDS:
            tokens.append(Token("KW", value.upper(), span))
        else:
            tokens.append(Token(kind.upper(), value, span))
    tokens.append(Token("EOF", "", SourceSpan(len(text), len(text))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, what: str):
        t = self.tok
        found = t.text or "end of input"
        raise SqlSyntaxError(f"expected {what}, found {found!r}", t.span)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            self.error(what or text or kind.lower())
        return t

    def query(self) -> QueryAst:
        self.expect("KW", "SELECT")
        distinct = self.accept("KW", "DISTINCT") is not None
        if self.accept("PUNCT", "*"):
            attrs = [STAR]
        else:
            attrs = [self.column()]
            while self.accept("PUNCT", ","):
                attrs.append(self.column())
        self.expect("KW", "FROM")
        tables = [self.expect("IDENT", what="table name").text]
        while self.accept("PUNCT", ","):
            tables.append(self.expect("IDENT", what="table name").text)
        where = None
        if self.accept("KW", "WHERE"):
            if not self.accept("KW", "TRUE"):
                where = self.disjunction()
        self.expect("EOF", what="end of query")
        return QueryAst(attrs, tables, where, distinct)

    def column(self) -> ColumnRef:
        table = self.expect("IDENT", what="column reference").text
        self.expect("PUNCT", ".", what="'.' in qualified column")
        name = self.expect("IDENT", what="column name").text
        return ColumnRef(table, name)

    def disjunction(self):
        parts = [self.conjunction()]
        while self.accept("KW", "OR"):
            parts.append(self.conjunction())
        return parts[0] if len(parts) == 1 else Or(parts)

    def conjunction(self):
        parts = [self.negation()]
        while self.accept("KW", "AND"):
            parts.append(self.negation())
        return parts[0] if len(parts) == 1 else And(parts)

    def negation(self):
        if self.accept("KW", "NOT"):
            return Not(self.negation())
        if self.accept("PUNCT", "("):
            inner = self.disjunction()
            self.expect("PUNCT", ")", what="')'")
            return inner
        return self.atom()

    def atom(self):
        left = self.column()
        op = self.expect("OP", what="comparison operator").text
        num = self.accept("INT")
        if num is not None:
            return PredAtom(left, op, int(num.text))
        if self.tok.kind == "IDENT":
            return join(left, op, self.column())
        self.error("integer or column")


def parse(text: str, schema=None) -> QueryAst:
    """Parse one query; validate it against ``schema`` when given."""
    q = canonical_query(_Parser(text).query())
    if schema is not None:
        validate(q, schema)
    return q


_PREC = {Or: 1, And: 2, Not: 3}


def _render_expr(expr, min_prec: int) -> str:
    prec = _PREC.get(type(expr), 4)
    if isinstance(expr, (PredAtom, JoinAtom)):
        text = str(expr)
    elif isinstance(expr, Not):
        text = "NOT " + _render_expr(expr.child, 3)
    else:
        sep = " OR " if isinstance(expr, Or) else " AND "
        text = sep.join(_render_expr(c, prec + 1) for c in expr.children)
    return f"({text})" if prec < min_prec else text


def render_expr(expr) -> str:
    return _render_expr(expr, 0)


def render(q: QueryAst) -> str:
    head = "SELECT DISTINCT " if q.distinct else "SELECT "
    attrs = ", ".join(STAR if a == STAR else str(a) for a in q.attrs)
    text = f"{head}{attrs} FROM {', '.join(q.tables)}"
    if q.where is not None:
        text += " WHERE " + render_expr(q.where)
    return text


def read_workload(path, schema=None) -> list:
    """One query per line; ``#`` starts a comment; blank lines are skipped."""
    queries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            queries.append(parse(line, schema))
        except SqlSyntaxError as exc:
            raise SqlSyntaxError(f"{path}:{lineno}: {exc}") from exc
    return queries


def write_workload(path, queries, header: str | None = None) -> None:
    lines = []
    if header:
        lines += [f"# {h}" for h in header.splitlines()]
    lines += [render(q) for q in queries]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
