"""Query AST, the conjunctive (A, T, J, P) form, validation and intersection.

Every node is an immutable dataclass, so queries hash, compare structurally
and can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import MismatchedFromOrSelect, NotConjunctive, ValidationError

OPS = ("<", "=", ">")
_FLIP = {"<": ">", ">": "<", "=": "="}


@dataclass(frozen=True, order=True)
class ColumnRef:
    table: str
    column: str

    def __str__(self) -> str:
        return f"{self.table}.{self.column}"

    @classmethod
    def parse(cls, text: str) -> "ColumnRef":
        table, sep, column = text.partition(".")
        if not sep or not table or not column:
            raise ValidationError(f"not a qualified column: {text!r}")
        return cls(table, column)


def col(text: str) -> ColumnRef:
    return ColumnRef.parse(text)


@dataclass(frozen=True, order=True)
class PredAtom:
    """Column-vs-constant comparison ``col op value``."""

    col: ColumnRef
    op: str
    value: int

    def __str__(self) -> str:
        return f"{self.col} {self.op} {self.value}"


@dataclass(frozen=True, order=True)
class JoinAtom:
    """Column-vs-column comparison. Use :func:`join` to build canonical atoms."""

    left: ColumnRef
    op: str
    right: ColumnRef

    def __str__(self) -> str:
        return f"{self.left} {self.op} {self.right}"

    @property
    def is_equality(self) -> bool:
        return self.op == "="


def join(left: ColumnRef | str, op: str, right: ColumnRef | str) -> JoinAtom:
    """Canonical join atom: the lexicographically smaller column goes left."""
    if isinstance(left, str):
        left = ColumnRef.parse(left)
    if isinstance(right, str):
        right = ColumnRef.parse(right)
    if op not in OPS:
        raise ValidationError(f"unknown operator {op!r}")
    if right < left:
        left, right, op = right, left, _FLIP[op]
    return JoinAtom(left, op, right)


def pred(column: ColumnRef | str, op: str, value: int) -> PredAtom:
    if isinstance(column, str):
        column = ColumnRef.parse(column)
    if op not in OPS:
        raise ValidationError(f"unknown operator {op!r}")
    return PredAtom(column, op, int(value))


@dataclass(frozen=True)
class And:
    children: tuple

    def __init__(self, children):
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Or:
    children: tuple

    def __init__(self, children):
        object.__setattr__(self, "children", tuple(children))


@dataclass(frozen=True)
class Not:
    child: "BoolExpr"


Atom = Union[PredAtom, JoinAtom]
BoolExpr = Union[And, Or, Not, PredAtom, JoinAtom]

STAR = "*"


@dataclass(frozen=True)
class QueryAst:
    """SELECT [DISTINCT] attrs FROM tables [WHERE where].

    ``attrs`` holds :class:`ColumnRef` items or the single string ``"*"``.
    ``where`` is ``None`` when the query has no WHERE clause.
    """

    attrs: tuple
    tables: tuple
    where: BoolExpr | None = None
    distinct: bool = False

    def __post_init__(self):
        object.__setattr__(self, "attrs", tuple(self.attrs))
        object.__setattr__(self, "tables", tuple(self.tables))


@dataclass(frozen=True)
class ConjunctiveQuery:
    """The four-set form: attributes A, tables T, joins J, predicates P."""

    attrs: frozenset
    tables: frozenset
    joins: frozenset = field(default_factory=frozenset)
    preds: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("attrs", "tables", "joins", "preds"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))

    def atoms(self) -> list:
        return sorted(self.joins) + sorted(self.preds)

    def columns(self) -> set:
        cols = set(self.attrs)
        for j in self.joins:
            cols.update((j.left, j.right))
        cols.update(p.col for p in self.preds)
        return cols

    def to_ast(self, distinct: bool = False) -> QueryAst:
        """Re-embed as an And-tree with sorted, deterministic atom order."""
        atoms = self.atoms()
        if not atoms:
            where = None
        elif len(atoms) == 1:
            where = atoms[0]
        else:
            where = And(atoms)
        return QueryAst(tuple(sorted(self.attrs)), tuple(sorted(self.tables)), where, distinct)

    @property
    def has_inequality_join(self) -> bool:
        return any(not j.is_equality for j in self.joins)


# --------------------------------------------------------------------------
# tree helpers


def iter_atoms(expr: BoolExpr | None) -> Iterator[Atom]:
    if expr is None:
        return
    if isinstance(expr, (And, Or)):
        for child in expr.children:
            yield from iter_atoms(child)
    elif isinstance(expr, Not):
        yield from iter_atoms(expr.child)
    else:
        yield expr


def expr_columns(expr: BoolExpr | None) -> set:
    cols = set()
    for atom in iter_atoms(expr):
        if isinstance(atom, JoinAtom):
            cols.update((atom.left, atom.right))
        else:
            cols.add(atom.col)
    return cols


def count_joins(q: QueryAst | ConjunctiveQuery) -> int:
    if isinstance(q, ConjunctiveQuery):
        return len(q.joins)
    return len({a for a in iter_atoms(q.where) if isinstance(a, JoinAtom)})


def is_conjunctive(expr: BoolExpr | None) -> bool:
    if expr is None or isinstance(expr, (PredAtom, JoinAtom)):
        return True
    if isinstance(expr, And):
        return all(is_conjunctive(c) for c in expr.children)
    return False


def canonicalize(expr: BoolExpr | None) -> BoolExpr | None:
    """Flatten nested And/Or nodes of the same kind; reorder join atoms."""
    if isinstance(expr, JoinAtom):
        return join(expr.left, expr.op, expr.right)
    if expr is None or isinstance(expr, PredAtom):
        return expr
    if isinstance(expr, Not):
        return Not(canonicalize(expr.child))
    kind = type(expr)
    flat = []
    for child in expr.children:
        child = canonicalize(child)
        if type(child) is kind:
            flat.extend(child.children)
        else:
            flat.append(child)
    return kind(flat)


def canonical_query(q: QueryAst) -> QueryAst:
    return QueryAst(q.attrs, q.tables, canonicalize(q.where), q.distinct)


def conjuncts(expr: BoolExpr | None) -> list:
    """Top-level conjuncts of ``expr`` (nested Ands are flattened)."""
    if expr is None:
        return []
    if isinstance(expr, And):
        out = []
        for child in expr.children:
            out.extend(conjuncts(child))
        return out
    return [expr]


# --------------------------------------------------------------------------
# validation and conversion


def _check_column(ref, tables, schema):
    if not isinstance(ref, ColumnRef):
        raise ValidationError(f"not a column reference: {ref!r}")
    if ref.table not in tables or not schema.has_column(ref):
        raise ValidationError(str(ref))


def _check_expr(expr, tables, schema):
    if isinstance(expr, (And, Or)):
        if len(expr.children) < 2:
            raise ValidationError(f"{type(expr).__name__} needs at least two children")
        for child in expr.children:
            _check_expr(child, tables, schema)
    elif isinstance(expr, Not):
        _check_expr(expr.child, tables, schema)
    elif isinstance(expr, PredAtom):
        if expr.op not in OPS:
            raise ValidationError(f"unknown operator {expr.op!r}")
        _check_column(expr.col, tables, schema)
    elif isinstance(expr, JoinAtom):
        if expr.op not in OPS:
            raise ValidationError(f"unknown operator {expr.op!r}")
        _check_column(expr.left, tables, schema)
        _check_column(expr.right, tables, schema)
    else:
        raise ValidationError(f"unknown expression node {expr!r}")


def validate(q: QueryAst | ConjunctiveQuery, schema) -> None:
    """Raise :class:`ValidationError` on the first unresolved reference."""
    tables = set(q.tables)
    if not tables:
        raise ValidationError("FROM clause is empty")
    for t in (sorted(q.tables) if isinstance(q, ConjunctiveQuery) else q.tables):
        if not schema.has_table(t):
            raise ValidationError(t)
    if isinstance(q, ConjunctiveQuery):
        if not q.attrs:
            raise ValidationError("SELECT list is empty")
        for a in sorted(q.attrs):
            _check_column(a, tables, schema)
        for atom in q.atoms():
            _check_expr(atom, tables, schema)
        return
    if not q.attrs:
        raise ValidationError("SELECT list is empty")
    for a in q.attrs:
        if a == STAR:
            continue
        _check_column(a, tables, schema)
    if q.where is not None:
        _check_expr(q.where, tables, schema)


def expand_attrs(q: QueryAst, schema=None) -> frozenset:
    attrs = set()
    for a in q.attrs:
        if a == STAR:
            if schema is None:
                raise ValidationError("SELECT * needs a schema for expansion")
            for t in q.tables:
                attrs.update(ColumnRef(t, c) for c in schema.column_names(t))
        else:
            attrs.add(a)
    return frozenset(attrs)


def to_conjunctive(q: QueryAst, schema=None) -> ConjunctiveQuery:
    """Split a pure conjunction into (A, T, J, P); ``*`` is expanded."""
    if not is_conjunctive(q.where):
        raise NotConjunctive("WHERE clause contains OR or NOT")
    joins, preds = set(), set()
    for atom in iter_atoms(q.where):
        if isinstance(atom, JoinAtom):
            joins.add(join(atom.left, atom.op, atom.right))
        else:
            preds.add(atom)
    return ConjunctiveQuery(expand_attrs(q, schema), frozenset(q.tables), joins, preds)


def intersect(q1: ConjunctiveQuery, q2: ConjunctiveQuery) -> ConjunctiveQuery:
    """Query whose WHERE clause is q1's AND q2's."""
    if q1.tables != q2.tables or q1.attrs != q2.attrs:
        raise MismatchedFromOrSelect("intersected queries must share SELECT and FROM")
    return ConjunctiveQuery(q1.attrs, q1.tables, q1.joins | q2.joins, q1.preds | q2.preds)
