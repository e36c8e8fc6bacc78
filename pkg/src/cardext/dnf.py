"""Negation push-down and AND-over-OR distribution into a DNF list."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DnfBlowup, UnsupportedNegation
from .query import (
    And,
    ConjunctiveQuery,
    JoinAtom,
    Not,
    Or,
    PredAtom,
    QueryAst,
    expand_attrs,
    join,
)

DEFAULT_CAP = 64

_COMPLEMENT = {"=": ("<", ">"), "<": ("=", ">"), ">": ("<", "=")}


@dataclass(frozen=True)
class DnfList:
    """Conjunctive queries sharing SELECT/FROM whose OR equals the source query."""

    queries: tuple

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        if not self.queries:
            raise ValueError("a DNF list is never empty")

    def __len__(self):
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def __getitem__(self, i):
        return self.queries[i]


def negate_atom(p: PredAtom) -> list:
    """NOT p as a disjunction of atoms over the operator set {<, =, >}."""
    if isinstance(p, JoinAtom):
        raise UnsupportedNegation(f"cannot negate join atom {p}")
    return [PredAtom(p.col, op, p.value) for op in _COMPLEMENT[p.op]]


def push_negations(expr, negate: bool = False):
    """Negation normal form; negated atoms become OR-ed complements."""
    if isinstance(expr, Not):
        return push_negations(expr.child, not negate)
    if isinstance(expr, PredAtom):
        return Or(negate_atom(expr)) if negate else expr
    if isinstance(expr, JoinAtom):
        if negate:
            raise UnsupportedNegation(f"cannot negate join atom {expr}")
        return expr
    kids = [push_negations(c, negate) for c in expr.children]
    if isinstance(expr, And):
        return Or(kids) if negate else And(kids)
    return And(kids) if negate else Or(kids)


def _dnf(expr, cap: int) -> list:
    """List of conjuncts; each conjunct is a list of atoms."""
    if isinstance(expr, (PredAtom, JoinAtom)):
        return [[expr]]
    if isinstance(expr, Or):
        out = []
        for c in expr.children:
            out.extend(_dnf(c, cap))
            if len(out) > cap:
                raise DnfBlowup(f"DNF list exceeds cap of {cap}")
        return out
    # And: cross product of the children's disjuncts, in order.
    out = [[]]
    for c in expr.children:
        branch = _dnf(c, cap)
        if len(out) * len(branch) > cap:
            raise DnfBlowup(f"DNF list exceeds cap of {cap}")
        out = [left + right for left in out for right in branch]
    return out


def get_dnf_list(q: QueryAst, schema=None, cap: int = DEFAULT_CAP) -> DnfList:
    attrs = expand_attrs(q, schema)
    tables = frozenset(q.tables)
    if q.where is None:
        return DnfList([ConjunctiveQuery(attrs, tables)])
    members = []
    for conj in _dnf(push_negations(q.where), cap):
        joins = {join(a.left, a.op, a.right) for a in conj if isinstance(a, JoinAtom)}
        preds = {a for a in conj if isinstance(a, PredAtom)}
        members.append(ConjunctiveQuery(attrs, tables, joins, preds))
    return DnfList(members)
