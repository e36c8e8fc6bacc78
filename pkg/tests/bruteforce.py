"""Tuple-at-a-time reference evaluator used as an independent oracle.

Enumerates the full cross product of the FROM tables with itertools and
evaluates the WHERE tree per tuple in plain Python. Only for tiny fixtures.
"""

import itertools
import operator

from cardext.query import And, ColumnRef, ConjunctiveQuery, JoinAtom, Not, Or, PredAtom, STAR

_OPS = {"<": operator.lt, "=": operator.eq, ">": operator.gt}


def _truth(expr, row):
    if expr is None:
        return True
    if isinstance(expr, PredAtom):
        return _OPS[expr.op](row[expr.col], expr.value)
    if isinstance(expr, JoinAtom):
        return _OPS[expr.op](row[expr.left], row[expr.right])
    if isinstance(expr, And):
        return all(_truth(c, row) for c in expr.children)
    if isinstance(expr, Or):
        return any(_truth(c, row) for c in expr.children)
    if isinstance(expr, Not):
        return not _truth(expr.child, row)
    raise TypeError(expr)


def brute_force(db, q):
    """Return (bag count, distinct count) for a QueryAst or ConjunctiveQuery."""
    if isinstance(q, ConjunctiveQuery):
        tables = sorted(q.tables)
        attrs = sorted(q.attrs)
        atoms = q.atoms()
        where = And(atoms) if len(atoms) > 1 else (atoms[0] if atoms else None)
    else:
        tables = list(q.tables)
        attrs = []
        for a in q.attrs:
            if a == STAR:
                attrs += [ColumnRef(t, c) for t in tables for c in db.schema.column_names(t)]
            else:
                attrs.append(a)
        where = q.where
    per_table = []
    for t in tables:
        table = db.tables[t]
        names = list(table.columns)
        rows = [
            {ColumnRef(t, n): int(table.columns[n][i]) for n in names}
            for i in range(table.row_count)
        ]
        per_table.append(rows)
    bag = 0
    distinct = set()
    for combo in itertools.product(*per_table):
        row = {}
        for part in combo:
            row.update(part)
        if _truth(where, row):
            bag += 1
            distinct.add(tuple(row[a] for a in attrs))
    return bag, len(distinct)
