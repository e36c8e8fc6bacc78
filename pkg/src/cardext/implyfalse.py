"""Linear-time contradiction detection for conjunctive queries.

Columns tied by equality joins are merged into classes with a union-find;
each class then carries a strict lower bound, a strict upper bound and an
optional exact value folded from the column predicates.

The exact-value check uses strict bounds: ``a = 5 AND a > 5`` is reported as
contradictory, whereas a non-strict ``min <= v <= max`` test would miss it.
This stays sound because every bound comes from a strict operator. No
integer-gap tightening is done, so ``a > 5 AND a < 6`` is not flagged.
"""

from __future__ import annotations

import math

from .errors import UnsupportedJoin
from .query import ConjunctiveQuery

_UNSET = object()


class UnionFind:
    """Union by size with path compression.

    ``representative`` is the smallest member of a class, so results do not
    depend on union order. ``ops`` counts parent hops and link operations.
    """

    def __init__(self, items=()):
        self.parent = {}
        self.size = {}
        self.smallest = {}
        self.ops = 0
        for x in items:
            self.add(x)

    def add(self, x):
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1
            self.smallest[x] = x

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
            self.ops += 1
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
            self.ops += 1
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        self.ops += 1
        if ra == rb:
            return ra
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.smallest[ra] = min(self.smallest[ra], self.smallest[rb])
        return ra

    def representative(self, x):
        return self.smallest[self.find(x)]


class Trace:
    """Operation counter for complexity checks."""

    def __init__(self):
        self.ops = 0


def imply_false(q: ConjunctiveQuery, trace: Trace | None = None) -> bool:
    """True only if ``q`` returns no rows on every database (sound, incomplete)."""
    if any(not j.is_equality for j in q.joins):
        raise UnsupportedJoin("contradiction check needs equality joins only")

    uf = UnionFind(q.columns())
    min_vals = {}
    max_vals = {}
    exact_vals = {}
    ops = 0

    for j in q.joins:
        uf.union(j.left, j.right)

    reps = {c: uf.representative(c) for c in uf.parent}
    for rep in set(reps.values()):
        min_vals[rep] = -math.inf
        max_vals[rep] = math.inf
        exact_vals[rep] = _UNSET

    verdict = False
    for p in q.preds:
        ops += 1
        rep = reps[p.col]
        if p.op == ">":
            min_vals[rep] = max(p.value, min_vals[rep])
        elif p.op == "<":
            max_vals[rep] = min(p.value, max_vals[rep])
        else:
            if exact_vals[rep] is not _UNSET and exact_vals[rep] != p.value:
                verdict = True
                break
            exact_vals[rep] = p.value

    if not verdict:
        for rep in min_vals:
            ops += 1
            lo, hi, exact = min_vals[rep], max_vals[rep], exact_vals[rep]
            if hi <= lo:
                verdict = True
                break
            if exact is not _UNSET and not (lo < exact < hi):
                verdict = True
                break

    if trace is not None:
        trace.ops += ops + uf.ops + len(uf.parent)
    return verdict
