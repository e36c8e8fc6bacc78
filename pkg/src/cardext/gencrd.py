"""Recursive inclusion-exclusion over a DNF list with a conjunctive estimator.

For a list [Q1, ..., Qn]:

    |Q| = |[Q1]| + |[Q2..Qn]| - |[Q2 & Q1, ..., Qn & Q1]|

Single-query lists are answered by the estimator unless the contradiction
check proves them empty. The recursion shape depends only on the list, so the
plan is built first and the leaves are evaluated afterwards, either in order
or on a thread pool, and then folded in the same fixed order. Both modes
therefore give bit-identical results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from .dnf import DEFAULT_CAP, DnfList, get_dnf_list
from .errors import CapabilityError
from .implyfalse import imply_false
from .query import ConjunctiveQuery, QueryAst, intersect


@dataclass
class GenCrdStats:
    estimator_calls: int = 0
    pruned_by_implyfalse: int = 0
    dnf_size: int = 0
    recursion_depth: int = 0


@dataclass(frozen=True)
class GenCrdResult:
    estimate: float
    stats: GenCrdStats


def call_bound(m: int) -> int:
    """Upper bound on estimator calls for a DNF list of size ``m``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return 2**m - 1


def _plan(queries: tuple, leaves: list, depth: int):
    """Returns (node, max depth). A node is a leaf index or an (a, b, c) triple."""
    if len(queries) == 1:
        leaves.append(queries[0])
        return len(leaves) - 1, depth
    first = queries[0]
    smaller = queries[1:]
    updated = tuple(intersect(q, first) for q in smaller)
    a, da = _plan((first,), leaves, depth + 1)
    b, db = _plan(smaller, leaves, depth + 1)
    c, dc = _plan(updated, leaves, depth + 1)
    return (a, b, c), max(da, db, dc)


def _fold(node, values):
    if isinstance(node, int):
        return values[node]
    a, b, c = node
    return _fold(a, values) + _fold(b, values) - _fold(c, values)


def gen_crd_list(
    dnf: DnfList | list,
    est,
    *,
    prune: bool = True,
    parallel: bool = False,
    max_workers: int | None = None,
) -> GenCrdResult:
    queries = tuple(dnf)
    leaves: list = []
    root, depth = _plan(queries, leaves, 1)
    caps = est.capabilities
    if parallel and not caps.thread_safe:
        raise CapabilityError("parallel mode needs a thread-safe estimator")

    pruned = [False] * len(leaves)
    for i, q in enumerate(leaves):
        if q.has_inequality_join:
            if not caps.supports_inequality_join:
                raise CapabilityError("estimator does not support inequality joins")
            # the contradiction check is only defined for equality joins
            continue
        if prune and imply_false(q):
            pruned[i] = True

    todo = [q for q, p in zip(leaves, pruned) if not p]
    if parallel and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            answers = list(pool.map(est.estimate, todo))
    else:
        answers = [est.estimate(q) for q in todo]

    it = iter(answers)
    values = [0 if p else next(it) for p in pruned]
    total = _fold(root, values)
    if total < 0:
        total = 0
    stats = GenCrdStats(
        estimator_calls=len(todo),
        pruned_by_implyfalse=sum(pruned),
        dnf_size=len(queries),
        recursion_depth=depth,
    )
    return GenCrdResult(total, stats)


def gen_crd(
    q: QueryAst | ConjunctiveQuery,
    est,
    *,
    schema=None,
    cap: int = DEFAULT_CAP,
    prune: bool = True,
    parallel: bool = False,
    max_workers: int | None = None,
) -> GenCrdResult:
    """Estimate |q| for an AND/OR/NOT query using a conjunctive-only estimator."""
    if isinstance(q, ConjunctiveQuery):
        dnf = DnfList([q])
    else:
        if schema is None:
            schema = getattr(est, "schema", None)
        dnf = get_dnf_list(q, schema, cap)
    return gen_crd_list(dnf, est, prune=prune, parallel=parallel, max_workers=max_workers)
