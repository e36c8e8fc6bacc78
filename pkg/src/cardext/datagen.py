"""Synthetic correlated database, query workloads and ground-truth labels."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .dnf import DEFAULT_CAP, get_dnf_list
from .errors import ConfigError, GenError
from .parser import render
from .punq import LabeledSample
from .query import (
    And,
    ColumnRef,
    Not,
    OPS,
    Or,
    PredAtom,
    QueryAst,
    count_joins,
    is_conjunctive,
    join,
    to_conjunctive,
)
from .store import ColumnDef, Database, Schema, TableDef, execute_general

# --------------------------------------------------------------------------
# database generation


@dataclass(frozen=True)
class ColumnSpec:
    """How to fill one column.

    kind: "value" (Zipf over [low, high]), "serial" (low, low+1, ...), or
    "fk" (Zipf over the sorted values of ``ref``). A column with
    ``correlate_with`` copies the partner column's value (clipped to its own
    range) with probability ``strength``, else keeps its independent draw.
    """

    name: str
    low: int = 1
    high: int = 100
    skew: float = 0.0
    kind: str = "value"
    ref: str | None = None
    correlate_with: str | None = None
    strength: float = 0.0


@dataclass(frozen=True)
class TableSpec:
    name: str
    rows: int
    columns: tuple


@dataclass(frozen=True)
class DbGenConfig:
    tables: tuple
    join_edges: tuple = ()
    seed: int = 0

    def validate(self) -> None:
        seen = {}
        for t in self.tables:
            if t.rows < 0:
                raise ConfigError(f"{t.name}: negative row count")
            names = set()
            for c in t.columns:
                if c.kind not in ("value", "serial", "fk"):
                    raise ConfigError(f"{t.name}.{c.name}: unknown kind {c.kind!r}")
                if c.high < c.low and c.kind == "value":
                    raise ConfigError(f"{t.name}.{c.name}: empty range")
                if c.skew < 0:
                    raise ConfigError(f"{t.name}.{c.name}: negative skew")
                if not 0 <= c.strength <= 1:
                    raise ConfigError(f"{t.name}.{c.name}: strength outside [0, 1]")
                if c.kind == "fk" and (c.ref is None or c.ref not in seen):
                    raise ConfigError(f"{t.name}.{c.name}: fk must reference an earlier column")
                if c.correlate_with is not None and c.correlate_with not in names:
                    raise ConfigError(f"{t.name}.{c.name}: partner must be an earlier column")
                names.add(c.name)
                seen[f"{t.name}.{c.name}"] = c
        for a, b in self.join_edges:
            for ref in (a, b):
                if ref not in seen:
                    raise ConfigError(f"join edge references unknown column {ref}")


def zipf_choice(rng, values: np.ndarray, skew: float, size: int) -> np.ndarray:
    """Draw from ``values`` with P(rank k) proportional to k**-skew."""
    if size == 0:
        return np.zeros(0, dtype=np.int64)
    if skew == 0:
        return values[rng.integers(0, len(values), size=size)]
    w = np.arange(1, len(values) + 1, dtype=float) ** -skew
    return rng.choice(values, size=size, p=w / w.sum())


def gen_db(cfg: DbGenConfig):
    """Returns (Database, Schema); identical output for identical configs."""
    cfg.validate()
    data = {}
    tdefs = []
    for ti, t in enumerate(cfg.tables):
        cols = {}
        cdefs = []
        for ci, c in enumerate(t.columns):
            rng = np.random.default_rng([cfg.seed, ti, ci])
            if c.kind == "serial":
                vals = np.arange(c.low, c.low + t.rows, dtype=np.int64)
            elif c.kind == "fk":
                ptable, pcol = c.ref.split(".")
                parent = np.unique(data[ptable][pcol])
                vals = zipf_choice(rng, parent, c.skew, t.rows)
            else:
                vals = zipf_choice(rng, np.arange(c.low, c.high + 1, dtype=np.int64), c.skew, t.rows)
            if c.correlate_with is not None and c.strength > 0:
                partner = cols[c.correlate_with]
                copy = rng.random(t.rows) < c.strength
                vals = np.where(copy, np.clip(partner, c.low, c.high), vals)
            vals = np.asarray(vals, dtype=np.int64)
            cols[c.name] = vals
            lo = int(vals.min()) if len(vals) else c.low
            hi = int(vals.max()) if len(vals) else c.high
            cdefs.append(ColumnDef(c.name, lo, hi))
        data[t.name] = cols
        tdefs.append(TableDef(t.name, cdefs))
    schema = Schema(tdefs, [tuple(e) for e in cfg.join_edges])
    return Database(schema, data), schema


def default_db_config(seed: int = 0, scale: float = 1.0) -> DbGenConfig:
    """A small movie-style star schema with skew and in-table correlations."""

    def rows(n):
        return max(1, int(round(n * scale)))

    n_title = rows(2000)
    fk = dict(kind="fk", ref="title.id", skew=0.5)
    tables = (
        TableSpec("title", n_title, (
            ColumnSpec("id", 1, n_title, kind="serial"),
            ColumnSpec("kind_id", 1, 7, skew=1.0),
            ColumnSpec("production_year", 1950, 2019, skew=0.3),
            ColumnSpec("episode_nr", 1, 7, correlate_with="kind_id", strength=0.7),
        )),
        TableSpec("movie_companies", rows(3000), (
            ColumnSpec("movie_id", **fk),
            ColumnSpec("company_id", 1, 500, skew=1.1),
            ColumnSpec("company_type_id", 1, 2, skew=0.5),
        )),
        TableSpec("cast_info", rows(4000), (
            ColumnSpec("movie_id", **fk),
            ColumnSpec("person_id", 1, 3000, skew=0.8),
            ColumnSpec("role_id", 1, 11, skew=1.0),
        )),
        TableSpec("movie_info", rows(3000), (
            ColumnSpec("movie_id", **fk),
            ColumnSpec("info_type_id", 1, 110, skew=1.2),
            ColumnSpec("info", 1, 200, correlate_with="info_type_id", strength=0.5),
        )),
        TableSpec("movie_keyword", rows(3000), (
            ColumnSpec("movie_id", **fk),
            ColumnSpec("keyword_id", 1, 1000, skew=1.0),
        )),
        TableSpec("movie_info_idx", rows(2500), (
            ColumnSpec("movie_id", **fk),
            ColumnSpec("info_type_id", 99, 113, skew=0.7),
            ColumnSpec("rating", 1, 100, skew=0.2),
        )),
    )
    edges = tuple(
        ("title.id", f"{t.name}.movie_id") for t in tables if t.name != "title"
    )
    return DbGenConfig(tables, edges, seed)


# --------------------------------------------------------------------------
# query generation


@dataclass(frozen=True)
class WorkloadSpec:
    """``joins`` is a tuple of (join count, number of queries) pairs.

    ``dnf_sizes`` turns the workload into a general (AND/OR/NOT) one; the
    listed sizes are assigned round-robin within each join count.
    """

    joins: tuple = ((0, 150), (1, 150), (2, 150))
    max_preds: int = 2
    max_select: int = 3
    dnf_sizes: tuple | None = None
    distinct_fraction: float = 0.0
    seed: int = 0

    @property
    def count(self) -> int:
        return sum(n for _, n in self.joins)


def _pick_tables(schema: Schema, rng, joins: int):
    """Random connected table set of size joins+1 plus its spanning-tree joins."""
    names = [t.name for t in schema.tables]
    if joins == 0:
        return [names[rng.integers(len(names))]], []
    for _ in range(50):
        chosen = [names[rng.integers(len(names))]]
        atoms = []
        while len(chosen) < joins + 1:
            frontier = [
                (mine, other)
                for t in chosen
                for mine, other in schema.neighbors(t)
                if other.table not in chosen
            ]
            if not frontier:
                break
            mine, other = frontier[rng.integers(len(frontier))]
            chosen.append(other.table)
            atoms.append(join(mine, "=", other))
        if len(chosen) == joins + 1:
            return chosen, atoms
    raise GenError(f"no connected set of {joins + 1} tables")


def _random_pred(schema: Schema, rng, column: ColumnRef) -> PredAtom:
    d = schema.column_def(column)
    op = OPS[rng.integers(len(OPS))]
    return PredAtom(column, op, int(rng.integers(d.min, d.max + 1)))


def gen_conjunctive(
    schema: Schema,
    rng,
    joins: int,
    max_preds: int = 2,
    max_select: int = 3,
    distinct: bool = False,
    min_preds: int = 0,
) -> QueryAst:
    tables, join_atoms = _pick_tables(schema, rng, joins)
    preds = []
    for t in tables:
        cols = [ColumnRef(t, c) for c in schema.column_names(t)]
        p_t = int(rng.integers(0, max_preds + 1))
        picks = rng.choice(len(cols), size=min(p_t, len(cols)), replace=False)
        preds += [_random_pred(schema, rng, cols[i]) for i in picks]
    while len(preds) < min_preds:
        t = tables[rng.integers(len(tables))]
        cols = schema.column_names(t)
        preds.append(_random_pred(schema, rng, ColumnRef(t, cols[rng.integers(len(cols))])))
    all_cols = [ColumnRef(t, c) for t in tables for c in schema.column_names(t)]
    c = int(rng.integers(1, min(max_select, len(all_cols)) + 1))
    picks = sorted(rng.choice(len(all_cols), size=c, replace=False))
    attrs = [all_cols[i] for i in picks]
    atoms = list(join_atoms) + list(dict.fromkeys(preds))
    where = None if not atoms else atoms[0] if len(atoms) == 1 else And(atoms)
    return QueryAst(attrs, tables, where, distinct)


def mutate_pred(schema: Schema, rng, p: PredAtom, tables) -> PredAtom:
    """A predicate differing from ``p`` in at least one of column/op/constant."""
    cols = [ColumnRef(t, c) for t in tables for c in schema.column_names(t)]
    for _ in range(100):
        change = rng.random(3) < 0.5
        if not change.any():
            change[rng.integers(3)] = True
        column, op, value = p.col, p.op, p.value
        if change[0] and len(cols) > 1:
            column = cols[rng.integers(len(cols))]
        if change[1]:
            op = OPS[rng.integers(len(OPS))]
        d = schema.column_def(column)
        if change[2] or not d.min <= value <= d.max:
            value = int(rng.integers(d.min, d.max + 1))
        q = PredAtom(column, op, value)
        if q != p:
            return q
    raise GenError(f"could not mutate {p}")


def _factorizations(n: int, smallest: int = 2) -> list:
    """All multisets of factors >= 2 whose product is n (n=1 -> [[]])."""
    if n == 1:
        return [[]]
    out = []
    for f in range(smallest, n + 1):
        if n % f == 0:
            out += [[f] + rest for rest in _factorizations(n // f, f)]
    return out


def gen_general(
    schema: Schema,
    rng,
    joins: int,
    dnf_size: int,
    max_preds: int = 2,
    max_select: int = 3,
    distinct: bool = False,
) -> QueryAst:
    """Conjunctive query with some predicates widened to ``p OR p' ...`` and
    some leaves negated, so that its DNF list has exactly ``dnf_size`` members.

    A predicate slot holding k disjuncts of which n are negated contributes a
    factor k + n to the DNF size (a negated atom expands to two). The target
    is split into a random factorization over randomly chosen slots, and each
    factor into a random (k, n). Widening may stack several fresh predicates
    on one slot; otherwise prime sizes such as 5 would be unreachable.
    """
    if dnf_size < 1:
        raise GenError("dnf_size must be >= 1")
    base = gen_conjunctive(
        schema, rng, joins, max_preds, max_select, distinct, min_preds=1 if dnf_size > 1 else 0
    )
    if dnf_size == 1:
        return base
    items = list(base.where.children) if isinstance(base.where, And) else [base.where]
    join_atoms = [a for a in items if not isinstance(a, PredAtom)]
    preds = [a for a in items if isinstance(a, PredAtom)]
    plans = [f for f in _factorizations(dnf_size) if len(f) <= len(preds)]
    factors = plans[rng.integers(len(plans))]
    targets = rng.choice(len(preds), size=len(factors), replace=False)
    slots = [[(p, False)] for p in preds]
    for f, si in zip(factors, targets):
        choices = [(k, f - k) for k in range(1, f + 1) if f - k <= k]
        k, n_neg = choices[rng.integers(len(choices))]
        slot = slots[si]
        while len(slot) < k:
            fresh = mutate_pred(schema, rng, slot[0][0], base.tables)
            if all(fresh != leaf for leaf, _ in slot):
                slot.append((fresh, False))
        for li in rng.choice(k, size=n_neg, replace=False):
            slot[li] = (slot[li][0], True)
    parts = list(join_atoms)
    for s in slots:
        exprs = [Not(p) if neg else p for p, neg in s]
        parts.append(exprs[0] if len(exprs) == 1 else Or(exprs))
    where = parts[0] if len(parts) == 1 else And(parts)
    return QueryAst(base.attrs, base.tables, where, distinct)


def gen_workload(schema: Schema, spec: WorkloadSpec) -> list:
    """Deterministic in (schema, spec); query i with j joins uses seed (seed, j, i).

    Queries are unique by rendered text within a workload.
    """
    out, seen = [], set()
    for j, n in spec.joins:
        for i in range(n):
            rng = np.random.default_rng([spec.seed, j, i])
            for _ in range(50):
                distinct = bool(rng.random() < spec.distinct_fraction)
                if spec.dnf_sizes:
                    size = spec.dnf_sizes[i % len(spec.dnf_sizes)]
                    q = gen_general(schema, rng, j, size, spec.max_preds, spec.max_select, distinct)
                else:
                    q = gen_conjunctive(schema, rng, j, spec.max_preds, spec.max_select, distinct)
                key = render(q)
                if key not in seen:
                    break
            else:
                raise GenError(f"could not draw a fresh query for joins={j}, index={i}")
            seen.add(key)
            out.append(q)
    return out


# --------------------------------------------------------------------------
# labels


@dataclass(frozen=True)
class Label:
    card_dup: int
    card_distinct: int
    uniqueness: float
    joins: int
    dnf_size: int
    distinct: bool = False

    @property
    def empty(self) -> bool:
        return self.card_dup == 0

    @property
    def target(self) -> int:
        return self.card_distinct if self.distinct else self.card_dup


def label_workload(db: Database, queries, cap: int = DEFAULT_CAP) -> list:
    labels = []
    for q in queries:
        r = execute_general(db, q)
        labels.append(
            Label(
                card_dup=r.card_dup,
                card_distinct=r.card_distinct,
                uniqueness=r.uniqueness_rate,
                joins=count_joins(q),
                dnf_size=len(get_dnf_list(q, db.schema, cap)),
                distinct=q.distinct,
            )
        )
    return labels


def write_labels(path, labels) -> None:
    doc = {"version": 1, "labels": [asdict(l) for l in labels]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def read_labels(path) -> list:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("version") != 1:
        raise ConfigError(f"unsupported label file version {doc.get('version')}")
    return [Label(**d) for d in doc["labels"]]


def training_samples(queries, labels, schema) -> list:
    """Non-empty conjunctive queries paired with their uniqueness rate."""
    out = []
    for q, l in zip(queries, labels):
        if l.empty or not is_conjunctive(q.where):
            continue
        out.append(LabeledSample(to_conjunctive(q, schema), l.uniqueness))
    return out


@dataclass
class LabeledSet:
    queries: list = field(default_factory=list)
    labels: list = field(default_factory=list)


def gen_labeled(db: Database, spec: WorkloadSpec, nonempty: bool = True, max_rounds: int = 20) -> LabeledSet:
    """Generate and label queries until every quota is met.

    Quotas are per join count and, for general workloads, split evenly over
    ``dnf_sizes``. With ``nonempty`` queries with empty results are dropped.
    Extra rounds shift the seed deterministically and double the number of
    candidates drawn, so sparse join counts still fill their quota.
    """
    quotas = []
    for j, n in spec.joins:
        if spec.dnf_sizes:
            k = len(spec.dnf_sizes)
            quotas += [(j, size, n // k + (1 if r < n % k else 0)) for r, size in enumerate(spec.dnf_sizes)]
        else:
            quotas.append((j, None, n))
    out = LabeledSet()
    seen = set()
    for j, size, n in quotas:
        got = 0
        for rnd in range(max_rounds):
            need = n - got
            if need <= 0:
                break
            sub = WorkloadSpec(
                ((j, need * 2 ** min(rnd + 1, 12)),),
                spec.max_preds,
                spec.max_select,
                None if size is None else (size,),
                spec.distinct_fraction,
                spec.seed * 100_000 + rnd * 100 + (size or 0),
            )
            qs = gen_workload(db.schema, sub)
            ls = label_workload(db, qs)
            for q, l in zip(qs, ls):
                key = render(q)
                if (nonempty and l.empty) or key in seen:
                    continue
                seen.add(key)
                out.queries.append(q)
                out.labels.append(l)
                got += 1
                if got == n:
                    break
        if got < n:
            raise GenError(f"only {got} of {n} usable queries for joins={j}, dnf size={size}")
    return out
