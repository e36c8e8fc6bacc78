"""In-memory integer column store and exact query executor.

The executor never materializes the full join product. Each intermediate
relation keeps only the columns still needed (SELECT attributes plus columns
of atoms not yet applied) and carries a multiplicity per distinct row, so
bag counts are sums of weights and the DISTINCT count is the number of groups
left after projecting onto the SELECT attributes.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    CsvParseError,
    EmptyColumn,
    SchemaMismatch,
    UnsupportedQuery,
    ValidationError,
)
from .query import (
    And,
    ColumnRef,
    ConjunctiveQuery,
    JoinAtom,
    Not,
    Or,
    PredAtom,
    QueryAst,
    conjuncts,
    expand_attrs,
    expr_columns,
    is_conjunctive,
    to_conjunctive,
    validate,
)

SCHEMA_VERSION = 1


# --------------------------------------------------------------------------
# schema


@dataclass(frozen=True)
class ColumnDef:
    name: str
    min: int
    max: int


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate column names in table {self.name}")

    @property
    def column_names(self) -> list:
        return [c.name for c in self.columns]


@dataclass(frozen=True)
class Schema:
    tables: tuple
    join_edges: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tables", tuple(self.tables))
        edges = []
        for a, b in self.join_edges:
            a = a if isinstance(a, ColumnRef) else ColumnRef.parse(a)
            b = b if isinstance(b, ColumnRef) else ColumnRef.parse(b)
            edges.append((a, b))
        object.__setattr__(self, "join_edges", tuple(edges))
        names = [t.name for t in self.tables]
        if len(set(names)) != len(names):
            raise ValidationError("duplicate table names")
        object.__setattr__(self, "_by_name", {t.name: t for t in self.tables})
        for a, b in self.join_edges:
            for ref in (a, b):
                if not self.has_column(ref):
                    raise ValidationError(f"join edge references unknown column {ref}")

    def has_table(self, name: str) -> bool:
        return name in self._by_name

    def table(self, name: str) -> TableDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise ValidationError(name) from None

    def has_column(self, ref: ColumnRef) -> bool:
        t = self._by_name.get(ref.table)
        return t is not None and ref.column in t.column_names

    def column_names(self, table: str) -> list:
        return self.table(table).column_names

    def column_def(self, ref: ColumnRef) -> ColumnDef:
        for c in self.table(ref.table).columns:
            if c.name == ref.column:
                return c
        raise ValidationError(str(ref))

    def all_columns(self) -> list:
        return [ColumnRef(t.name, c.name) for t in self.tables for c in t.columns]

    @property
    def n_tables(self) -> int:
        return len(self.tables)

    @property
    def n_columns(self) -> int:
        return sum(len(t.columns) for t in self.tables)

    def neighbors(self, table: str) -> list:
        """Declared join edges touching ``table`` as (own column, other column)."""
        out = []
        for a, b in self.join_edges:
            if a.table == table and b.table != table:
                out.append((a, b))
            elif b.table == table and a.table != table:
                out.append((b, a))
        return out

    def to_dict(self) -> dict:
        return {
            "version": SCHEMA_VERSION,
            "tables": [
                {
                    "name": t.name,
                    "columns": [{"name": c.name, "min": c.min, "max": c.max} for c in t.columns],
                }
                for t in self.tables
            ],
            "join_edges": [[str(a), str(b)] for a, b in self.join_edges],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Schema":
        if d.get("version", SCHEMA_VERSION) != SCHEMA_VERSION:
            raise SchemaMismatch(f"unsupported schema version {d.get('version')}")
        tables = [
            TableDef(t["name"], [ColumnDef(c["name"], int(c["min"]), int(c["max"])) for c in t["columns"]])
            for t in d["tables"]
        ]
        return cls(tables, [tuple(e) for e in d.get("join_edges", [])])

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "Schema":
        return cls.from_dict(json.loads(Path(path).read_text()))


# --------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class ColumnStats:
    min: int
    max: int
    distinct_count: int


class Table:
    """Dense integer columns of equal length. Read-only after construction."""

    def __init__(self, name: str, columns: dict):
        self.name = name
        self.columns = {}
        lengths = set()
        for cname, values in columns.items():
            arr = np.array(values, dtype=np.int64)
            if arr.ndim != 1:
                raise SchemaMismatch(f"column {name}.{cname} is not one-dimensional")
            arr.setflags(write=False)
            self.columns[cname] = arr
            lengths.add(len(arr))
        if len(lengths) > 1:
            raise SchemaMismatch(f"columns of {name} have different lengths")
        self.row_count = lengths.pop() if lengths else 0
        self._stats = {}
        for cname, arr in self.columns.items():
            if len(arr):
                self._stats[cname] = ColumnStats(int(arr.min()), int(arr.max()), int(len(np.unique(arr))))

    def stats(self, column: str) -> ColumnStats:
        if column not in self.columns:
            raise ValidationError(f"{self.name}.{column}")
        if column not in self._stats:
            raise EmptyColumn(f"{self.name}.{column} is empty")
        return self._stats[column]

    def __repr__(self):
        return f"Table({self.name!r}, rows={self.row_count}, columns={list(self.columns)})"


def load_csv(path, table_def: TableDef) -> Table:
    """Read a header + integer-cells CSV file into a :class:`Table`."""
    names = table_def.column_names
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: missing header row") from None
        header = [h.strip() for h in header]
        if header != names:
            raise SchemaMismatch(f"{path}: header {header} does not match {names}")
        data = [[] for _ in names]
        for rowno, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(names):
                raise CsvParseError(f"{path}: row {rowno} has {len(row)} cells", rowno)
            for i, cell in enumerate(row):
                try:
                    data[i].append(int(cell))
                except ValueError:
                    raise CsvParseError(
                        f"{path}: row {rowno}, column {names[i]}: not an integer: {cell!r}",
                        rowno,
                        names[i],
                    ) from None
    return Table(table_def.name, dict(zip(names, data)))


def save_csv(table: Table, path) -> None:
    names = list(table.columns)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(names) + "\n")
        if table.row_count:
            stacked = np.stack([table.columns[n] for n in names], axis=1)
            for row in stacked:
                fh.write(",".join(map(str, row.tolist())) + "\n")


class Database:
    """A schema plus one :class:`Table` per declared table. Immutable."""

    def __init__(self, schema: Schema, tables: dict):
        self.schema = schema
        self.tables = {}
        for tdef in schema.tables:
            if tdef.name not in tables:
                raise SchemaMismatch(f"missing data for table {tdef.name}")
            t = tables[tdef.name]
            if not isinstance(t, Table):
                t = Table(tdef.name, t)
            if list(t.columns) != tdef.column_names:
                raise SchemaMismatch(f"table {tdef.name} columns {list(t.columns)} != {tdef.column_names}")
            self.tables[tdef.name] = t

    def table(self, name: str) -> Table:
        try:
            return self.tables[name]
        except KeyError:
            raise ValidationError(name) from None

    def column(self, ref: ColumnRef) -> np.ndarray:
        t = self.table(ref.table)
        try:
            return t.columns[ref.column]
        except KeyError:
            raise ValidationError(str(ref)) from None

    def save(self, directory) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        self.schema.save(directory / "schema.json")
        for name, t in self.tables.items():
            save_csv(t, directory / f"{name}.csv")

    @classmethod
    def load(cls, directory, schema: Schema | None = None) -> "Database":
        directory = Path(directory)
        if schema is None:
            schema = Schema.load(directory / "schema.json")
        tables = {t.name: load_csv(directory / f"{t.name}.csv", t) for t in schema.tables}
        return cls(schema, tables)


def column_stats(db: Database, ref: ColumnRef | str) -> ColumnStats:
    if isinstance(ref, str):
        ref = ColumnRef.parse(ref)
    return db.table(ref.table).stats(ref.column)


# --------------------------------------------------------------------------
# execution


@dataclass(frozen=True)
class ExecResult:
    card_dup: int
    card_distinct: int

    @property
    def uniqueness_rate(self) -> float:
        return self.card_distinct / self.card_dup if self.card_dup else 0.0


_OVERFLOW_GUARD = 2**62


@dataclass
class _Rel:
    cols: dict
    weights: np.ndarray
    tables: set = field(default_factory=set)

    def __len__(self):
        return len(self.weights)


def _dense_ids(arrays: list, n: int) -> tuple:
    """Map rows of the column list to dense group ids 0..k-1."""
    if not arrays:
        return np.zeros(n, dtype=np.int64), (1 if n else 0)
    key, k = None, 0
    for a in arrays:
        uniq, inv = np.unique(a, return_inverse=True)
        inv = inv.reshape(-1)
        if key is None:
            key, k = inv.astype(np.int64), len(uniq)
        else:
            u2, key = np.unique(key * len(uniq) + inv, return_inverse=True)
            key, k = key.reshape(-1), len(u2)
    return key, k


def _group(rel: _Rel, keep: list) -> _Rel:
    n = len(rel)
    arrays = [rel.cols[c] for c in keep]
    if n == 0:
        return _Rel({c: a[:0] for c, a in zip(keep, arrays)}, rel.weights[:0], rel.tables)
    ids, _ = _dense_ids(arrays, n)
    order = np.argsort(ids, kind="stable")
    sid = ids[order]
    starts = np.flatnonzero(np.concatenate(([True], sid[1:] != sid[:-1])))
    weights = np.add.reduceat(rel.weights[order], starts)
    cols = {c: a[order][starts] for c, a in zip(keep, arrays)}
    return _Rel(cols, weights, rel.tables)


def _mul_weights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.dtype != object and len(a) and len(b):
        if int(a.max()) * int(b.max()) > _OVERFLOW_GUARD:
            a, b = a.astype(object), b.astype(object)
    return a * b


def _join(left: _Rel, right: _Rel, pairs: list) -> _Rel:
    nl, nr = len(left), len(right)
    if not pairs:
        li = np.repeat(np.arange(nl), nr)
        ri = np.tile(np.arange(nr), nl)
    else:
        combined = [np.concatenate([left.cols[a], right.cols[b]]) for a, b in pairs]
        ids, _ = _dense_ids(combined, nl + nr)
        lid, rid = ids[:nl], ids[nl:]
        order = np.argsort(rid, kind="stable")
        rs = rid[order]
        lo = np.searchsorted(rs, lid, "left")
        hi = np.searchsorted(rs, lid, "right")
        cnt = hi - lo
        total = int(cnt.sum())
        li = np.repeat(np.arange(nl), cnt)
        offsets = np.repeat(lo - (np.cumsum(cnt) - cnt), cnt)
        ri = order[np.arange(total) + offsets]
    cols = {c: a[li] for c, a in left.cols.items()}
    cols.update({c: a[ri] for c, a in right.cols.items()})
    return _Rel(cols, _mul_weights(left.weights[li], right.weights[ri]), left.tables | right.tables)


_CMP = {
    "<": np.less,
    "=": np.equal,
    ">": np.greater,
}


def eval_expr(expr, env: dict) -> np.ndarray:
    """Vectorized truth value of ``expr`` over aligned column arrays."""
    if isinstance(expr, PredAtom):
        return _CMP[expr.op](env[expr.col], expr.value)
    if isinstance(expr, JoinAtom):
        return _CMP[expr.op](env[expr.left], env[expr.right])
    if isinstance(expr, And):
        out = eval_expr(expr.children[0], env)
        for c in expr.children[1:]:
            out = out & eval_expr(c, env)
        return out
    if isinstance(expr, Or):
        out = eval_expr(expr.children[0], env)
        for c in expr.children[1:]:
            out = out | eval_expr(c, env)
        return out
    if isinstance(expr, Not):
        return ~eval_expr(expr.child, env)
    raise UnsupportedQuery(f"cannot evaluate {expr!r}")


def _filter(rel: _Rel, exprs: list) -> _Rel:
    if not exprs or not len(rel):
        return rel
    mask = np.ones(len(rel), dtype=bool)
    for e in exprs:
        mask &= eval_expr(e, rel.cols)
    return _Rel({c: a[mask] for c, a in rel.cols.items()}, rel.weights[mask], rel.tables)


def _run(db: Database, attrs: frozenset, tables, where_conjuncts: list) -> ExecResult:
    table_filters = {t: [] for t in tables}
    join_keys, residual = [], []
    for e in where_conjuncts:
        touched = {c.table for c in expr_columns(e)}
        if len(touched) == 1:
            table_filters[touched.pop()].append(e)
        elif isinstance(e, JoinAtom) and e.is_equality:
            join_keys.append(e)
        else:
            residual.append(e)

    pending = list(join_keys) + list(residual)

    def needed(rel_tables):
        cols = {a for a in attrs if a.table in rel_tables}
        for e in pending:
            cols.update(c for c in expr_columns(e) if c.table in rel_tables)
        return sorted(cols)

    base = {}
    for t in sorted(tables):
        table = db.table(t)
        env = {ColumnRef(t, c): a for c, a in table.columns.items()}
        mask = np.ones(table.row_count, dtype=bool)
        for e in table_filters[t]:
            mask &= eval_expr(e, env)
        rel = _Rel(
            {ref: arr[mask] for ref, arr in env.items()},
            np.ones(int(mask.sum()), dtype=np.int64),
            {t},
        )
        base[t] = _group(rel, needed({t}))

    remaining = set(tables)
    start = min(remaining, key=lambda t: (len(base[t]), t))
    current = base[start]
    remaining.discard(start)
    while remaining and len(current):
        linked = {
            t
            for t in remaining
            for j in pending
            if isinstance(j, JoinAtom)
            and j.is_equality
            and {j.left.table, j.right.table} & current.tables
            and t in (j.left.table, j.right.table)
        }
        pool = linked or remaining
        nxt = min(pool, key=lambda t: (len(base[t]), t))
        pairs, still = [], []
        for e in pending:
            if isinstance(e, JoinAtom) and e.is_equality:
                if e.left.table in current.tables and e.right.table == nxt:
                    pairs.append((e.left, e.right))
                    continue
                if e.right.table in current.tables and e.left.table == nxt:
                    pairs.append((e.right, e.left))
                    continue
            still.append(e)
        current = _join(current, base[nxt], pairs)
        remaining.discard(nxt)
        pending = still
        ready = [e for e in pending if {c.table for c in expr_columns(e)} <= current.tables]
        pending = [e for e in pending if e not in ready]
        current = _filter(current, ready)
        current = _group(current, needed(current.tables))

    if remaining:  # some relation became empty
        return ExecResult(0, 0)
    if pending:
        current = _filter(current, pending)
        pending = []
        current = _group(current, needed(current.tables))
    card_dup = int(current.weights.sum()) if len(current) else 0
    return ExecResult(card_dup, len(current) if card_dup else 0)


def execute(db: Database, q) -> ExecResult:
    """Exact bag and set cardinality of a conjunctive query."""
    if isinstance(q, QueryAst):
        if not is_conjunctive(q.where):
            raise UnsupportedQuery("query contains OR/NOT; decompose it into a DNF list first")
        q = to_conjunctive(q, db.schema)
    validate(q, db.schema)
    return _run(db, q.attrs, q.tables, q.atoms())


def execute_general(db: Database, q: QueryAst) -> ExecResult:
    """Exact counts for a query whose WHERE clause may contain AND/OR/NOT."""
    if isinstance(q, ConjunctiveQuery):
        return execute(db, q)
    validate(q, db.schema)
    attrs = expand_attrs(q, db.schema)
    return _run(db, attrs, set(q.tables), conjuncts(q.where))
