import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from cardext import datagen  # noqa: E402
from cardext.query import And, ColumnRef, Not, Or, QueryAst, join, pred  # noqa: E402
from cardext.store import ColumnDef, Database, Schema, TableDef  # noqa: E402

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def make_schema(spec: dict, edges=()) -> Schema:
    """spec: {table: {column: (min, max)}}"""
    tables = [TableDef(t, [ColumnDef(c, lo, hi) for c, (lo, hi) in cols.items()]) for t, cols in spec.items()]
    return Schema(tables, edges)


def make_db(data: dict, edges=()) -> Database:
    """data: {table: {column: list of ints}}"""
    spec = {}
    for t, cols in data.items():
        spec[t] = {c: (min(v) if len(v) else 0, max(v) if len(v) else 0) for c, v in cols.items()}
    return Database(make_schema(spec, edges), data)


@pytest.fixture
def toy_db():
    return make_db(
        {"R": {"a": [1, 1, 2], "b": [1, 2, 2]}, "S": {"b": [1, 2, 2], "c": [10, 20, 30]}},
        [("R.b", "S.b")],
    )


# --------------------------------------------------------------------------
# random tiny databases and queries for brute-force comparison

TINY_TABLES = {"R": ("a", "b"), "S": ("b", "c"), "T": ("c", "d")}
TINY_EDGES = [("R.b", "S.b"), ("S.c", "T.c")]


@st.composite
def tiny_dbs(draw, max_rows=5, max_value=3):
    data = {}
    for t, cols in TINY_TABLES.items():
        n = draw(st.integers(0, max_rows))
        data[t] = {c: draw(st.lists(st.integers(0, max_value), min_size=n, max_size=n)) for c in cols}
    return make_db(data, TINY_EDGES)


def _columns(tables):
    return [ColumnRef(t, c) for t in tables for c in TINY_TABLES[t]]


@st.composite
def tiny_atoms(draw, tables, joins_ok=True, inequality=False, max_value=3):
    cols = _columns(tables)
    if joins_ok and len(tables) > 1 and draw(st.booleans()):
        a, b = draw(st.permutations(cols))[:2]
        if a.table != b.table:
            op = draw(st.sampled_from("<=>")) if inequality else "="
            return join(a, op, b)
    return pred(draw(st.sampled_from(cols)), draw(st.sampled_from("<=>")), draw(st.integers(-1, max_value + 1)))


@st.composite
def tiny_exprs(draw, tables, depth=3, negation=True, joins_ok=True, inequality=False):
    """Random boolean trees. NOT is only placed over join-free subtrees."""
    if depth == 0 or draw(st.integers(0, 2)) == 0:
        return draw(tiny_atoms(tables, joins_ok, inequality))
    kind = draw(st.sampled_from(["and", "or", "not"] if negation else ["and", "or"]))
    if kind == "not":
        return Not(draw(tiny_exprs(tables, depth - 1, negation, joins_ok=False)))
    kids = draw(st.lists(tiny_exprs(tables, depth - 1, negation, joins_ok, inequality), min_size=2, max_size=3))
    return And(kids) if kind == "and" else Or(kids)


@st.composite
def tiny_queries(draw, negation=True, inequality=False, conjunctive=False):
    tables = draw(st.sampled_from([("R",), ("S",), ("R", "S"), ("S", "T"), ("R", "S", "T")]))
    attrs = draw(st.lists(st.sampled_from(_columns(tables)), min_size=1, max_size=3, unique=True))
    if conjunctive:
        atoms = draw(st.lists(tiny_atoms(tables, True, inequality), min_size=0, max_size=4))
        where = None if not atoms else (atoms[0] if len(atoms) == 1 else And(atoms))
    else:
        where = draw(st.none() | tiny_exprs(tables, 3, negation, True, inequality))
    return QueryAst(tuple(attrs), tables, where, draw(st.booleans()))


# --------------------------------------------------------------------------
# desk-scale synthetic database


@pytest.fixture(scope="session")
def small_synth():
    db, schema = datagen.gen_db(datagen.default_db_config(seed=7, scale=0.25))
    return db


def rng(*seed):
    return np.random.default_rng(list(seed))


# --------------------------------------------------------------------------
# acceptance verdicts, echoed at the end of the run

ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
