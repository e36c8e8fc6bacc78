import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bruteforce import brute_force
from conftest import make_db, tiny_dbs, tiny_queries
from cardext.errors import CsvParseError, EmptyColumn, SchemaMismatch, UnsupportedQuery, ValidationError
from cardext.parser import parse
from cardext.query import ColumnRef, ConjunctiveQuery, QueryAst, pred, to_conjunctive
from cardext.store import (
    ColumnDef,
    Database,
    ExecResult,
    Schema,
    TableDef,
    column_stats,
    execute,
    execute_general,
    load_csv,
)

R_DEF = TableDef("R", [ColumnDef("a", 0, 9), ColumnDef("b", 0, 9)])


def test_load_csv_three_rows(tmp_path):
    f = tmp_path / "R.csv"
    f.write_text("a,b\n1,2\n3,4\n5,6\n")
    t = load_csv(f, R_DEF)
    assert t.row_count == 3
    assert t.columns["b"].tolist() == [2, 4, 6]
    assert t.stats("a").max == 5


def test_load_csv_header_only(tmp_path):
    f = tmp_path / "R.csv"
    f.write_text("a,b\n")
    assert load_csv(f, R_DEF).row_count == 0


def test_load_csv_bad_cell_names_row(tmp_path):
    f = tmp_path / "R.csv"
    f.write_text("a,b\n1,2\nx,4\n")
    with pytest.raises(CsvParseError) as exc:
        load_csv(f, R_DEF)
    assert exc.value.row == 2
    assert exc.value.column == "a"
    assert "row 2" in str(exc.value)


def test_load_csv_header_mismatch(tmp_path):
    f = tmp_path / "R.csv"
    f.write_text("a,c\n1,2\n")
    with pytest.raises(SchemaMismatch):
        load_csv(f, R_DEF)


def test_load_csv_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_csv(tmp_path / "nope.csv", R_DEF)


def test_database_save_load_roundtrip(tmp_path, toy_db):
    toy_db.save(tmp_path / "db")
    back = Database.load(tmp_path / "db")
    assert back.schema == toy_db.schema
    for name, t in toy_db.tables.items():
        for c, arr in t.columns.items():
            assert np.array_equal(back.tables[name].columns[c], arr)


def test_schema_rejects_bad_edges():
    with pytest.raises(ValidationError):
        Schema([R_DEF], [("R.a", "R.z")])
    with pytest.raises(ValidationError):
        Schema([R_DEF, R_DEF])


def test_uniqueness_rate_worked_example():
    # 10 rows of 1, 4 of 2, 1 of 3 -> 15 rows, 3 distinct
    db = make_db({"R": {"a": [1] * 10 + [2] * 4 + [3]}})
    r = execute(db, parse("SELECT R.a FROM R"))
    assert (r.card_dup, r.card_distinct) == (15, 3)
    assert r.uniqueness_rate == pytest.approx(0.2)


def test_empty_result_has_zero_uniqueness(toy_db):
    r = execute(toy_db, parse("SELECT R.a FROM R WHERE R.a > 1000000000"))
    assert r == ExecResult(0, 0)
    assert r.uniqueness_rate == 0


def test_toy_join_matches_hand_enumeration(toy_db):
    r = execute(toy_db, parse("SELECT R.a FROM R, S WHERE R.b = S.b"))
    assert (r.card_dup, r.card_distinct) == (5, 2)
    assert brute_force(toy_db, parse("SELECT R.a FROM R, S WHERE R.b = S.b")) == (5, 2)


def test_execute_rejects_disjunction(toy_db):
    with pytest.raises(UnsupportedQuery):
        execute(toy_db, parse("SELECT R.a FROM R WHERE R.a = 1 OR R.a = 2"))


def test_execute_validates(toy_db):
    q = ConjunctiveQuery({ColumnRef("R", "z")}, {"R"})
    with pytest.raises(ValidationError):
        execute(toy_db, q)


def test_execute_general_examples(toy_db):
    assert execute_general(toy_db, parse("SELECT R.a FROM R WHERE R.a > 5 AND R.a < 5")).card_dup == 0
    assert execute_general(toy_db, parse("SELECT * FROM S WHERE TRUE")).card_dup == 3
    r = execute_general(toy_db, parse("SELECT R.a FROM R, S WHERE R.b = S.b AND (S.c = 10 OR NOT R.a = 1)"))
    assert (r.card_dup, r.card_distinct) == brute_force(
        toy_db, parse("SELECT R.a FROM R, S WHERE R.b = S.b AND (S.c = 10 OR NOT R.a = 1)")
    )


def test_column_stats_examples():
    db = make_db({"R": {"a": [3, 3, 7], "b": [5, 5, 5]}, "E": {"x": []}})
    assert tuple(vars(column_stats(db, "R.a")).values()) == (3, 7, 2)
    assert tuple(vars(column_stats(db, "R.b")).values()) == (5, 5, 1)
    with pytest.raises(EmptyColumn):
        column_stats(db, "E.x")
    with pytest.raises(ValidationError):
        column_stats(db, "R.q")


def test_column_stats_on_generated_column(small_synth):
    for ref in small_synth.schema.all_columns():
        values = small_synth.column(ref).tolist()
        s = column_stats(small_synth, ref)
        assert (s.min, s.max, s.distinct_count) == (min(values), max(values), len(set(values)))


def test_large_weights_do_not_overflow():
    # four-way self-similar product: 200**4 rows, all equal keys
    n = 200
    data = {t: {"k": [1] * n} for t in "ABCD"}
    db = make_db(data, [("A.k", "B.k"), ("B.k", "C.k"), ("C.k", "D.k")])
    q = parse("SELECT A.k FROM A, B, C, D WHERE A.k = B.k AND B.k = C.k AND C.k = D.k")
    assert execute(db, q).card_dup == n**4


@given(tiny_dbs(), tiny_queries(inequality=True))
def test_execute_general_matches_brute_force(db, q):
    r = execute_general(db, q)
    assert (r.card_dup, r.card_distinct) == brute_force(db, q)


@given(tiny_dbs(), tiny_queries(conjunctive=True, inequality=True))
def test_store_invariants(db, q):
    r = execute(db, q)
    assert 0 <= r.card_distinct <= r.card_dup
    assert 0 <= r.uniqueness_rate <= 1
    # conjunctive WHERE: both executors agree
    assert execute_general(db, q) == r
    # SELECT list does not change bag counts; adding a column never lowers distinct
    cq = to_conjunctive(q, db.schema)
    extra = [c for t in sorted(cq.tables) for c in (ColumnRef(t, n) for n in db.schema.column_names(t))]
    bigger = ConjunctiveQuery(cq.attrs | {extra[0]}, cq.tables, cq.joins, cq.preds)
    other = ConjunctiveQuery({extra[-1]}, cq.tables, cq.joins, cq.preds)
    rb = execute(db, bigger)
    assert rb.card_dup == r.card_dup == execute(db, other).card_dup
    assert rb.card_distinct >= r.card_distinct


@given(st.lists(st.integers(-3, 3), min_size=1, max_size=30), st.integers(-4, 4))
def test_single_column_counts(values, v):
    db = make_db({"R": {"a": values}})
    for op, fn in (("<", int.__lt__), ("=", int.__eq__), (">", int.__gt__)):
        q = QueryAst((ColumnRef("R", "a"),), ("R",), pred("R.a", op, v))
        kept = [x for x in values if fn(x, v)]
        assert execute(db, q) == ExecResult(len(kept), len(set(kept)))
