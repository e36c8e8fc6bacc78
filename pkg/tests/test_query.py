import pytest
from hypothesis import given
from hypothesis import strategies as st

from bruteforce import brute_force
from conftest import TINY_TABLES, tiny_atoms, tiny_dbs, tiny_queries
from cardext.errors import MismatchedFromOrSelect, NotConjunctive, ValidationError
from cardext.parser import parse
from cardext.query import (
    And,
    ColumnRef,
    ConjunctiveQuery,
    JoinAtom,
    Or,
    PredAtom,
    QueryAst,
    count_joins,
    intersect,
    join,
    pred,
    to_conjunctive,
    validate,
)
from cardext.store import execute, execute_general


def test_validate_ok(toy_db):
    validate(parse("SELECT R.a FROM R, S WHERE R.b = S.b AND S.c > 1"), toy_db.schema)


def test_validate_unknown_column(toy_db):
    with pytest.raises(ValidationError, match=r"R\.z"):
        validate(QueryAst((ColumnRef("R", "z"),), ("R",)), toy_db.schema)


def test_validate_column_of_table_not_in_from(toy_db):
    with pytest.raises(ValidationError, match=r"S\.c"):
        validate(QueryAst((ColumnRef("R", "a"),), ("R",), pred("S.c", "=", 1)), toy_db.schema)


def test_validate_single_child_or(toy_db):
    q = QueryAst((ColumnRef("R", "a"),), ("R",), Or([pred("R.a", "=", 1)]))
    with pytest.raises(ValidationError):
        validate(q, toy_db.schema)


def test_to_conjunctive_four_sets(toy_db):
    cq = to_conjunctive(parse("SELECT R.a FROM R, S WHERE R.b = S.b AND R.a > 5"), toy_db.schema)
    assert cq.attrs == {ColumnRef("R", "a")}
    assert cq.tables == {"R", "S"}
    assert cq.joins == {JoinAtom(ColumnRef("R", "b"), "=", ColumnRef("S", "b"))}
    assert cq.preds == {PredAtom(ColumnRef("R", "a"), ">", 5)}


def test_to_conjunctive_rejects_or(toy_db):
    with pytest.raises(NotConjunctive):
        to_conjunctive(parse("SELECT R.a FROM R WHERE R.a = 1 OR R.a = 2"), toy_db.schema)


def test_to_conjunctive_dedups_atoms(toy_db):
    cq = to_conjunctive(parse("SELECT R.a FROM R WHERE R.a > 5 AND R.a > 5"), toy_db.schema)
    assert len(cq.preds) == 1


def test_star_expansion(toy_db):
    cq = to_conjunctive(parse("SELECT * FROM R, S WHERE R.b = S.b"), toy_db.schema)
    assert cq.attrs == {ColumnRef("R", "a"), ColumnRef("R", "b"), ColumnRef("S", "b"), ColumnRef("S", "c")}


def test_join_atoms_are_canonical():
    assert join("S.b", "=", "R.b") == join("R.b", "=", "S.b")
    assert join("S.b", "<", "R.a") == JoinAtom(ColumnRef("R", "a"), ">", ColumnRef("S", "b"))


def test_count_joins(toy_db):
    assert count_joins(parse("SELECT R.a FROM R, S WHERE R.b = S.b")) == 1
    assert count_joins(parse("SELECT R.a FROM R")) == 0


def _cq(*preds_):
    return ConjunctiveQuery({ColumnRef("R", "a")}, {"R"}, (), preds_)


def test_intersect_unions_predicates():
    q = intersect(_cq(pred("R.a", ">", 5)), _cq(pred("R.a", "<", 9)))
    assert q.preds == {pred("R.a", ">", 5), pred("R.a", "<", 9)}


def test_intersect_idempotent():
    q = _cq(pred("R.a", ">", 5))
    assert intersect(q, q) == q


def test_intersect_mismatch():
    other = ConjunctiveQuery({ColumnRef("R", "b")}, {"R"})
    with pytest.raises(MismatchedFromOrSelect):
        intersect(_cq(), other)


@st.composite
def conj_pairs(draw):
    tables = draw(st.sampled_from([("R",), ("R", "S"), ("R", "S", "T")]))
    attrs = frozenset({ColumnRef(tables[0], TINY_TABLES[tables[0]][0])})
    out = []
    for _ in range(3):
        atoms = draw(st.lists(tiny_atoms(tables, True, True), max_size=3))
        out.append(
            ConjunctiveQuery(
                attrs,
                frozenset(tables),
                [a for a in atoms if isinstance(a, JoinAtom)],
                [a for a in atoms if isinstance(a, PredAtom)],
            )
        )
    return out


@given(tiny_dbs(), conj_pairs())
def test_intersect_properties(db, qs):
    q1, q2, q3 = qs
    a, b = intersect(q1, q2), intersect(q2, q1)
    assert (a.joins, a.preds) == (b.joins, b.preds)
    left, right = intersect(intersect(q1, q2), q3), intersect(q1, intersect(q2, q3))
    assert left == right
    both = execute(db, a).card_dup
    assert both <= min(execute(db, q1).card_dup, execute(db, q2).card_dup)
    # the intersection holds exactly the tuples satisfying both conjuncts
    q1w = q1.to_ast().where
    q2w = q2.to_ast().where
    parts = [w for w in (q1w, q2w) if w is not None]
    where = None if not parts else (parts[0] if len(parts) == 1 else And(parts))
    assert both == brute_force(db, QueryAst(tuple(sorted(q1.attrs)), tuple(sorted(q1.tables)), where))[0]


@given(tiny_dbs(), tiny_queries(conjunctive=True, inequality=True))
def test_conjunctive_roundtrip_same_result(db, q):
    cq = to_conjunctive(q, db.schema)
    assert execute_general(db, cq.to_ast()) == execute_general(db, q)
