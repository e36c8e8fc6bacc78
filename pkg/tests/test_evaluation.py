import json
from pathlib import Path

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cardext import datagen
from cardext.errors import CapabilityError, UnsupportedQuery
from cardext.estimators import histogram_estimator, oracle_estimator, punq_extended
from cardext.evaluation import (
    BASE_COLUMNS,
    EvalReport,
    EvalRow,
    evaluate,
    percentile,
    render_report,
    report_from_csv,
    report_from_json,
    rows_as_dicts,
    summarize,
)
from cardext.gencrd import call_bound
from cardext.parser import parse
from cardext.punq import FeatLayout, PunqModel, init_params

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(scope="module")
def labeled(small_synth):
    spec = datagen.WorkloadSpec(joins=((0, 20), (1, 20), (2, 20)), dnf_sizes=(1, 2, 3), seed=21)
    return datagen.gen_labeled(small_synth, spec)


@pytest.fixture(scope="module")
def conj_labeled(small_synth):
    spec = datagen.WorkloadSpec(joins=((0, 20), (1, 20), (2, 20)), distinct_fraction=0.5, seed=22)
    return datagen.gen_labeled(small_synth, spec)


def fixture_report():
    rows = [
        EvalRow(0, 0, 1, 10.0, 5.0, 2.0),
        EvalRow(1, 0, 2, 4.0, 4.0, 1.0, 3, 0),
        EvalRow(2, 1, 1, 100.0, 400.0, 4.0),
        EvalRow(3, 1, 3, 7.0, 0.5, 7.0, 5, 2),
        EvalRow(4, 2, 2, 1.0, 1.5, 1.5, 3, 0),
    ]
    return EvalReport("general", "fixture", rows)


def test_percentile_nearest_rank():
    xs = [10, 1, 9, 2, 8, 3, 7, 4, 6, 5]
    assert percentile(xs, 50) == 5
    assert percentile(xs, 75) == 8
    assert percentile(xs, 90) == 9
    assert percentile(xs, 95) == 10
    assert percentile(xs, 99) == 10
    assert percentile(xs, 0) == 1
    assert percentile([3.5], 50) == 3.5
    with pytest.raises(ValueError):
        percentile([], 50)


@given(st.lists(st.floats(1, 1e6), min_size=1, max_size=50))
def test_percentiles_are_members_and_monotone(xs):
    s = summarize(xs)
    ps = [s[f"p{p}"] for p in (50, 75, 90, 95, 99)]
    assert all(p in xs for p in ps)
    assert ps == sorted(ps) and ps[-1] <= s["max"] == max(xs)
    assert s["n"] == len(xs)


def test_oracle_qerrors_are_one(small_synth, labeled, conj_labeled):
    rep = evaluate(small_synth, labeled.queries, labeled.labels, oracle_estimator(small_synth), "general")
    assert len(rep.rows) == 60
    assert set(rep.qerrors()) == {1.0}
    rep = evaluate(small_synth, conj_labeled.queries, conj_labeled.labels, oracle_estimator(small_synth), "dup")
    assert set(rep.qerrors()) == {1.0}


def test_general_calls_within_bound(small_synth, labeled):
    rep = evaluate(small_synth, labeled.queries, labeled.labels, histogram_estimator(small_synth), "general")
    for r in rep.rows:
        assert r.estimator_calls + r.pruned <= call_bound(r.dnf_size)
        assert r.estimator_calls >= 1


def test_grouping(small_synth, labeled):
    rep = evaluate(small_synth, labeled.queries, labeled.labels, histogram_estimator(small_synth), "general")
    summary = rep.summary()
    assert {"overall", "joins=0", "joins=1", "joins=2", "dnf=1", "dnf=2", "dnf=3"} <= summary.keys()
    assert summary["joins=1"]["n"] == 20
    assert sum(summary[f"dnf={d}"]["n"] for d in (1, 2, 3)) == 60
    assert rep.median(joins=2) == percentile(rep.qerrors(joins=2), 50)


def test_empty_results_skipped_unless_kept(toy_db):
    qs = [parse("SELECT R.a FROM R WHERE R.a > 5"), parse("SELECT R.a FROM R")]
    labels = datagen.label_workload(toy_db, qs)
    est = oracle_estimator(toy_db)
    assert len(evaluate(toy_db, qs, labels, est, "dup").rows) == 1
    kept = evaluate(toy_db, qs, labels, est, "dup", skip_empty=False)
    # truth and estimate are both floored at 1
    assert [r.q_error for r in kept.rows] == [1.0, 1.0]


def test_conjunctive_modes_reject_disjunctions(small_synth, labeled):
    with pytest.raises(UnsupportedQuery):
        evaluate(small_synth, labeled.queries, labeled.labels, oracle_estimator(small_synth), "dup")
    with pytest.raises(ValueError):
        evaluate(small_synth, [], [], oracle_estimator(small_synth), "bogus")


def test_capability_error(toy_db):
    qs = [parse("SELECT R.a FROM R, S WHERE R.a < S.c")]
    labels = datagen.label_workload(toy_db, qs)
    with pytest.raises(CapabilityError):
        evaluate(toy_db, qs, labels, histogram_estimator(toy_db), "dup")
    assert evaluate(toy_db, qs, labels, oracle_estimator(toy_db), "dup").rows[0].q_error == 1


def _model(db, hidden=16):
    layout = FeatLayout.from_database(db)
    return PunqModel(layout, hidden, init_params(layout.length, hidden, seed=4))


def test_uniqueness_and_distinct_modes(small_synth, conj_labeled):
    model = _model(small_synth)
    rep = evaluate(small_synth, conj_labeled.queries, conj_labeled.labels, model, "uniqueness")
    for r, lab in zip(rep.rows, conj_labeled.labels):
        assert r.truth == lab.uniqueness
        assert 0 < r.estimate <= 1 and r.q_error >= 1
    est = punq_extended(oracle_estimator(small_synth), model)
    dist = evaluate(small_synth, conj_labeled.queries, conj_labeled.labels, est, "distinct")
    # with exact C the distinct q-error equals the uniqueness q-error unless the floor clamps
    checked = 0
    for r, u in zip(dist.rows, rep.rows):
        if r.estimate >= 1 and u.estimate >= 1e-4:
            assert r.q_error == pytest.approx(u.q_error, rel=1e-9)
            checked += 1
    assert checked > len(dist.rows) // 2


def test_wrapper_overhead_below_base_time(small_synth):
    spec = datagen.WorkloadSpec(joins=((1, 40), (2, 40)), seed=23)
    data = datagen.gen_labeled(small_synth, spec)
    est = punq_extended(oracle_estimator(small_synth), _model(small_synth, hidden=64))
    rep = evaluate(small_synth, data.queries, data.labels, est, "distinct")
    sub = sum(r.sub_time_us for r in rep.rows)
    wrap = sum(r.wrapper_us for r in rep.rows)
    assert 0 < wrap < sub


def test_csv_json_round_trip(small_synth, labeled):
    rep = evaluate(small_synth, labeled.queries, labeled.labels, histogram_estimator(small_synth), "general")
    for timing in (False, True):
        back_csv = report_from_csv(render_report(rep, "csv", timing), rep.mode, rep.estimator)
        back_json = report_from_json(render_report(rep, "json", timing))
        assert rows_as_dicts(back_csv, timing) == rows_as_dicts(rep, timing) == rows_as_dicts(back_json, timing)
        assert render_report(back_json, "csv", timing) == render_report(rep, "csv", timing)


def test_empty_report_renders_header_only():
    rep = EvalReport("dup", "none")
    assert render_report(rep, "csv") == (",".join(BASE_COLUMNS) + "\n").encode()
    doc = json.loads(render_report(rep, "json"))
    assert doc["rows"] == [] and doc["summary"] == {} and doc["columns"] == list(BASE_COLUMNS)
    assert len(render_report(rep, "table").splitlines()) == 2
    with pytest.raises(ValueError):
        render_report(rep, "xml")


def test_timing_columns_opt_in():
    rep = fixture_report()
    assert b"time_us" not in render_report(rep, "csv")
    assert b"time_us" in render_report(rep, "csv", include_timing=True)


@pytest.mark.parametrize("fmt,name", [("csv", "report.csv"), ("table", "report.txt"), ("json", "report.json")])
def test_golden_files(fmt, name):
    assert render_report(fixture_report(), fmt) == (GOLDEN / name).read_bytes()
