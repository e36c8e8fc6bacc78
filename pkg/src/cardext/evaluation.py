"""q-error evaluation, percentile summaries and report rendering.

Percentiles use the nearest-rank rule: the p-th percentile of n sorted values
is the value at 1-based rank ceil(p/100 * n). Cardinalities are floored at 1
and uniqueness rates at 1e-4 before q-errors are taken.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields

from .errors import CapabilityError, UnsupportedQuery
from .estimators import PunqExtended
from .gencrd import gen_crd
from .punq import EPS, q_error
from .query import is_conjunctive, to_conjunctive

MODES = ("dup", "distinct", "general", "uniqueness")
PERCENTILES = (50, 75, 90, 95, 99)
BOX = (5, 25, 75, 95)
REPORT_VERSION = 1


@dataclass
class EvalRow:
    query_id: int
    joins: int
    dnf_size: int
    truth: float
    estimate: float
    q_error: float
    estimator_calls: int = 1
    pruned: int = 0
    time_us: float = 0.0
    sub_time_us: float = 0.0
    wrapper_us: float = 0.0


BASE_COLUMNS = ("query_id", "joins", "dnf_size", "truth", "estimate", "q_error", "estimator_calls", "pruned")
TIMING_COLUMNS = ("time_us", "sub_time_us", "wrapper_us")


def percentile(values, p: float) -> float:
    """Nearest-rank percentile (inclusive, ties kept)."""
    xs = sorted(values)
    if not xs:
        raise ValueError("percentile of an empty sequence")
    rank = max(1, math.ceil(p / 100.0 * len(xs)))
    return xs[rank - 1]


def summarize(qerrors) -> dict:
    qerrors = list(qerrors)
    if not qerrors:
        return {}
    out = {f"p{p}": percentile(qerrors, p) for p in PERCENTILES}
    out["max"] = max(qerrors)
    out["mean"] = sum(qerrors) / len(qerrors)
    out["box"] = {f"p{p}": percentile(qerrors, p) for p in BOX}
    out["n"] = len(qerrors)
    return out


@dataclass
class EvalReport:
    mode: str
    estimator: str
    rows: list = field(default_factory=list)

    def qerrors(self, joins=None, dnf_size=None) -> list:
        return [
            r.q_error
            for r in self.rows
            if (joins is None or r.joins == joins) and (dnf_size is None or r.dnf_size == dnf_size)
        ]

    def summary(self) -> dict:
        out = {"overall": summarize(self.qerrors())}
        for j in sorted({r.joins for r in self.rows}):
            out[f"joins={j}"] = summarize(self.qerrors(joins=j))
        for d in sorted({r.dnf_size for r in self.rows}):
            out[f"dnf={d}"] = summarize(self.qerrors(dnf_size=d))
        return out

    def median(self, **kw) -> float:
        return percentile(self.qerrors(**kw), 50)


class _TimedEstimator:
    """Forwards to an estimator and accumulates time spent inside it."""

    def __init__(self, inner):
        self.inner = inner
        self.capabilities = inner.capabilities
        self.schema = getattr(inner, "schema", None)
        self.elapsed = 0.0

    def estimate(self, q):
        t0 = time.perf_counter()
        try:
            return self.inner.estimate(q)
        finally:
            self.elapsed += time.perf_counter() - t0


def _check_caps(q, est, schema):
    if getattr(est, "capabilities", None) is None:
        return
    if est.capabilities.supports_inequality_join:
        return
    from .query import JoinAtom, iter_atoms

    if any(isinstance(a, JoinAtom) and not a.is_equality for a in iter_atoms(q.where)):
        raise CapabilityError(f"estimator {getattr(est, 'name', est)} cannot handle inequality joins")


def evaluate(db, queries, labels, estimator, mode: str, skip_empty: bool = True) -> EvalReport:
    """Run ``estimator`` over a labeled workload and collect q-errors.

    Modes: ``dup`` (bag estimate vs bag count), ``distinct`` (set estimate vs
    distinct count), ``general`` (GenCrd over the estimator vs bag count),
    ``uniqueness`` (``estimator.predict`` vs the uniqueness rate).
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    schema = db.schema if db is not None else getattr(estimator, "schema", None)
    name = getattr(estimator, "name", type(estimator).__name__)
    report = EvalReport(mode, name)
    for qid, (q, lab) in enumerate(zip(queries, labels)):
        if skip_empty and lab.empty:
            continue
        _check_caps(q, estimator, schema)
        calls, pruned, sub, wrap = 1, 0, 0.0, 0.0
        if mode == "general":
            timed = _TimedEstimator(estimator)
            t0 = time.perf_counter()
            res = gen_crd(q, timed, schema=schema)
            total = time.perf_counter() - t0
            est, truth = res.estimate, lab.card_dup
            calls, pruned = res.stats.estimator_calls, res.stats.pruned_by_implyfalse
            sub, wrap = timed.elapsed, total - timed.elapsed
        else:
            if not is_conjunctive(q.where):
                raise UnsupportedQuery(f"query {qid} is not conjunctive; use mode 'general'")
            cq = to_conjunctive(q, schema)
            t0 = time.perf_counter()
            if mode == "uniqueness":
                est, truth = estimator.predict(cq), lab.uniqueness
                sub = time.perf_counter() - t0
            elif mode == "distinct" and isinstance(estimator, PunqExtended):
                c = estimator.base.estimate(cq)
                t1 = time.perf_counter()
                u = estimator.model.predict(cq)
                t2 = time.perf_counter()
                est, truth = u * c, lab.card_distinct
                sub, wrap = t1 - t0, t2 - t1
            else:
                est = estimator.estimate(cq)
                truth = lab.card_distinct if mode == "distinct" else lab.card_dup
                sub = time.perf_counter() - t0
        floor = EPS if mode == "uniqueness" else 1.0
        qe = q_error(max(float(truth), floor), max(float(est), floor))
        report.rows.append(
            EvalRow(
                query_id=qid,
                joins=lab.joins,
                dnf_size=lab.dnf_size,
                truth=float(truth),
                estimate=float(est),
                q_error=qe,
                estimator_calls=calls,
                pruned=pruned,
                time_us=(sub + wrap) * 1e6,
                sub_time_us=sub * 1e6,
                wrapper_us=wrap * 1e6,
            )
        )
    return report


# --------------------------------------------------------------------------
# rendering


def _columns(include_timing: bool) -> tuple:
    return BASE_COLUMNS + (TIMING_COLUMNS if include_timing else ())


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def render_report(report: EvalReport, fmt: str = "table", include_timing: bool = False) -> bytes:
    """Deterministic bytes for a report. Timing columns are opt-in."""
    cols = _columns(include_timing)
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c)) for c in cols])
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        doc = {
            "version": REPORT_VERSION,
            "mode": report.mode,
            "estimator": report.estimator,
            "columns": list(cols),
            "rows": [{c: getattr(r, c) for c in cols} for r in report.rows],
            "summary": report.summary() if report.rows else {},
        }
        return (json.dumps(doc, indent=1, sort_keys=True) + "\n").encode("utf-8")
    if fmt == "table":
        head = ["group"] + [f"{p}th" for p in PERCENTILES] + ["max", "mean", "n"]
        lines = [f"# mode={report.mode} estimator={report.estimator}", "  ".join(f"{h:>10}" for h in head)]
        if report.rows:
            for group, s in report.summary().items():
                vals = [s[f"p{p}"] for p in PERCENTILES] + [s["max"], s["mean"]]
                cells = [f"{group:>10}"] + [f"{v:>10.3f}" for v in vals] + [f"{s['n']:>10d}"]
                lines.append("  ".join(cells))
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


_FIELD_TYPES = {f.name: f.type for f in fields(EvalRow)}


def _coerce(name, value):
    kind = _FIELD_TYPES[name]
    return int(value) if kind == "int" else float(value)


def report_from_csv(data: bytes, mode: str = "", estimator: str = "") -> EvalReport:
    reader = csv.DictReader(io.StringIO(data.decode("utf-8")))
    rows = [EvalRow(**{k: _coerce(k, v) for k, v in rec.items()}) for rec in reader]
    return EvalReport(mode, estimator, rows)


def report_from_json(data: bytes) -> EvalReport:
    doc = json.loads(data.decode("utf-8"))
    rows = [EvalRow(**{k: _coerce(k, v) for k, v in rec.items()}) for rec in doc["rows"]]
    return EvalReport(doc["mode"], doc["estimator"], rows)


def rows_as_dicts(report: EvalReport, include_timing: bool = False) -> list:
    cols = _columns(include_timing)
    return [{c: v for c, v in asdict(r).items() if c in cols} for r in report.rows]
