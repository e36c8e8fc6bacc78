"""Conjunctive-only ("limited") cardinality estimators and the U*C wrapper."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import CapabilityError, EstimatorError
from .query import ConjunctiveQuery
from .store import Database, execute


@dataclass(frozen=True)
class Capabilities:
    supports_inequality_join: bool = False
    thread_safe: bool = True


class Estimator:
    """Base class: ``estimate`` maps a conjunctive query to a bag count >= 0."""

    capabilities = Capabilities()
    name = "estimator"

    def estimate(self, q: ConjunctiveQuery) -> float:
        raise NotImplementedError

    def __call__(self, q):
        return self.estimate(q)


class OracleEstimator(Estimator):
    """Exact bag count from the executor."""

    name = "oracle"
    capabilities = Capabilities(supports_inequality_join=True, thread_safe=True)

    def __init__(self, db: Database):
        self.db = db
        self.schema = db.schema

    def estimate(self, q):
        return execute(self.db, q).card_dup


class SamplingEstimator(Estimator):
    """Bernoulli-sample every base table once, join the samples exactly and
    scale by 1/rate per table in the query."""

    name = "sampling"
    capabilities = Capabilities(supports_inequality_join=True, thread_safe=True)

    def __init__(self, db: Database, rate: float = 0.1, seed: int = 0):
        if not 0 < rate <= 1:
            raise ValueError("rate must be in (0, 1]")
        self.db = db
        self.schema = db.schema
        self.rate = rate
        self.seed = seed
        sampled = {}
        for name, mask in sample_masks(db, rate, seed).items():
            t = db.tables[name]
            sampled[name] = {c: a[mask] for c, a in t.columns.items()}
        self.sample_db = Database(db.schema, sampled)

    def estimate(self, q):
        hits = execute(self.sample_db, q).card_dup
        return hits / self.rate ** len(q.tables)


def sample_masks(db: Database, rate: float, seed: int) -> dict:
    """Per-table keep masks; table i uses the seed sequence (seed, i)."""
    masks = {}
    for i, tdef in enumerate(db.schema.tables):
        rng = np.random.default_rng([seed, i])
        n = db.tables[tdef.name].row_count
        masks[tdef.name] = np.ones(n, dtype=bool) if rate >= 1 else rng.random(n) < rate
    return masks


@dataclass(frozen=True)
class ColumnHistogram:
    """Equi-width histogram over the integer domain [min, max]."""

    lows: np.ndarray  # first integer value of each bucket
    highs: np.ndarray  # last integer value of each bucket (inclusive)
    counts: np.ndarray
    distinct: np.ndarray  # distinct values inside each bucket
    distinct_total: int
    rows: int

    @classmethod
    def build(cls, values: np.ndarray, buckets: int) -> "ColumnHistogram":
        n = len(values)
        if n == 0:
            empty = np.zeros(0, dtype=np.int64)
            return cls(empty, empty, empty, empty, 0, 0)
        lo, hi = int(values.min()), int(values.max())
        span = hi - lo + 1
        b = max(1, min(buckets, span))
        edges = lo + (np.arange(b + 1) * span) // b
        lows = edges[:-1]
        highs = edges[1:] - 1
        idx = np.searchsorted(edges, values, side="right") - 1
        counts = np.bincount(idx, minlength=b).astype(np.int64)
        uniq = np.unique(values)
        uidx = np.searchsorted(edges, uniq, side="right") - 1
        distinct = np.bincount(uidx, minlength=b).astype(np.int64)
        return cls(lows, highs, counts, distinct, len(uniq), n)

    def selectivity(self, op: str, v: int) -> float:
        """Fraction of rows with ``value op v``.

        Inside the bucket holding ``v``, the equality share is count/distinct
        and the rest is split between "<" and ">" by the position of ``v`` in
        the bucket, so the three operators always sum to 1.
        """
        if op not in ("<", "=", ">"):
            raise EstimatorError(f"unknown operator {op!r}")
        if self.rows == 0:
            return 0.0
        lo, hi = int(self.lows[0]), int(self.highs[-1])
        if v < lo or v > hi:
            if op == "=":
                return 0.0
            return 1.0 if (op == "<") == (v > hi) else 0.0
        i = int(np.searchsorted(self.highs, v, side="left"))
        count = float(self.counts[i])
        eq = count / float(self.distinct[i]) if self.distinct[i] else 0.0
        if op == "=":
            return eq / self.rows
        rest = count - eq
        span = int(self.highs[i] - self.lows[i])
        if op == "<":
            part = (v - self.lows[i]) / span if span else 0.0
            return (float(self.counts[:i].sum()) + part * rest) / self.rows
        part = (self.highs[i] - v) / span if span else 0.0
        return (float(self.counts[i + 1 :].sum()) + part * rest) / self.rows


class HistogramEstimator(Estimator):
    """Attribute-value independence with per-column equi-width histograms."""

    name = "histogram"
    capabilities = Capabilities(supports_inequality_join=False, thread_safe=True)

    def __init__(self, db: Database, buckets: int = 100):
        if buckets < 1:
            raise ValueError("buckets must be >= 1")
        self.schema = db.schema
        self.buckets = buckets
        self.rows = {name: t.row_count for name, t in db.tables.items()}
        self.hists = {}
        for name, t in db.tables.items():
            for cname, values in t.columns.items():
                self.hists[(name, cname)] = ColumnHistogram.build(values, buckets)

    def hist(self, ref) -> ColumnHistogram:
        return self.hists[(ref.table, ref.column)]

    def estimate(self, q):
        est = 1.0
        for t in sorted(q.tables):
            est *= self.rows[t]
        for j in sorted(q.joins):
            if not j.is_equality:
                raise CapabilityError("histogram estimator supports equality joins only")
            d = max(self.hist(j.left).distinct_total, self.hist(j.right).distinct_total)
            est *= 1.0 / d if d else 0.0
        for p in sorted(q.preds):
            est *= self.hist(p.col).selectivity(p.op, p.value)
        return est


class ExactUniqueness:
    """Uniqueness-rate stand-in computed by the executor, as an exact fraction."""

    capabilities = Capabilities(supports_inequality_join=True, thread_safe=True)

    def __init__(self, db: Database):
        self.db = db

    def predict(self, q) -> Fraction:
        r = execute(self.db, q)
        return Fraction(r.card_distinct, r.card_dup) if r.card_dup else Fraction(0)


class ConstantUniqueness:
    capabilities = Capabilities(supports_inequality_join=True, thread_safe=True)

    def __init__(self, value=1):
        self.value = value

    def predict(self, q):
        return self.value


class PunqExtended(Estimator):
    """Set-theoretic estimate U * C from a uniqueness model and a bag estimator."""

    name = "punq"

    def __init__(self, base: Estimator, model):
        self.base = base
        self.model = model
        self.schema = getattr(base, "schema", None)
        mcaps = getattr(model, "capabilities", Capabilities(False, True))
        self.capabilities = Capabilities(
            supports_inequality_join=base.capabilities.supports_inequality_join
            and mcaps.supports_inequality_join,
            thread_safe=base.capabilities.thread_safe and mcaps.thread_safe,
        )

    def estimate(self, q):
        return self.model.predict(q) * self.base.estimate(q)


def oracle_estimator(db: Database) -> OracleEstimator:
    return OracleEstimator(db)


def sampling_estimator(db: Database, rate: float = 0.1, seed: int = 0) -> SamplingEstimator:
    return SamplingEstimator(db, rate, seed)


def histogram_estimator(db: Database, buckets: int = 100) -> HistogramEstimator:
    return HistogramEstimator(db, buckets)


def punq_extended(m: Estimator, model) -> PunqExtended:
    return PunqExtended(m, model)
