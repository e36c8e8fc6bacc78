"""Compare conjunctive-only estimators with their GenCrd extension.

For each estimator M, prints the median/percentile q-errors of M on a
conjunctive workload next to GenCrd(M) on a general workload with the same
join distribution, broken down by DNF size, plus the estimator call counts.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

from cardext import datagen
from cardext.estimators import histogram_estimator, oracle_estimator, sampling_estimator
from cardext.evaluation import evaluate, render_report


@dataclass(frozen=True)
class Config:
    seed: int = 1
    scale: float = 1.0
    per_join: int = 150
    max_joins: int = 2
    dnf_sizes: tuple = (1, 2, 3, 4, 5)
    sample_rate: float = 0.1


def run(cfg: Config) -> None:
    db, _ = datagen.gen_db(datagen.default_db_config(cfg.seed, cfg.scale))
    joins = tuple((j, cfg.per_join) for j in range(cfg.max_joins + 1))
    general = datagen.gen_labeled(db, datagen.WorkloadSpec(joins=joins, dnf_sizes=cfg.dnf_sizes, seed=cfg.seed))
    conj = datagen.gen_labeled(db, datagen.WorkloadSpec(joins=joins, seed=cfg.seed))
    estimators = {
        "oracle": oracle_estimator(db),
        "histogram": histogram_estimator(db),
        "sampling": sampling_estimator(db, cfg.sample_rate, cfg.seed),
    }
    for name, est in estimators.items():
        t0 = time.perf_counter()
        g = evaluate(db, general.queries, general.labels, est, "general")
        c = evaluate(db, conj.queries, conj.labels, est, "dup")
        secs = time.perf_counter() - t0
        calls = sum(r.estimator_calls for r in g.rows)
        pruned = sum(r.pruned for r in g.rows)
        print(f"== {name}: conjunctive median {c.median():.3f}, general median {g.median():.3f} ({secs:.1f}s)")
        print(f"   estimator calls {calls}, pruned by contradiction check {pruned}")
        print(render_report(g, "table").decode())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--scale", type=float, default=Config.scale)
    ap.add_argument("--per-join", type=int, default=Config.per_join)
    ap.add_argument("--max-joins", type=int, default=Config.max_joins)
    args = ap.parse_args()
    run(Config(seed=args.seed, scale=args.scale, per_join=args.per_join, max_joins=args.max_joins))


if __name__ == "__main__":
    main()
