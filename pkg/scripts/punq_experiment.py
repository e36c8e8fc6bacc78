"""Train a uniqueness-rate model and evaluate it against join count.

Trains on conjunctive queries with 0-2 joins, then reports uniqueness
q-errors on 0-5 joins and the distinct-count q-errors of M versus PUNQ(M)
for the histogram and sampling estimators.
"""

from __future__ import annotations

import argparse
import time
from dataclasses import dataclass

from cardext import datagen, punq
from cardext.estimators import histogram_estimator, punq_extended, sampling_estimator
from cardext.evaluation import evaluate, render_report


@dataclass(frozen=True)
class Config:
    seed: int = 1
    scale: float = 1.0
    train_queries: int = 5000
    test_per_join: int = 200
    hidden: int = 512
    epochs: int = 200
    out: str | None = None


def run(cfg: Config) -> None:
    db, _ = datagen.gen_db(datagen.default_db_config(cfg.seed, cfg.scale))
    n = cfg.train_queries
    train_spec = datagen.WorkloadSpec(joins=((0, n - 2 * (n // 3)), (1, n // 3), (2, n // 3)), seed=cfg.seed)
    data = datagen.gen_labeled(db, train_spec)
    samples = datagen.training_samples(data.queries, data.labels, db.schema)

    t0 = time.perf_counter()
    model, log = punq.train(
        samples,
        punq.FeatLayout.from_database(db),
        punq.TrainConfig(hidden=cfg.hidden, max_epochs=cfg.epochs, seed=cfg.seed),
        progress=lambda e: print(f"epoch {e['epoch']:3d} val mean {e['val_mean']:.3f} median {e['val_median']:.3f}"),
    )
    best = log.epochs[log.best_epoch]
    print(f"trained in {time.perf_counter() - t0:.0f}s, best epoch {log.best_epoch}: {best}")
    if cfg.out:
        punq.save(model, cfg.out)

    test_spec = datagen.WorkloadSpec(joins=tuple((j, cfg.test_per_join) for j in range(6)), seed=cfg.seed + 1)
    test = datagen.gen_labeled(db, test_spec)
    print(render_report(evaluate(db, test.queries, test.labels, model, "uniqueness"), "table").decode())
    for name, base in (("histogram", histogram_estimator(db)), ("sampling", sampling_estimator(db, 0.1, cfg.seed))):
        plain = evaluate(db, test.queries, test.labels, base, "distinct")
        wrapped = evaluate(db, test.queries, test.labels, punq_extended(base, model), "distinct")
        print(f"== distinct counts, {name}: M median {plain.median():.3f}, PUNQ(M) median {wrapped.median():.3f}")
        print(render_report(wrapped, "table").decode())


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=Config.seed)
    ap.add_argument("--scale", type=float, default=Config.scale)
    ap.add_argument("--train-queries", type=int, default=Config.train_queries)
    ap.add_argument("--hidden", type=int, default=Config.hidden)
    ap.add_argument("--epochs", type=int, default=Config.epochs)
    ap.add_argument("--out", default=None, help="save the trained model here")
    args = ap.parse_args()
    run(Config(args.seed, args.scale, args.train_queries, Config.test_per_join, args.hidden, args.epochs, args.out))


if __name__ == "__main__":
    main()
