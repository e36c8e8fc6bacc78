"""Command-line entry point: ``cardext <command> [options]``.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import datagen, estimators, evaluation, punq
from .errors import CardExtError
from .gencrd import gen_crd
from .parser import parse, read_workload, write_workload
from .query import is_conjunctive, to_conjunctive
from .store import Database, Schema

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_common(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=d if suppress else 0)
    p.add_argument("--schema", default=d if suppress else None, help="schema JSON file")
    p.add_argument("--db", default=d if suppress else None, help="database directory")
    p.add_argument("--out", default=d if suppress else None, help="output path")
    p.add_argument("--format", choices=("csv", "json", "table"), default=d if suppress else "table")


def _joins_arg(text: str) -> tuple:
    try:
        pairs = []
        for part in text.split(","):
            j, n = part.split(":")
            pairs.append((int(j), int(n)))
        return tuple(pairs)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected JOINS:COUNT[,JOINS:COUNT...], got {text!r}")


def _ints_arg(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="cardext", description="Cardinality estimation for general queries.")
    _add_common(ap, suppress=False)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen-db", help="generate a synthetic database")
    _add_common(p, suppress=True)
    p.add_argument("--scale", type=float, default=1.0)

    p = sub.add_parser("gen-workload", help="generate a query workload file")
    _add_common(p, suppress=True)
    p.add_argument("--joins", type=_joins_arg, default=((0, 150), (1, 150), (2, 150)))
    p.add_argument("--dnf-sizes", type=_ints_arg, default=None)
    p.add_argument("--max-preds", type=int, default=2)
    p.add_argument("--max-select", type=int, default=3)
    p.add_argument("--distinct-fraction", type=float, default=0.0)
    p.add_argument("--nonempty", action="store_true", help="keep only queries with non-empty results")

    p = sub.add_parser("label", help="compute true cardinalities for a workload")
    _add_common(p, suppress=True)
    p.add_argument("--workload", required=True)

    p = sub.add_parser("train-punq", help="train a uniqueness-rate model")
    _add_common(p, suppress=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--hidden", type=int, default=512)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--variant", choices=("standard", "revised"), default="standard")

    est_kw = dict(choices=("oracle", "histogram", "sampling"), default="histogram")

    p = sub.add_parser("estimate", help="estimate one query")
    _add_common(p, suppress=True)
    p.add_argument("query")
    p.add_argument("--estimator", **est_kw)
    p.add_argument("--mode", choices=("dup", "distinct", "general"), default="general")
    p.add_argument("--model", default=None, help="model file, or 'exact' for the executor-backed stand-in")
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--buckets", type=int, default=100)

    p = sub.add_parser("eval", help="evaluate an estimator on a labeled workload")
    _add_common(p, suppress=True)
    p.add_argument("--workload", required=True)
    p.add_argument("--labels", default=None)
    p.add_argument("--estimator", **est_kw)
    p.add_argument("--mode", choices=evaluation.MODES, default="general")
    p.add_argument("--model", default=None)
    p.add_argument("--rate", type=float, default=0.1)
    p.add_argument("--buckets", type=int, default=100)
    p.add_argument("--timing", action="store_true", help="include timing columns (not deterministic)")
    p.add_argument("--keep-empty", action="store_true")
    return ap


# --------------------------------------------------------------------------
# helpers


def _need(args, name: str):
    v = getattr(args, name)
    if v is None:
        raise UsageError(f"cardext {args.command}: error: --{name} is required")
    return v


def _schema(args) -> Schema:
    if args.schema:
        return Schema.load(args.schema)
    if args.db:
        return Schema.load(Path(args.db) / "schema.json")
    raise UsageError(f"cardext {args.command}: error: --schema or --db is required")


def _db(args) -> Database:
    return Database.load(_need(args, "db"), Schema.load(args.schema) if args.schema else None)


def _labels_path(args) -> Path:
    return Path(args.labels) if args.labels else Path(args.workload + ".labels.json")


def _emit(args, data: bytes) -> None:
    if args.out:
        Path(args.out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _estimator(args, db: Database):
    if args.estimator == "oracle":
        return estimators.oracle_estimator(db)
    if args.estimator == "sampling":
        return estimators.sampling_estimator(db, args.rate, args.seed)
    return estimators.histogram_estimator(db, args.buckets)


def _model(args, db: Database):
    if args.model is None:
        raise UsageError(f"cardext {args.command}: error: --model is required for this mode")
    if args.model == "exact":
        return estimators.ExactUniqueness(db)
    return punq.load(args.model)


# --------------------------------------------------------------------------
# commands


def cmd_gen_db(args) -> None:
    out = _need(args, "out")
    db, schema = datagen.gen_db(datagen.default_db_config(args.seed, args.scale))
    db.save(out)
    print(f"wrote {len(schema.tables)} tables to {out}", file=sys.stderr)


def cmd_gen_workload(args) -> None:
    out = _need(args, "out")
    spec = datagen.WorkloadSpec(
        joins=args.joins,
        max_preds=args.max_preds,
        max_select=args.max_select,
        dnf_sizes=args.dnf_sizes,
        distinct_fraction=args.distinct_fraction,
        seed=args.seed,
    )
    if args.nonempty:
        queries = datagen.gen_labeled(_db(args), spec).queries
    else:
        queries = datagen.gen_workload(_schema(args), spec)
    write_workload(out, queries, header=f"seed={args.seed} joins={args.joins} dnf_sizes={args.dnf_sizes}")
    print(f"wrote {len(queries)} queries to {out}", file=sys.stderr)


def cmd_label(args) -> None:
    db = _db(args)
    queries = read_workload(args.workload, db.schema)
    out = args.out or args.workload + ".labels.json"
    datagen.write_labels(out, datagen.label_workload(db, queries))
    print(f"wrote {len(queries)} labels to {out}", file=sys.stderr)


def cmd_train_punq(args) -> None:
    out = _need(args, "out")
    db = _db(args)
    queries = read_workload(args.workload, db.schema)
    labels = datagen.read_labels(_labels_path(args))
    samples = datagen.training_samples(queries, labels, db.schema)
    layout = punq.FeatLayout.from_database(db, args.variant)
    cfg = punq.TrainConfig(
        batch_size=args.batch_size,
        hidden=args.hidden,
        lr=args.lr,
        max_epochs=args.epochs,
        patience=args.patience,
        seed=args.seed,
    )

    def progress(e):
        print(f"epoch {e['epoch']:3d} loss {e['train_loss']:.4f} val mean {e['val_mean']:.4f}", file=sys.stderr)

    model, log = punq.train(samples, layout, cfg, progress)
    punq.save(model, out)
    Path(out + ".log.json").write_text(json.dumps(log.to_dict(), indent=1) + "\n", encoding="utf-8")
    print(f"best epoch {log.best_epoch} val mean q-error {log.best_val:.4f}", file=sys.stderr)


def cmd_estimate(args) -> None:
    db = _db(args)
    q = parse(args.query, db.schema)
    est = _estimator(args, db)
    if args.mode == "distinct":
        est = estimators.punq_extended(est, _model(args, db))
    if args.mode == "general" or not is_conjunctive(q.where):
        res = gen_crd(q, est, schema=db.schema)
        value, stats = res.estimate, res.stats
        info = {"estimate": float(value), "estimator_calls": stats.estimator_calls, "pruned": stats.pruned_by_implyfalse}
    else:
        info = {"estimate": float(est.estimate(to_conjunctive(q, db.schema)))}
    if args.format == "json":
        _emit(args, (json.dumps(info, sort_keys=True) + "\n").encode("utf-8"))
    elif args.format == "csv":
        keys = sorted(info)
        _emit(args, (",".join(keys) + "\n" + ",".join(repr(info[k]) for k in keys) + "\n").encode("utf-8"))
    else:
        _emit(args, (" ".join(f"{k}={info[k]!r}" for k in sorted(info)) + "\n").encode("utf-8"))


def cmd_eval(args) -> None:
    db = _db(args)
    queries = read_workload(args.workload, db.schema)
    labels = datagen.read_labels(_labels_path(args))
    if len(labels) != len(queries):
        raise CardExtError(f"{len(queries)} queries but {len(labels)} labels")
    if args.mode == "uniqueness":
        est = _model(args, db)
    else:
        est = _estimator(args, db)
        if args.mode == "distinct":
            est = estimators.punq_extended(est, _model(args, db))
    report = evaluation.evaluate(db, queries, labels, est, args.mode, skip_empty=not args.keep_empty)
    _emit(args, evaluation.render_report(report, args.format, include_timing=args.timing))


COMMANDS = {
    "gen-db": cmd_gen_db,
    "gen-workload": cmd_gen_workload,
    "label": cmd_label,
    "train-punq": cmd_train_punq,
    "estimate": cmd_estimate,
    "eval": cmd_eval,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    except (CardExtError, OSError, ValueError) as e:
        print(f"cardext: error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
