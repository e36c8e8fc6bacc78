"""Uniqueness-rate model: set featurization, mean-pooled MLP, q-error training.

A query is turned into a set of fixed-length vectors (one per SELECT
attribute, table, join and predicate). Each vector goes through a one-layer
ReLU network, the outputs are averaged, and a two-layer head with a sigmoid
output predicts the fraction of result rows that are distinct.

Everything is plain numpy with hand-written gradients.
"""

from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DimMismatch,
    DomainError,
    EmptyDataset,
    FeaturizationError,
    ModelIOError,
    NonFiniteLoss,
    VersionMismatch,
)
from .estimators import Capabilities
from .query import ColumnRef, ConjunctiveQuery

OPERATORS = ("<", "=", ">")
OP_INDEX = {op: i for i, op in enumerate(OPERATORS)}
PARAM_NAMES = ("U_mid", "b_mid", "U_out1", "b_out1", "U_out2", "b_out2")
FORMAT_NAME = "punq-model"
FORMAT_VERSION = 1
EPS = 1e-4


def q_error(y: float, yhat: float) -> float:
    if y <= 0 or yhat <= 0:
        raise DomainError(f"q-error needs positive inputs, got y={y}, yhat={yhat}")
    return yhat / y if yhat > y else y / yhat


# --------------------------------------------------------------------------
# featurization


@dataclass(frozen=True)
class FeatLayout:
    """Segment layout of the per-element vectors.

    standard: A | T | J1 | J2 | C | O | V
    revised:  A | T | J1 | JO | J2 | C | O | V   (JO one-hot encodes the join operator)
    """

    tables: tuple
    columns: tuple
    col_min: tuple
    col_max: tuple
    variant: str = "standard"
    n_ops: int = len(OPERATORS)

    def __post_init__(self):
        if self.variant not in ("standard", "revised"):
            raise FeaturizationError(f"unknown layout variant {self.variant!r}")
        object.__setattr__(self, "tables", tuple(self.tables))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "col_min", tuple(int(v) for v in self.col_min))
        object.__setattr__(self, "col_max", tuple(int(v) for v in self.col_max))
        object.__setattr__(self, "_tidx", {t: i for i, t in enumerate(self.tables)})
        object.__setattr__(self, "_cidx", {c: i for i, c in enumerate(self.columns)})

    @classmethod
    def from_database(cls, db, variant: str = "standard") -> "FeatLayout":
        cols = db.schema.all_columns()
        lo, hi = [], []
        for c in cols:
            arr = db.column(c)
            lo.append(int(arr.min()) if len(arr) else 0)
            hi.append(int(arr.max()) if len(arr) else 0)
        return cls(tuple(t.name for t in db.schema.tables), tuple(cols), tuple(lo), tuple(hi), variant)

    @classmethod
    def from_schema(cls, schema, variant: str = "standard") -> "FeatLayout":
        cols = schema.all_columns()
        defs = [schema.column_def(c) for c in cols]
        return cls(
            tuple(t.name for t in schema.tables),
            tuple(cols),
            tuple(d.min for d in defs),
            tuple(d.max for d in defs),
            variant,
        )

    @property
    def n_tables(self) -> int:
        return len(self.tables)

    @property
    def n_columns(self) -> int:
        return len(self.columns)

    @property
    def offsets(self) -> dict:
        nT, nC, nO = self.n_tables, self.n_columns, self.n_ops
        off = {"A": 0, "T": nC, "J1": nC + nT}
        pos = off["J1"] + nC
        if self.variant == "revised":
            off["JO"] = pos
            pos += nO
        off["J2"] = pos
        off["C"] = pos + nC
        off["O"] = off["C"] + nC
        off["V"] = off["O"] + nO
        return off

    @property
    def length(self) -> int:
        return self.offsets["V"] + 1

    def table_index(self, t: str) -> int:
        try:
            return self._tidx[t]
        except KeyError:
            raise FeaturizationError(f"unknown table {t}") from None

    def column_index(self, c: ColumnRef) -> int:
        try:
            return self._cidx[c]
        except KeyError:
            raise FeaturizationError(f"unknown column {c}") from None

    def normalize(self, c: ColumnRef, value: int) -> float:
        i = self.column_index(c)
        lo, hi = self.col_min[i], self.col_max[i]
        if hi == lo:
            return 0.0
        return min(1.0, max(0.0, (value - lo) / (hi - lo)))

    def to_dict(self) -> dict:
        return {
            "tables": list(self.tables),
            "columns": [str(c) for c in self.columns],
            "col_min": list(self.col_min),
            "col_max": list(self.col_max),
            "variant": self.variant,
            "n_ops": self.n_ops,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatLayout":
        return cls(
            tuple(d["tables"]),
            tuple(ColumnRef.parse(c) for c in d["columns"]),
            tuple(d["col_min"]),
            tuple(d["col_max"]),
            d["variant"],
            d["n_ops"],
        )


def featurize(q: ConjunctiveQuery, layout: FeatLayout) -> np.ndarray:
    """One row per element of A, T, J and P, in sorted (canonical) order."""
    off = layout.offsets
    rows = []

    def vec():
        v = np.zeros(layout.length)
        rows.append(v)
        return v

    for a in sorted(q.attrs):
        vec()[off["A"] + layout.column_index(a)] = 1.0
    for t in sorted(q.tables):
        vec()[off["T"] + layout.table_index(t)] = 1.0
    for j in sorted(q.joins):
        if not j.is_equality and layout.variant != "revised":
            raise FeaturizationError(f"inequality join {j} needs the revised layout")
        v = vec()
        v[off["J1"] + layout.column_index(j.left)] = 1.0
        v[off["J2"] + layout.column_index(j.right)] = 1.0
        if layout.variant == "revised":
            v[off["JO"] + OP_INDEX[j.op]] = 1.0
    for p in sorted(q.preds):
        v = vec()
        v[off["C"] + layout.column_index(p.col)] = 1.0
        v[off["O"] + OP_INDEX[p.op]] = 1.0
        v[off["V"]] = layout.normalize(p.col, p.value)
    if not rows:
        raise FeaturizationError("query has no elements to featurize")
    return np.stack(rows)


# --------------------------------------------------------------------------
# model


def init_params(length: int, hidden: int, seed: int = 0) -> dict:
    """Glorot-uniform weights, zero biases."""
    if hidden < 2 or hidden % 2:
        raise ValueError("hidden size must be an even number >= 2")
    rng = np.random.default_rng(seed)
    half = hidden // 2

    def glorot(fan_in, fan_out):
        lim = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-lim, lim, size=(fan_in, fan_out))

    return {
        "U_mid": glorot(length, hidden),
        "b_mid": np.zeros(hidden),
        "U_out1": glorot(hidden, half),
        "b_out1": np.zeros(half),
        "U_out2": glorot(half, 1),
        "b_out2": np.zeros(1),
    }


@dataclass
class Batch:
    X: np.ndarray  # stacked element vectors
    starts: np.ndarray  # first row of each query
    counts: np.ndarray  # |V| of each query
    seg: np.ndarray  # query index of each row
    y: np.ndarray | None = None


def make_batch(feats: list, y=None) -> Batch:
    counts = np.array([len(f) for f in feats], dtype=np.int64)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1])).astype(np.int64)
    seg = np.repeat(np.arange(len(feats)), counts)
    return Batch(np.concatenate(feats), starts, counts, seg, None if y is None else np.asarray(y, float))


def _sigmoid(z):
    return np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))


def forward(params: dict, batch: Batch):
    pre = batch.X @ params["U_mid"] + params["b_mid"]
    h = np.maximum(pre, 0.0)
    qvec = np.add.reduceat(h, batch.starts, axis=0) / batch.counts[:, None]
    z1 = qvec @ params["U_out1"] + params["b_out1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params["U_out2"] + params["b_out2"]
    yhat = _sigmoid(z2[:, 0])
    cache = {"pre": pre, "qvec": qvec, "z1": z1, "a1": a1, "yhat": yhat}
    return yhat, cache


def batch_loss(yhat: np.ndarray, y: np.ndarray, eps: float = EPS) -> float:
    yc = np.clip(yhat, eps, 1.0)
    return float(np.mean(np.maximum(yc / y, y / yc)))


def gradients(params: dict, batch: Batch, eps: float = EPS):
    """Analytic gradients of the mean q-error over ``batch``.

    Returns (loss, grads). At yhat == y the subgradient 0 is used.
    """
    y = batch.y
    yhat, cache = forward(params, batch)
    B = len(y)
    yc = np.clip(yhat, eps, 1.0)
    loss = float(np.mean(np.maximum(yc / y, y / yc)))

    g = np.zeros(B)
    over = yc > y
    under = yc < y
    g[over] = 1.0 / y[over]
    g[under] = -y[under] / yc[under] ** 2
    g[(yhat < eps) | (yhat > 1.0)] = 0.0
    g /= B

    dz2 = (g * yhat * (1.0 - yhat))[:, None]
    a1 = cache["a1"]
    grads = {}
    grads["U_out2"] = a1.T @ dz2
    grads["b_out2"] = dz2.sum(axis=0)
    dz1 = (dz2 @ params["U_out2"].T) * (cache["z1"] > 0)
    grads["U_out1"] = cache["qvec"].T @ dz1
    grads["b_out1"] = dz1.sum(axis=0)
    dq = dz1 @ params["U_out1"].T
    dh = (dq / batch.counts[:, None])[batch.seg]
    dpre = dh * (cache["pre"] > 0)
    grads["U_mid"] = batch.X.T @ dpre
    grads["b_mid"] = dpre.sum(axis=0)
    return loss, grads


@dataclass
class PunqModel:
    layout: FeatLayout
    hidden: int
    params: dict
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        check_dims(self.layout, self.hidden, self.params)

    @property
    def capabilities(self) -> Capabilities:
        return Capabilities(supports_inequality_join=self.layout.variant == "revised", thread_safe=True)

    def predict(self, q: ConjunctiveQuery) -> float:
        return predict(self, q)

    def predict_many(self, queries) -> np.ndarray:
        feats = [featurize(q, self.layout) for q in queries]
        if not feats:
            return np.zeros(0)
        out = []
        for i in range(0, len(feats), 1024):
            yhat, _ = forward(self.params, make_batch(feats[i : i + 1024]))
            out.append(yhat)
        return np.concatenate(out)


def check_dims(layout: FeatLayout, hidden: int, params: dict) -> None:
    L, H, h2 = layout.length, hidden, hidden // 2
    want = {
        "U_mid": (L, H),
        "b_mid": (H,),
        "U_out1": (H, h2),
        "b_out1": (h2,),
        "U_out2": (h2, 1),
        "b_out2": (1,),
    }
    if hidden % 2:
        raise DimMismatch("hidden size must be even")
    for name, shape in want.items():
        if name not in params:
            raise DimMismatch(f"missing parameter block {name}")
        if params[name].shape != shape:
            raise DimMismatch(f"{name} has shape {params[name].shape}, expected {shape}")
        if not np.all(np.isfinite(params[name])):
            raise DimMismatch(f"{name} contains non-finite values")


def predict(model: PunqModel, q: ConjunctiveQuery) -> float:
    """Predicted uniqueness rate in (0, 1)."""
    yhat, _ = forward(model.params, make_batch([featurize(q, model.layout)]))
    return float(yhat[0])


# --------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class LabeledSample:
    query: ConjunctiveQuery
    uniqueness: float


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 128
    hidden: int = 512
    lr: float = 1e-3
    max_epochs: int = 200
    patience: int = 20
    seed: int = 0
    val_fraction: float = 0.2
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    clamp_eps: float = EPS


@dataclass
class TrainingLog:
    epochs: list = field(default_factory=list)  # dicts: epoch, train_loss, val_mean, val_median
    best_epoch: int = -1
    best_val: float = math.inf
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, params: dict, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for k in PARAM_NAMES:
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


def split_indices(n: int, val_fraction: float, seed: int):
    perm = np.random.default_rng([seed, 1]).permutation(n)
    n_val = int(round(n * val_fraction))
    if n - n_val < 1:
        n_val = n - 1
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _qerrors(params, feats, y, eps):
    out = []
    for i in range(0, len(feats), 1024):
        yhat, _ = forward(params, make_batch(feats[i : i + 1024]))
        yc = np.clip(yhat, eps, 1.0)
        yy = y[i : i + 1024]
        out.append(np.maximum(yc / yy, yy / yc))
    return np.concatenate(out) if out else np.zeros(0)


def train(
    data: list,
    layout: FeatLayout,
    config: TrainConfig = TrainConfig(),
    progress=None,
):
    """Fit a model on labeled samples; returns (model, log).

    80/20 train/validation split, Adam on the mean q-error, early stopping
    with the best-validation weights restored.
    """
    if not data:
        raise EmptyDataset("no training samples")
    y = np.array([s.uniqueness for s in data], dtype=float)
    if np.any(y <= 0) or np.any(y > 1):
        raise DomainError("uniqueness labels must lie in (0, 1]")
    feats = [featurize(s.query, layout) for s in data]
    tr, va = split_indices(len(data), config.val_fraction, config.seed)
    if len(va) == 0:
        va = tr
    feats_va = [feats[i] for i in va]
    y_va = y[va]

    params = init_params(layout.length, config.hidden, config.seed)
    opt = Adam(params, config.lr, config.beta1, config.beta2, config.adam_eps)
    rng = np.random.default_rng([config.seed, 2])
    log = TrainingLog()
    best = {k: v.copy() for k, v in params.items()}
    since_best = 0

    for epoch in range(config.max_epochs):
        order = tr[rng.permutation(len(tr))]
        losses = []
        for s in range(0, len(order), config.batch_size):
            idx = order[s : s + config.batch_size]
            batch = make_batch([feats[i] for i in idx], y[idx])
            loss, grads = gradients(params, batch, config.clamp_eps)
            if not math.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
                raise NonFiniteLoss(f"epoch {epoch}, batch at {s}: loss={loss}")
            opt.step(params, grads)
            losses.append(loss)
        qe = _qerrors(params, feats_va, y_va, config.clamp_eps)
        val_mean = float(np.mean(qe))
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "val_mean": val_mean,
            "val_median": float(np.median(qe)),
        }
        log.epochs.append(entry)
        if progress is not None:
            progress(entry)
        if val_mean < log.best_val:
            log.best_val = val_mean
            log.best_epoch = epoch
            best = {k: v.copy() for k, v in params.items()}
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                log.stopped_early = True
                break

    meta = {
        "epochs": len(log.epochs),
        "best_epoch": log.best_epoch,
        "best_val_mean_qerror": log.best_val,
        "seed": config.seed,
        "config": asdict(config),
        "n_samples": len(data),
    }
    return PunqModel(layout, config.hidden, best, meta), log


# --------------------------------------------------------------------------
# serialization
#
# A model file is an uncompressed numpy .npz archive holding one float64
# array per parameter block (row-major) plus "__meta__", a UTF-8 JSON blob
# stored as a uint8 array:
#   {"format": "punq-model", "version": 1, "hidden": H,
#    "layout": {tables, columns, col_min, col_max, variant, n_ops},
#    "training": {...}}


def save(model: PunqModel, path) -> None:
    meta = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "hidden": model.hidden,
        "layout": model.layout.to_dict(),
        "training": model.meta,
    }
    blob = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    arrays = {k: np.ascontiguousarray(model.params[k], dtype=np.float64) for k in PARAM_NAMES}
    buf = io.BytesIO()
    np.savez(buf, __meta__=blob, **arrays)
    try:
        Path(path).write_bytes(buf.getvalue())
    except OSError as exc:
        raise ModelIOError(str(exc)) from exc


def load(path) -> PunqModel:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise ModelIOError(str(exc)) from exc
    try:
        with np.load(io.BytesIO(raw), allow_pickle=False) as z:
            files = set(z.files)
            if "__meta__" not in files:
                raise VersionMismatch("not a model file: metadata missing")
            meta = json.loads(bytes(z["__meta__"]).decode("utf-8"))
            params = {k: z[k] for k in PARAM_NAMES if k in files}
    except (zipfile.BadZipFile, ValueError, EOFError, OSError, KeyError) as exc:
        raise ModelIOError(f"cannot read model file {path}: {exc}") from exc
    if meta.get("format") != FORMAT_NAME or meta.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"unsupported model format {meta.get('format')} v{meta.get('version')}")
    layout = FeatLayout.from_dict(meta["layout"])
    return PunqModel(layout, int(meta["hidden"]), params, meta.get("training", {}))
