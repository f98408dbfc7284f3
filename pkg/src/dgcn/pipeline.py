"""End-to-end experiment: LSCC preprocessing, features, splits, training,
evaluation and multi-run aggregation."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import nn
from .errors import NumericError, ValidationError
from .graph import DirectedGraph, NodeData, largest_scc
from .spectral import baseline_sym_propagation, dgcn_propagation

log = logging.getLogger(__name__)

PROPAGATIONS = ("dgcn", "baseline-sym")
OPTIMIZERS = ("adam", "sgd")


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of a run. Identical configs give bitwise-identical results.

    ``model_depth=None`` picks 2 layers for at most 10 classes and 3 otherwise;
    ``hidden_dims=None`` uses width 16 for every hidden layer.
    """

    model_depth: int | None = None
    hidden_dims: tuple | None = None
    lr: float = 0.01
    dropout: float = 0.5
    weight_decay: float = 5e-4  # first layer only
    epochs: int = 200
    seed: int = 0
    runs: int = 1
    train_fraction: float = 0.10
    propagation: str = "dgcn"
    optimizer: str = "adam"
    # data sources
    data_dir: str | None = None
    edgelist: str | None = None
    labels: str | None = None
    features: str | None = None
    weighted: bool = False
    binarize: bool = True
    synthetic: str | None = None  # "sbm"
    sbm_n: int = 200
    sbm_p_in: float = 0.1
    sbm_p_out: float = 0.01
    out: str | None = None

    def validate(self) -> None:
        bad = self.problems()
        if bad:
            raise ValidationError("invalid config: " + "; ".join(f"{k}: {why}" for k, why in bad))

    def problems(self) -> list[tuple[str, str]]:
        bad = []
        if self.model_depth not in (None, 2, 3):
            bad.append(("model_depth", "must be 2 or 3"))
        if self.hidden_dims is not None:
            if self.model_depth is not None and len(self.hidden_dims) != self.model_depth - 1:
                bad.append(("hidden_dims", "length must equal model_depth - 1"))
            if any(h < 1 for h in self.hidden_dims):
                bad.append(("hidden_dims", "widths must be >= 1"))
        if not 0.0 < self.train_fraction < 1.0:
            bad.append(("train_fraction", "must lie in (0, 1)"))
        if self.lr < 0:
            bad.append(("lr", "must be >= 0"))
        if not 0.0 <= self.dropout < 1.0:
            bad.append(("dropout", "must lie in [0, 1)"))
        if self.weight_decay < 0:
            bad.append(("weight_decay", "must be >= 0"))
        if self.epochs < 0:
            bad.append(("epochs", "must be >= 0"))
        if self.runs < 1:
            bad.append(("runs", "must be >= 1"))
        if self.propagation not in PROPAGATIONS:
            bad.append(("propagation", f"must be one of {PROPAGATIONS}"))
        if self.optimizer not in OPTIMIZERS:
            bad.append(("optimizer", f"must be one of {OPTIMIZERS}"))
        if self.synthetic not in (None, "sbm"):
            bad.append(("synthetic", "only 'sbm' is supported"))
        return bad

    def depth_for(self, num_classes: int) -> int:
        if self.model_depth is not None:
            return self.model_depth
        if self.hidden_dims is not None:
            return len(self.hidden_dims) + 1
        return 2 if num_classes <= 10 else 3

    def dims_for(self, in_dim: int, num_classes: int) -> tuple[int, ...]:
        depth = self.depth_for(num_classes)
        hidden = self.hidden_dims if self.hidden_dims is not None else (16,) * (depth - 1)
        if len(hidden) != depth - 1:
            raise ValidationError("hidden_dims length must equal model_depth - 1")
        return (in_dim, *hidden, num_classes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if d["hidden_dims"] is not None:
            d["hidden_dims"] = list(d["hidden_dims"])
        return d

    @classmethod
    def from_strings(cls, pairs: dict) -> "TrainConfig":
        """Build from string values (config files, ``key=value`` overrides)."""
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(pairs) - set(fields))
        if unknown:
            raise ValidationError("unknown config keys: " + ", ".join(unknown))
        kwargs, bad = {}, []
        for key, raw in pairs.items():
            try:
                kwargs[key] = _coerce(key, raw)
            except ValueError as exc:
                bad.append(f"{key}: {exc}")
        if bad:
            raise ValidationError("invalid config: " + "; ".join(bad))
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg


_INT_KEYS = {"model_depth", "epochs", "seed", "runs", "sbm_n"}
_FLOAT_KEYS = {"lr", "dropout", "weight_decay", "train_fraction", "sbm_p_in", "sbm_p_out"}
_BOOL_KEYS = {"weighted", "binarize"}


def _coerce(key, raw):
    raw = str(raw).strip()
    if raw.lower() in ("", "none", "auto") and key in {"model_depth", "hidden_dims", "synthetic", "data_dir",
                                                       "edgelist", "labels", "features", "out"}:
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if key == "hidden_dims":
        return tuple(int(t) for t in raw.replace(",", " ").split())
    return raw


@dataclass
class ExperimentResult:
    seeds: list
    accuracies: list
    mean: float
    half_width: float
    losses: list = field(default_factory=list)  # one trace per run

    @property
    def runs(self) -> int:
        return len(self.accuracies)

    def to_dict(self) -> dict:
        return {
            "runs": self.runs,
            "seeds": list(self.seeds),
            "accuracies": list(self.accuracies),
            "mean": self.mean,
            "half_width": None if math.isnan(self.half_width) else self.half_width,
            "losses": [list(t) for t in self.losses],
        }


@dataclass
class TrainResult:
    params: nn.ModelParams
    losses: list
    train_idx: np.ndarray
    test_idx: np.ndarray
    accuracy: float
    seed: int


# ---------------------------------------------------------------- operations


def build_features(g: DirectedGraph, node_data: NodeData) -> np.ndarray:
    """One-hot node identity concatenated with the raw features: ``[I_n | F]``."""
    if node_data.n != g.n:
        raise ValidationError(f"node data has {node_data.n} rows but graph has {g.n} nodes")
    return np.hstack([np.eye(g.n), node_data.features])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split_nodes(n: int, train_fraction: float, seed, labels=None):
    """Random train/test split of nodes ``0..n-1``.

    Without ``labels`` every node is split. With ``labels`` (``-1`` = unlabeled)
    only labeled nodes are split, stratified so that every class with at least
    two nodes lands in the training set and class proportions are kept by
    largest-remainder apportionment. Train size is ``round(m * train_fraction)``
    for ``m`` candidate nodes.

    Returns sorted ``(train, test)`` index arrays.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    if labels is None:
        cand = np.arange(n)
    else:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ValidationError("labels length does not match n")
        cand = np.flatnonzero(labels >= 0)
    m = len(cand)
    k = _round_half_up(m * train_fraction)
    if not 1 <= k < m:
        raise ValidationError(f"train size {k} must lie in [1, {m})")

    quotas = None
    if labels is not None:
        quotas = _stratified_quotas(labels[cand], k)
        if quotas is None:
            log.warning("cannot stratify %d nodes into %d training slots; using a plain random split", m, k)

    if quotas is None:
        train = rng.choice(cand, size=k, replace=False)
    else:
        parts = []
        for c, q in quotas.items():
            if q:
                members = cand[labels[cand] == c]
                parts.append(rng.choice(members, size=q, replace=False))
        train = np.concatenate(parts)
    train = np.sort(train)
    test = np.setdiff1d(cand, train)
    return train, test


def _stratified_quotas(y, k):
    classes, sizes = np.unique(y, return_counts=True)
    m = len(y)
    lo = (sizes >= 2).astype(np.int64)
    hi = np.where(sizes >= 2, sizes - 1, 0)
    if lo.sum() > k or hi.sum() < k:
        return None
    target = k * sizes / m
    q = np.clip(np.floor(target).astype(np.int64), lo, hi)
    while q.sum() < k:
        room = np.where(q < hi, target - q, -np.inf)
        q[int(np.argmax(room))] += 1
    while q.sum() > k:
        excess = np.where(q > lo, q - target, -np.inf)
        q[int(np.argmax(excess))] -= 1
    return dict(zip(classes.tolist(), q.tolist()))


def evaluate(params: nn.ModelParams, a_hat, x, labels, test_idx) -> float:
    """Test accuracy of argmax predictions (ties go to the lowest class)."""
    test_idx = np.asarray(test_idx, dtype=np.int64)
    if test_idx.size == 0:
        raise ValidationError("empty test set")
    labels = np.asarray(labels)
    if np.any(labels[test_idx] < 0):
        raise ValidationError("test set contains unlabeled nodes")
    probs, _ = nn.forward(a_hat, x, params, training=False)
    pred = np.argmax(probs[test_idx], axis=1)
    return float(np.mean(pred == labels[test_idx]))


def confidence_interval(accuracies: Sequence[float], level: float = 0.95):
    """Mean and Student-t half-width ``t_{(1+level)/2, k-1} * s / sqrt(k)``."""
    acc = np.asarray(accuracies, dtype=np.float64)
    k = len(acc)
    if k < 2:
        raise ValidationError("a confidence interval needs at least two runs")
    if np.all(acc == acc[0]):
        return float(acc[0]), 0.0
    mean = math.fsum(acc) / k
    s = float(acc.std(ddof=1))
    t = float(stats.t.ppf(0.5 + level / 2, k - 1))
    return mean, t * s / math.sqrt(k)


def propagation_for(g: DirectedGraph, kind: str):
    if kind == "dgcn":
        return dgcn_propagation(g)[0]
    if kind == "baseline-sym":
        return baseline_sym_propagation(g)
    raise ValidationError(f"unknown propagation {kind!r}")


def restrict_to_lscc(g: DirectedGraph, node_data: NodeData):
    """Induced LSCC subgraph with node data re-joined; other labels are dropped."""
    keep = largest_scc(g)
    if len(keep) < g.n:
        log.info("LSCC keeps %d of %d nodes", len(keep), g.n)
    return g.induced_subgraph(keep), node_data.subset(keep)


def seed_streams(seed):
    split_ss, init_ss, drop_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(split_ss), np.random.default_rng(init_ss), np.random.default_rng(drop_ss))


def fit(a_hat, x, labels, train_idx, config: TrainConfig, num_classes: int, init_rng, dropout_rng):
    """Full-batch training loop.

    The loss trace holds, for every epoch, the deterministic (dropout-free)
    training loss of the parameters entering that epoch.
    """
    dims = config.dims_for(x.shape[1], num_classes)
    params = nn.init_params(dims, init_rng)
    decay = [config.weight_decay] + [0.0] * (len(dims) - 2)
    state = nn.adam_init(params) if config.optimizer == "adam" else None
    step = nn.adam_step if config.optimizer == "adam" else nn.sgd_step
    losses = []
    for epoch in range(config.epochs):
        probs, _ = nn.forward(a_hat, x, params, training=False)
        loss = nn.masked_cross_entropy(probs, labels, train_idx)
        if not math.isfinite(loss):
            raise NumericError(f"non-finite training loss at epoch {epoch}")
        losses.append(loss)
        _, cache = nn.forward(a_hat, x, params, config.dropout, dropout_rng, training=True)
        grads = nn.backward(cache, labels, train_idx)
        params, state = step(params, grads, config.lr, decay, state)
    return params, losses


def train(config: TrainConfig, g: DirectedGraph, node_data: NodeData, seed=None, a_hat=None) -> TrainResult:
    """One seeded run on the LSCC of ``g``.

    ``a_hat`` may be passed when the caller already holds the propagation
    matrix for the LSCC (it must match ``restrict_to_lscc(g, ...)``).
    """
    config.validate()
    seed = config.seed if seed is None else seed
    sub, data = restrict_to_lscc(g, node_data)
    if a_hat is None:
        a_hat = propagation_for(sub, config.propagation)
    x = build_features(sub, data)
    split_rng, init_rng, drop_rng = seed_streams(seed)
    train_idx, test_idx = split_nodes(sub.n, config.train_fraction, split_rng, labels=data.labels)
    params, losses = fit(a_hat, x, data.labels, train_idx, config, data.num_classes, init_rng, drop_rng)
    acc = evaluate(params, a_hat, x, data.labels, test_idx)
    log.info("seed %d: accuracy %.4f", seed, acc)
    return TrainResult(params, losses, train_idx, test_idx, acc, seed)


def run_seeds(config: TrainConfig) -> list[int]:
    return [config.seed + i for i in range(config.runs)]


def run_experiment(config: TrainConfig, g: DirectedGraph, node_data: NodeData, keep_params=False):
    """``config.runs`` seeded runs sharing one propagation matrix.

    Returns the :class:`ExperimentResult`, plus the per-run
    :class:`TrainResult` list when ``keep_params``.
    """
    config.validate()
    sub, data = restrict_to_lscc(g, node_data)
    a_hat = propagation_for(sub, config.propagation)
    results = [train(config, sub, data, seed=s, a_hat=a_hat) for s in run_seeds(config)]
    accs = [r.accuracy for r in results]
    if len(accs) >= 2:
        mean, hw = confidence_interval(accs)
    else:
        mean, hw = accs[0], float("nan")
    exp = ExperimentResult(run_seeds(config), accs, mean, hw, [r.losses for r in results])
    return (exp, results) if keep_params else exp


def compare(config: TrainConfig, g: DirectedGraph, node_data: NodeData) -> dict:
    """Run every propagation with identical seeds, splits and initializations."""
    return {
        kind: run_experiment(dataclasses.replace(config, propagation=kind), g, node_data)
        for kind in PROPAGATIONS
    }


def format_table(columns: dict, dataset: str = "dataset") -> str:
    """Accuracy table in percent, ``mean +- half-width`` per method."""
    names = {"dgcn": "DGCN", "baseline-sym": "GCN"}
    width = max(len(dataset), 18)
    lines = [f"{'Method':<14}{dataset:>{width}}"]
    for kind, res in columns.items():
        if math.isnan(res.half_width):
            cell = f"{100 * res.mean:.2f}"
        else:
            cell = f"{100 * res.mean:.2f} ± {100 * res.half_width:.1f}"
        lines.append(f"{names.get(kind, kind):<14}{cell:>{width}}")
    return "\n".join(lines)
