"""Deterministic multinomial logistic regression and the experiment runner."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import adm, chain, readout
from .dataio import Dataset, balanced_sample, stratified_split
from .neuro import MismatchModel, SimConfig


@dataclass(frozen=True)
class Hyper:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


@dataclass
class ClassifierModel:
    weights: np.ndarray          # (class_count, feature_count)
    bias: np.ndarray             # (class_count,)
    feature_means: np.ndarray
    feature_scales: np.ndarray

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_means) / self.feature_scales

    def logits(self, x: np.ndarray) -> np.ndarray:
        return self.standardize(x) @ self.weights.T + self.bias

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    confusion: np.ndarray        # rows: true class, columns: predicted
    per_class_recall: np.ndarray

    def __str__(self) -> str:
        lines = [f"accuracy {self.accuracy:.4f}"]
        for c, r in enumerate(self.per_class_recall):
            lines.append(f"  class {c}: recall {r:.4f} "
                         f"(n={int(self.confusion[c].sum())})")
        return "\n".join(lines)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _as_xy(features) -> tuple[np.ndarray, np.ndarray]:
    x = np.array([fv.values for fv in features], dtype=np.float64)
    y = np.array([fv.label for fv in features], dtype=np.int64)
    return x, y


def loss_and_gradients(weights, bias, xs, y_onehot, l2):
    """L2-regularized multinomial cross-entropy plus its exact gradients."""
    n = xs.shape[0]
    probs = _softmax(xs @ weights.T + bias)
    ce = -np.sum(y_onehot * np.log(np.clip(probs, 1e-300, None))) / n
    loss = ce + 0.5 * l2 * float(np.sum(weights * weights))
    delta = (probs - y_onehot) / n
    grad_w = delta.T @ xs + l2 * weights
    grad_b = delta.sum(axis=0)
    return loss, grad_w, grad_b


def train(features, class_count: int, hyper: Hyper = Hyper(),
          init: str = "zeros") -> ClassifierModel:
    """Full-batch gradient descent on z-scored features.

    Zero initialization (the default) makes training fully deterministic;
    init="random" draws small normal weights from hyper.seed instead.
    """
    x, y = _as_xy(features)
    if x.size == 0:
        raise ValueError("no training features")
    if not np.all((0 <= y) & (y < class_count)):
        raise ValueError("label outside class range")
    means = x.mean(axis=0)
    scales = x.std(axis=0)
    degenerate = scales == 0.0
    if degenerate.any():
        warnings.warn(f"{int(degenerate.sum())} zero-variance feature columns; "
                      "scale clamped to 1", stacklevel=2)
        scales = np.where(degenerate, 1.0, scales)
    xs = (x - means) / scales
    y_onehot = np.zeros((len(y), class_count))
    y_onehot[np.arange(len(y)), y] = 1.0

    if init == "zeros":
        weights = np.zeros((class_count, x.shape[1]))
    elif init == "random":
        rng = np.random.default_rng(hyper.seed)
        weights = 0.01 * rng.standard_normal((class_count, x.shape[1]))
    else:
        raise ValueError(f"unknown init {init!r}")
    bias = np.zeros(class_count)
    for _ in range(hyper.epochs):
        _, grad_w, grad_b = loss_and_gradients(weights, bias, xs, y_onehot, hyper.l2)
        weights -= hyper.learning_rate * grad_w
        bias -= hyper.learning_rate * grad_b
    return ClassifierModel(weights=weights, bias=bias,
                           feature_means=means, feature_scales=scales)


def evaluate(model: ClassifierModel, features) -> EvalReport:
    x, y = _as_xy(features)
    if x.shape[1] != model.weights.shape[1]:
        raise ValueError(f"feature length {x.shape[1]} does not match model "
                         f"({model.weights.shape[1]})")
    pred = model.predict(x)
    k = model.class_count
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (y, pred), 1)
    row_sums = confusion.sum(axis=1)
    recall = np.divide(np.diag(confusion), row_sums,
                       out=np.zeros(k), where=row_sums > 0)
    return EvalReport(accuracy=float(np.trace(confusion) / max(1, len(y))),
                      confusion=confusion, per_class_recall=recall)


@dataclass(frozen=True)
class PipelineConfig:
    """Everything run_experiment needs besides the dataset."""

    thresholds: tuple[float, ...] = adm.DEFAULT_THRESHOLDS
    steps: int = chain.DEFAULT_CHAIN_STEPS
    pool_size: int = chain.DEFAULT_POOL_SIZE
    cv: float = 0.2
    sample_total: int = 1000
    train_fraction: float = 0.7
    dt: float = 1e-4
    schedule: readout.RateSchedule = field(default_factory=readout.RateSchedule)
    auto_schedule: bool = False
    hyper: Hyper = field(default_factory=Hyper)
    jobs: int = 1


@dataclass
class ExperimentResult:
    feature_report: EvalReport
    raw_report: EvalReport
    accuracy_gap: float          # raw minus feature accuracy
    network: chain.NetworkSpec
    calibration: chain.CalibrationReport
    schedule: readout.RateSchedule
    features: list[readout.FeatureVector]


def extract_dataset_features(ds: Dataset, net: chain.NetworkSpec,
                             sched: readout.RateSchedule,
                             dt: float = 1e-4, jobs: int = 1,
                             interpolate: bool = True) -> list[readout.FeatureVector]:
    """Encode every signal, run it through the network, and read rates."""
    input_sets = [adm.encode_bank(sig, net.thresholds, interpolate=interpolate)
                  for sig in ds.signals]
    duration = max(sched.snapshot_times[-1],
                   max(sig.duration for sig in ds.signals)) + 0.05
    sim = SimConfig(duration=duration, dt=dt)
    outputs = chain.run_network_batch(net, input_sets, sim, jobs=jobs)
    return [readout.extract_features(out, net, sched, label=sig.label)
            for out, sig in zip(outputs, ds.signals)]


def run_experiment(ds: Dataset, config: PipelineConfig = PipelineConfig(),
                   seed: int = 0) -> ExperimentResult:
    """The full comparison: rate features versus raw amplitudes.

    Balanced-samples the dataset, calibrates and wires the network, turns
    every beat into a 2*steps*snapshots rate vector, then trains the same
    classifier family on the rate features and on the raw amplitude rows
    under an identical train/test split.
    """
    sampled = balanced_sample(ds, config.sample_total, seed)
    mm = MismatchModel(cv=config.cv, seed=seed)
    n_chains = 2 * len(config.thresholds)
    records = chain.calibrate_pool(config.pool_size, mm=mm,
                                   required=n_chains * config.steps)
    assignment, cal = chain.select_matched(records, n_chains, config.steps)
    net = chain.build_network(assignment, records, thresholds=config.thresholds)
    sched = (readout.auto_schedule(cal.memory_span,
                                   len(config.schedule.snapshot_times),
                                   config.schedule.window)
             if config.auto_schedule else config.schedule)

    features = extract_dataset_features(sampled, net, sched,
                                        dt=config.dt, jobs=config.jobs)
    raw = [readout.FeatureVector(values=sig.samples, label=sig.label)
           for sig in sampled.signals]

    split_train, split_test = stratified_split(sampled, config.train_fraction, seed)
    train_ids = {id(s) for s in split_train.signals}
    idx_train = [i for i, s in enumerate(sampled.signals) if id(s) in train_ids]
    idx_test = [i for i, s in enumerate(sampled.signals) if id(s) not in train_ids]

    def fit_eval(vectors):
        model = train([vectors[i] for i in idx_train], ds.class_count, config.hyper)
        return evaluate(model, [vectors[i] for i in idx_test])

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # zero-variance padding columns are expected
        feature_report = fit_eval(features)
        raw_report = fit_eval(raw)
    return ExperimentResult(
        feature_report=feature_report,
        raw_report=raw_report,
        accuracy_gap=raw_report.accuracy - feature_report.accuracy,
        network=net,
        calibration=cal,
        schedule=sched,
        features=features,
    )


# ---------------------------------------------------------------------------
# serialization

def write_model(model: ClassifierModel, path) -> None:
    """Dimensions plus row-major values at 9 significant digits."""
    k, f = model.weights.shape
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"classes={k}\nfeatures={f}\n")
        for name, arr in (("weights", model.weights.ravel()),
                          ("bias", model.bias),
                          ("means", model.feature_means),
                          ("scales", model.feature_scales)):
            fh.write(f"{name}={','.join(f'{v:.9g}' for v in arr)}\n")


def read_model(path) -> ClassifierModel:
    kv = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            key, _, value = line.strip().partition("=")
            kv[key] = value
    k, f = int(kv["classes"]), int(kv["features"])
    parse = lambda s: np.array([float(x) for x in s.split(",")])
    return ClassifierModel(weights=parse(kv["weights"]).reshape(k, f),
                           bias=parse(kv["bias"]),
                           feature_means=parse(kv["means"]),
                           feature_scales=parse(kv["scales"]))


def write_report_csv(report: EvalReport, path) -> None:
    k = report.confusion.shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"accuracy,{report.accuracy:.9g}\n")
        fh.write("true\\pred," + ",".join(str(c) for c in range(k)) + ",recall\n")
        for c in range(k):
            row = ",".join(str(int(v)) for v in report.confusion[c])
            fh.write(f"{c},{row},{report.per_class_recall[c]:.9g}\n")
