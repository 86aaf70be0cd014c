"""F1, ROC and confusion-matrix evaluation, including SNR sweeps."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as D
from .errors import ParameterError

EXPORT_FPR_FLOOR = 1e-6


@dataclass
class ConfusionMatrix:
    """Rows are true labels, columns predicted labels."""

    counts: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int) -> "ConfusionMatrix":
        y_true = np.asarray(y_true, dtype=np.int64)
        y_pred = np.asarray(y_pred, dtype=np.int64)
        if y_true.shape != y_pred.shape:
            raise ParameterError("y_true and y_pred differ in length")
        cm = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(cm, (y_true, y_pred), 1)
        return cls(cm)

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def per_class_f1(self) -> np.ndarray:
        cm = self.counts
        tp = np.diag(cm).astype(float)
        fp = cm.sum(axis=0) - tp
        fn = cm.sum(axis=1) - tp
        denom = 2 * tp + fp + fn
        # 2PR/(P+R) == 2TP/(2TP+FP+FN); zero division yields 0
        return np.divide(2 * tp, denom, out=np.zeros_like(tp), where=denom > 0)


def f1_score(cm: ConfusionMatrix, averaging: str = "binary", positive: int = 1) -> float:
    if cm.total == 0:
        raise ParameterError("cannot score an empty confusion matrix")
    per = cm.per_class_f1()
    if averaging == "binary":
        if cm.n_classes != 2:
            raise ParameterError("binary F1 needs a 2x2 confusion matrix")
        return float(per[positive])
    if averaging == "macro":
        return float(per.mean())
    raise ParameterError(f"averaging must be 'binary' or 'macro', got {averaging!r}")


@dataclass
class RocCurve:
    """Points ordered by decreasing threshold; ``thresholds[0]`` is +inf."""

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    class_id: int = 1

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))

    def unique_points(self) -> list[tuple[float, float]]:
        return sorted(set(self.points))

    def auc(self) -> float:
        return float(np.trapezoid(self.tpr, self.fpr))

    def export_rows(self):
        """(threshold, fpr, tpr) rows with zero FPR lifted to a log-axis floor."""
        fpr = np.maximum(self.fpr, EXPORT_FPR_FLOOR)
        return list(zip(self.thresholds.tolist(), fpr.tolist(), self.tpr.tolist()))


def roc(scores, labels, n_thresholds: int | None = None, class_id: int = 1) -> RocCurve:
    """ROC of ``score >= threshold`` against binary ``labels``.

    Thresholds are +inf, then every unique score together with 0 and 1 in
    descending order. ``n_thresholds`` swaps the unique scores for that many
    evenly spaced values between the score extremes.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ParameterError("scores and labels must be 1-D and equally long")
    n_pos, n_neg = int(labels.sum()), int((~labels).sum())
    if n_pos == 0 or n_neg == 0:
        raise ParameterError("ROC needs both positive and negative examples")
    if n_thresholds is None:
        cand = np.unique(scores)
    else:
        cand = np.linspace(scores.min(), scores.max(), int(n_thresholds))
    thr = np.unique(np.concatenate([cand, [0.0, 1.0]]))[::-1]
    order = np.argsort(-scores, kind="stable")
    s_sorted = scores[order]
    pos_cum = np.concatenate([[0], np.cumsum(labels[order])])
    neg_cum = np.concatenate([[0], np.cumsum(~labels[order])])
    # number of scores >= t, via the descending sort
    k = np.searchsorted(-s_sorted, -thr, side="right")
    tpr = np.concatenate([[0.0], pos_cum[k] / n_pos])
    fpr = np.concatenate([[0.0], neg_cum[k] / n_neg])
    return RocCurve(np.concatenate([[math.inf], thr]), fpr, tpr, class_id)


def multiclass_roc(probabilities, labels) -> list[RocCurve]:
    """One-vs-rest curves, one per class."""
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels)
    return [roc(probabilities[:, k], labels == k, class_id=k) for k in range(probabilities.shape[1])]


@dataclass
class SnrResult:
    snr_db: float
    f1_per_repeat: list
    confusion: ConfusionMatrix
    probabilities: np.ndarray
    labels: np.ndarray

    @property
    def mean_f1(self) -> float:
        return float(np.mean(self.f1_per_repeat))

    @property
    def std_f1(self) -> float:
        if len(self.f1_per_repeat) < 2:
            return 0.0
        return float(np.std(self.f1_per_repeat, ddof=1))

    @property
    def single_sample(self) -> bool:
        return len(self.f1_per_repeat) < 2


@dataclass
class SweepResult:
    model: str
    task: str
    results: list = field(default_factory=list)

    def table(self) -> list[dict]:
        return [
            {"snr_db": r.snr_db, "model": self.model, "mean_f1": r.mean_f1, "std_f1": r.std_f1,
             "single_sample": r.single_sample}
            for r in self.results
        ]


def averaging_for(task: str) -> str:
    return "binary" if task == D.DETECTION else "macro"


def evaluate(network, data: D.SpectrogramSet, task: str) -> tuple[float, ConfusionMatrix, np.ndarray]:
    probs = network.probabilities(data.x)
    pred = probs.argmax(axis=1)
    cm = ConfusionMatrix.from_predictions(data.y, pred, network.spec.n_classes)
    return f1_score(cm, averaging_for(task)), cm, probs


def evaluate_over_snr(
    network,
    snr_list,
    repeats: int = 3,
    seeds=None,
    *,
    task: str,
    n_test: int,
    standardization: dict,
    sampler: D.GeometrySampler | None = None,
    model_name: str = "model",
    radar=None,
    window: int = 16,
    hop: int = 8,
    threads: int = 1,
) -> SweepResult:
    """Score ``network`` on ``repeats`` fresh test sets per SNR.

    ``seeds`` lists one dataset seed per repeat (the same seeds are reused at
    every SNR). Reports mean and sample standard deviation of F1.
    """
    if repeats < 1:
        raise ParameterError("repeats must be >= 1")
    seeds = list(seeds) if seeds is not None else [10_000 + r for r in range(repeats)]
    if len(seeds) != repeats:
        raise ParameterError(f"need {repeats} seeds, got {len(seeds)}")
    sweep = SweepResult(model_name, task)
    counts = D.split_counts(n_test, task)
    for snr in snr_list:
        f1s, cms, probs, labels = [], [], [], []
        for s in seeds:
            data, _ = D.generate(task, snr, counts, sampler, s, standardization=standardization,
                                 radar=radar, window=window, hop=hop, threads=threads)
            f1, cm, p = evaluate(network, data, task)
            f1s.append(f1)
            cms.append(cm.counts)
            probs.append(p)
            labels.append(data.y)
        sweep.results.append(
            SnrResult(float(snr), f1s, ConfusionMatrix(np.sum(cms, axis=0)), np.concatenate(probs), np.concatenate(labels))
        )
    return sweep


# ----------------------------------------------------------------- CSV out


def _fmt_snr(snr: float) -> str:
    return f"{snr:g}"


def write_f1_table(path, sweeps) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["snr_db", "model", "mean_f1", "std_f1"])
        for sweep in sweeps:
            for row in sweep.table():
                w.writerow([_fmt_snr(row["snr_db"]), row["model"], repr(row["mean_f1"]), repr(row["std_f1"])])


def write_roc_csv(path, curve: RocCurve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "fpr", "tpr"])
        for t, f, p in curve.export_rows():
            w.writerow([repr(t), repr(f), repr(p)])


def write_confusion_csv(path, cm: ConfusionMatrix, names) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["true\\pred", *names])
        for name, row in zip(names, cm.counts.tolist()):
            w.writerow([name, *row])


def write_sweep_outputs(out_dir, sweep: SweepResult, class_names) -> list[Path]:
    """ROC and confusion CSVs for every SNR of a sweep; returns written paths."""
    out_dir = Path(out_dir)
    written = []
    for r in sweep.results:
        tag = f"{sweep.model}_{_fmt_snr(r.snr_db)}"
        if sweep.task == D.DETECTION:
            curves = [roc(r.probabilities[:, 1], r.labels == 1)]
            paths = [out_dir / f"roc_{tag}.csv"]
        else:
            curves = multiclass_roc(r.probabilities, r.labels)
            paths = [out_dir / f"roc_{tag}_class{c.class_id}.csv" for c in curves]
        for c, p in zip(curves, paths):
            write_roc_csv(p, c)
            written.append(p)
        p = out_dir / f"confusion_{tag}.csv"
        write_confusion_csv(p, r.confusion, class_names)
        written.append(p)
    return written
