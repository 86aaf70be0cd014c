"""Mini-batch training with Adam."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .autodiff import backward
from .dataset import SpectrogramSet, fingerprint
from .errors import NumericError, ParameterError
from .layers import softmax_cross_entropy
from .models import Network

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """``epochs`` is the minimum epoch count; training continues past it, up to
    ``max_epochs``, only while the epoch-mean loss is still above ``loss_stop``."""

    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    loss_stop: float = 0.005
    seed: int = 0
    max_epochs: int | None = None
    max_cpu_seconds: float | None = None
    clip_norm: float | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.max_epochs is not None and self.max_epochs < self.epochs:
            raise ParameterError("max_epochs must be >= epochs")

    def to_dict(self):
        return asdict(self)


@dataclass
class AdamState:
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0


def adam_step(params, grads, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of ``params`` (list of arrays); returns ``state``."""
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    state.t += 1
    c1 = 1.0 - beta1**state.t
    c2 = 1.0 - beta2**state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return state


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    accuracy: float
    cpu_seconds: float


@dataclass
class History:
    epochs: list = field(default_factory=list)
    stopped_by: str = ""
    best_epoch: int = -1
    best_loss: float = math.inf

    @property
    def losses(self):
        return [e.loss for e in self.epochs]

    def to_dict(self):
        return {
            "epochs": [asdict(e) for e in self.epochs],
            "stopped_by": self.stopped_by,
            "best_epoch": self.best_epoch,
            "best_loss": self.best_loss,
        }


def _clip(grads, max_norm):
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm:
        grads = [g * (max_norm / total) for g in grads]
    return grads


def train(network: Network, data: SpectrogramSet, config: TrainConfig, out_dir=None) -> tuple[Network, History]:
    """Train ``network`` in place and return it with the per-epoch history.

    With ``out_dir`` set, writes ``final.ckpt``, ``best.ckpt`` (lowest epoch
    loss) and ``run_manifest.json``.
    """
    labels = np.asarray(data.y, dtype=np.int64)
    if labels.size == 0:
        raise ParameterError("empty training set")
    if labels.max() >= network.spec.n_classes:
        raise ParameterError(f"label {labels.max()} out of range for a {network.spec.n_classes}-way head")
    out_dir = Path(out_dir) if out_dir is not None else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)

    named = network.parameters()
    params = [p for _, p in named]
    state = AdamState()
    ss = np.random.SeedSequence(config.seed)
    shuffle_rng, dropout_rng = (np.random.default_rng(s) for s in ss.spawn(2))
    history = History()
    max_epochs = config.max_epochs or config.epochs
    start = time.process_time()
    n = len(labels)

    network.train()
    try:
        for epoch in range(1, max_epochs + 1):
            order = shuffle_rng.permutation(n)
            loss_sum, correct = 0.0, 0
            for b, lo in enumerate(range(0, n, config.batch_size)):
                idx = order[lo : lo + config.batch_size]
                xb = np.asarray(data.x[idx], dtype=np.float64)
                for p in params:
                    p.grad = None
                logits = network(xb, dropout_rng)
                loss = softmax_cross_entropy(logits, labels[idx])
                if not math.isfinite(float(loss.data)):
                    raise NumericError(f"loss is {float(loss.data)} at epoch {epoch}, batch {b}")
                backward(loss)
                grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in params]
                if config.clip_norm is not None:
                    grads = _clip(grads, config.clip_norm)
                adam_step([p.data for p in params], grads, state, config.learning_rate,
                          config.beta1, config.beta2, config.eps)
                loss_sum += float(loss.data) * len(idx)
                correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())

            rec = EpochRecord(epoch, loss_sum / n, correct / n, time.process_time() - start)
            history.epochs.append(rec)
            log.info("epoch %d loss %.5f acc %.4f (%.0fs)", epoch, rec.loss, rec.accuracy, rec.cpu_seconds)
            if rec.loss < history.best_loss:
                history.best_loss, history.best_epoch = rec.loss, epoch
                if out_dir is not None:
                    network.save(out_dir / "best.ckpt")
            if epoch >= config.epochs and rec.loss < config.loss_stop:
                history.stopped_by = "loss_threshold"
                break
            if config.max_cpu_seconds is not None and rec.cpu_seconds >= config.max_cpu_seconds:
                history.stopped_by = "cpu_budget"
                break
        else:
            history.stopped_by = "max_epochs"
    finally:
        network.eval()

    if out_dir is not None:
        network.save(out_dir / "final.ckpt")
        manifest = {
            "train_config": config.to_dict(),
            "architecture": network.architecture(),
            "n_parameters": {"total": network.n_parameters(), "quantum": network.n_parameters(quantum=True)},
            "dataset_sha256": fingerprint(data),
            "n_examples": n,
            "history": history.to_dict(),
        }
        # cpu_seconds vary run to run; keep them out of the byte-stable manifest
        for e in manifest["history"]["epochs"]:
            e.pop("cpu_seconds")
        (out_dir / "run_manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return network, history
