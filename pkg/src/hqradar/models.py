"""CNN and hybrid quantum (HQNN) detectors/classifiers."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import layers as L
from .autodiff import Tensor, concat, split
from .errors import ParameterError
from .vqc import VqcConfig, quantum_dense

INPUT_SHAPE = (2, 16, 249)


@dataclass(frozen=True)
class ArchitectureSpec:
    """Network description; the defaults are the reference architecture."""

    kind: str = "cnn"
    n_classes: int = 2
    input_shape: tuple = INPUT_SHAPE
    channels: tuple = (16, 32, 64)
    kernel: int = 3
    fc_widths: tuple = (128, 64)
    hqnn_fc_widths: tuple = (128, 16)
    n_circuits: int = 4
    depth: int = 2
    dropout: float = 0.3
    init_seed: int = 0

    def __post_init__(self):
        if self.kind not in ("cnn", "hqnn"):
            raise ParameterError(f"model kind must be 'cnn' or 'hqnn', got {self.kind!r}")
        if self.n_classes not in (2, 5):
            raise ParameterError(f"n_classes must be 2 or 5, got {self.n_classes}")
        if len(self.channels) != 3:
            raise ParameterError("channels must list three conv widths")
        if self.kind == "hqnn" and self.hqnn_fc_widths[-1] % self.n_circuits:
            raise ParameterError(
                f"pre-quantum width {self.hqnn_fc_widths[-1]} not divisible by {self.n_circuits} circuits"
            )
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "fc_widths", tuple(self.fc_widths))
        object.__setattr__(self, "hqnn_fc_widths", tuple(self.hqnn_fc_widths))

    @property
    def qubits(self) -> int:
        return self.hqnn_fc_widths[-1] // self.n_circuits

    @property
    def feature_map_shape(self) -> tuple[int, int, int]:
        _, h, w = self.input_shape
        return self.channels[2], h // 2 // 2, w // 2 // 2

    @property
    def flat_features(self) -> int:
        return int(np.prod(self.feature_map_shape))

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ArchitectureSpec":
        return cls(**{k: tuple(v) if isinstance(v, list) else v for k, v in d.items()})


class ParallelQuantumDense(L.Module):
    """Split features into ``n_circuits`` chunks, run one VQC per chunk, concatenate."""

    def __init__(self, n_circuits, qubits, depth, rng=None):
        rng = rng or np.random.default_rng(0)
        self.configs = [VqcConfig(qubits, depth, c) for c in range(n_circuits)]
        self.weights = [Tensor(rng.uniform(0, 2 * np.pi, cfg.params_shape), True) for cfg in self.configs]

    def parameters(self):
        for c, w in enumerate(self.weights):
            yield f"circuit{c}", w

    def forward(self, x, rng=None):
        parts = split(x, len(self.weights))
        return concat([quantum_dense(p, w) for p, w in zip(parts, self.weights)], axis=-1)

    def config(self):
        cfg = self.configs[0]
        return {"type": "ParallelQuantumDense", "n_circuits": len(self.configs), "qubits": cfg.q, "depth": cfg.depth}

    @property
    def n_weights(self) -> int:
        return sum(cfg.n_params for cfg in self.configs)


class Network:
    """A built model plus its architecture echo."""

    def __init__(self, spec: ArchitectureSpec, body: L.Sequential):
        self.spec = spec
        self.metadata: dict = {}
        self.body = body
        self.body.eval()

    def parameters(self) -> list[tuple[str, Tensor]]:
        return list(self.body.parameters())

    def n_parameters(self, quantum: bool | None = None) -> int:
        total = 0
        for name, p in self.parameters():
            is_q = "circuit" in name
            if quantum is None or quantum == is_q:
                total += p.size
        return total

    def train(self, flag=True):
        self.body.train(flag)
        return self

    def eval(self):
        return self.train(False)

    @property
    def training(self):
        return self.body.training

    def forward(self, x, rng=None) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim == 3:
            x = x.reshape((1,) + x.shape)
        if tuple(x.shape[1:]) != self.spec.input_shape:
            raise ParameterError(f"input shape {x.shape[1:]} does not match {self.spec.input_shape}")
        return self.body(x, rng)

    __call__ = forward

    def logits(self, x, batch_size: int = 64) -> np.ndarray:
        """Evaluation-mode logits for an array batch ``[n, C, H, W]``."""
        was = self.training
        self.eval()
        try:
            x = np.asarray(x)
            out = [self.forward(np.asarray(x[i : i + batch_size], dtype=np.float64)).data for i in range(0, len(x), batch_size)]
        finally:
            self.train(was)
        return np.concatenate(out, axis=0) if out else np.zeros((0, self.spec.n_classes))

    def probabilities(self, x, batch_size: int = 64) -> np.ndarray:
        return L.softmax(self.logits(x, batch_size))

    def predict(self, x, batch_size: int = 64) -> np.ndarray:
        # argmax returns the lowest index on ties
        return self.logits(x, batch_size).argmax(axis=-1)

    def architecture(self) -> dict:
        return {"spec": self.spec.to_dict(), "layers": self.body.config()}

    def save(self, path) -> None:
        L.save_checkpoint(path, self.parameters(), self.architecture(), self.metadata)

    def load_state(self, params: dict[str, np.ndarray]) -> None:
        own = dict(self.parameters())
        if set(own) != set(params):
            raise ParameterError(f"parameter names differ: {sorted(set(own) ^ set(params))}")
        for name, t in own.items():
            if t.shape != params[name].shape:
                raise ParameterError(f"shape mismatch for {name}: {t.shape} vs {params[name].shape}")
            t.data = np.array(params[name], dtype=np.float64)

    @classmethod
    def load(cls, path, expected: ArchitectureSpec | None = None) -> "Network":
        arch, params, metadata = L.load_checkpoint(path)
        spec = ArchitectureSpec.from_dict(arch["spec"])
        if expected is not None and spec != expected:
            raise ParameterError(f"checkpoint architecture {spec} does not match expected {expected}")
        net = build(spec)
        if net.architecture() != arch:
            raise ParameterError("checkpoint layer echo does not match the rebuilt network")
        net.load_state(params)
        net.metadata = metadata
        return net


def _front_end(spec: ArchitectureSpec, rng, with_dropout: bool) -> list[L.Module]:
    c0 = spec.input_shape[0]
    c1, c2, c3 = spec.channels
    pad = spec.kernel // 2

    def block(cin, cout):
        return [L.Conv2d(cin, cout, spec.kernel, 1, pad, rng), L.InstanceNorm(), L.LeakyReLU()]

    drop = [L.Dropout(spec.dropout)] if with_dropout else []
    return [
        *block(c0, c1),
        *block(c1, c2),
        L.MaxPool2d(2),
        *drop,
        *block(c2, c3),
        L.MaxPool2d(2),
        *drop,
        L.Flatten(),
    ]


def build_cnn(n_classes: int = 2, **kw) -> Network:
    return build(ArchitectureSpec(kind="cnn", n_classes=n_classes, **kw))


def build_hqnn(n_classes: int = 2, **kw) -> Network:
    return build(ArchitectureSpec(kind="hqnn", n_classes=n_classes, **kw))


def build(spec: ArchitectureSpec) -> Network:
    rng = np.random.default_rng(spec.init_seed)
    flat = spec.flat_features
    if spec.kind == "cnn":
        h1, h2 = spec.fc_widths
        mods = _front_end(spec, rng, with_dropout=False) + [
            L.Dense(flat, h1, rng), L.LeakyReLU(),
            L.Dense(h1, h2, rng), L.LeakyReLU(),
            L.Dense(h2, spec.n_classes, rng),
        ]
    else:
        h1, m = spec.hqnn_fc_widths
        mods = _front_end(spec, rng, with_dropout=True) + [
            L.Dense(flat, h1, rng), L.LeakyReLU(),
            L.Dense(h1, m, rng), L.LeakyReLU(),
            ParallelQuantumDense(spec.n_circuits, spec.qubits, spec.depth, rng),
            L.LeakyReLU(),
            L.Dense(m, spec.n_classes, rng),
        ]
    return Network(spec, L.Sequential(*mods))
