"""Statevector simulation of the variational circuits used as quantum dense layers.

Each circuit acts on ``q`` qubits: R_x angle embedding of ``q`` features,
``depth`` repetitions of per-qubit Rot(a, b, c) = R_z(c) R_y(b) R_z(a)
followed by a CNOT ring, then a Pauli-Y expectation on every qubit.

All functions broadcast over leading batch dimensions, so a batch of
examples and all parameter-shifted copies of a circuit run as one array
computation. Qubit ``j`` is the ``j``-th least significant bit of the
amplitude index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .autodiff import Tensor, as_tensor, make_node
from .errors import ParameterError

MAX_QUBITS = 12
SHIFT = np.pi / 2


@dataclass(frozen=True)
class VqcConfig:
    q: int
    depth: int
    circuit_index: int = 0

    def __post_init__(self):
        if not 1 <= self.q <= MAX_QUBITS:
            raise ParameterError(f"q must be in [1, {MAX_QUBITS}], got {self.q}")
        if self.depth < 1:
            raise ParameterError(f"depth must be >= 1, got {self.depth}")

    @property
    def params_shape(self) -> tuple[int, int, int]:
        return (self.depth, self.q, 3)

    @property
    def n_params(self) -> int:
        return 3 * self.depth * self.q


def rx(phi):
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.stack([np.stack([c, -1j * s], -1), np.stack([-1j * s, c], -1)], -2)


def ry(phi):
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi / 2), np.sin(phi / 2)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2).astype(complex)


def rz(phi):
    phi = np.asarray(phi, dtype=float)
    e = np.exp(-0.5j * phi)
    z = np.zeros_like(e)
    return np.stack([np.stack([e, z], -1), np.stack([z, np.conj(e)], -1)], -2)


def zero_state(q: int, batch_shape=()) -> np.ndarray:
    psi = np.zeros(tuple(batch_shape) + (2**q,), dtype=complex)
    psi[..., 0] = 1.0
    return psi


def apply_1q(state: np.ndarray, gate: np.ndarray, qubit: int) -> np.ndarray:
    """Apply a (possibly batched) 2x2 ``gate`` to ``qubit`` of ``state``."""
    dim = state.shape[-1]
    hi = dim >> (qubit + 1)
    st = state.reshape(state.shape[:-1] + (hi, 2, 1 << qubit))
    out = np.einsum("...ab,...xbz->...xaz", gate, st)
    return out.reshape(out.shape[:-3] + (dim,))


@lru_cache(maxsize=None)
def cnot_permutation(q: int, control: int, target: int) -> np.ndarray:
    k = np.arange(2**q)
    return np.where((k >> control) & 1, k ^ (1 << target), k)


@lru_cache(maxsize=None)
def ring_permutation(q: int) -> np.ndarray:
    """Index map of CNOT(0->1), CNOT(1->2), ..., CNOT(q-1->0) applied in order."""
    perm = np.arange(2**q)
    if q == 1:
        return perm
    for c in range(q):
        # new[k] = old[p[k]] composed left to right
        perm = perm[cnot_permutation(q, c, (c + 1) % q)]
    return perm


def apply_cnot(state, control, target):
    q = state.shape[-1].bit_length() - 1
    return state[..., cnot_permutation(q, control, target)]


def apply_cnot_ring(state):
    q = state.shape[-1].bit_length() - 1
    return state[..., ring_permutation(q)]


def embed(x) -> np.ndarray:
    """Angle-embed features ``x[..., q]`` as R_x rotations on |0...0>."""
    x = np.asarray(x, dtype=float)
    q = x.shape[-1]
    state = zero_state(q, x.shape[:-1])
    for j in range(q):
        state = apply_1q(state, rx(x[..., j]), j)
    return state


def apply_variational(state: np.ndarray, params) -> np.ndarray:
    """Apply ``params[..., depth, q, 3]`` rotation layers, each followed by the CNOT ring."""
    params = np.asarray(params, dtype=float)
    q = state.shape[-1].bit_length() - 1
    if params.ndim < 3 or params.shape[-2:] != (q, 3):
        raise ParameterError(f"params shape {params.shape} does not match {q} qubits")
    for r in range(params.shape[-3]):
        layer = params[..., r, :, :]
        for j in range(q):
            state = apply_1q(state, rz(layer[..., j, 0]), j)
            state = apply_1q(state, ry(layer[..., j, 1]), j)
            state = apply_1q(state, rz(layer[..., j, 2]), j)
        state = apply_cnot_ring(state)
    return state


def measure_y(state: np.ndarray) -> np.ndarray:
    """<psi|Y_j|psi> for every qubit j, shape [..., q]."""
    dim = state.shape[-1]
    q = dim.bit_length() - 1
    out = []
    for j in range(q):
        st = state.reshape(state.shape[:-1] + (dim >> (j + 1), 2, 1 << j))
        a0, a1 = st[..., 0, :], st[..., 1, :]
        out.append(2.0 * np.imag(np.conj(a0) * a1).sum(axis=(-2, -1)))
    return np.stack(out, axis=-1)


def quantum_layer_forward(x, params) -> np.ndarray:
    return measure_y(apply_variational(embed(x), params))


def _shift_table(q: int, depth: int):
    """Unit offsets for each of the ``q + 3*depth*q`` circuit angles."""
    n = q + 3 * depth * q
    eye = np.eye(n)
    return eye[:, :q], eye[:, q:].reshape(n, depth, q, 3)


def quantum_layer_gradient(x, params) -> tuple[np.ndarray, np.ndarray]:
    """Parameter-shift Jacobians of :func:`quantum_layer_forward`.

    Returns ``dv/dx`` shaped ``[..., q, q]`` (output index first) and
    ``dv/dparams`` shaped ``[..., q, depth, q, 3]``. Every gate angle enters
    through one rotation with +-1/2 generator eigenvalues, so the two-point
    rule with shift pi/2 is exact.
    """
    x = np.asarray(x, dtype=float)
    params = np.asarray(params, dtype=float)
    q, depth = x.shape[-1], params.shape[-3]
    dx, dp = _shift_table(q, depth)
    xs = x[..., None, :]
    ps = params[..., None, :, :, :]
    plus = quantum_layer_forward(xs + SHIFT * dx, ps + SHIFT * dp)
    minus = quantum_layer_forward(xs - SHIFT * dx, ps - SHIFT * dp)
    jac = np.swapaxes(0.5 * (plus - minus), -1, -2)  # [..., q_out, n_angles]
    return jac[..., :q], jac[..., q:].reshape(jac.shape[:-1] + (depth, q, 3))


def quantum_dense(x, params) -> Tensor:
    """Autodiff node: Y-expectations of one circuit for a batch ``x[B, q]``.

    The backward pass calls :func:`quantum_layer_gradient`, i.e. reruns the
    shifted circuits instead of differentiating through the simulator.
    """
    x, params = as_tensor(x), as_tensor(params)
    if params.ndim != 3 or params.shape[1:] != (x.shape[-1], 3):
        raise ParameterError(f"params shape {params.shape} does not match inputs {x.shape}")
    value = quantum_layer_forward(x.data, params.data)

    def bw(g):
        jx, jp = quantum_layer_gradient(x.data, params.data)
        gx = np.einsum("...j,...jk->...k", g, jx)
        gp = np.einsum("...j,...jdkr->...dkr", g, jp)
        if gp.ndim > 3:
            gp = gp.reshape((-1,) + params.shape).sum(axis=0)
        return gx, gp

    return make_node(value, (x, params), bw, "quantum_dense")
