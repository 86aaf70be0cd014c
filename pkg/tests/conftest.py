import numpy as np
import pytest

from hqradar.autodiff import Tensor, backward


def numeric_grad(f, arrays, eps=1e-6):
    """Central differences of scalar ``f()`` with respect to each array, perturbed in place."""
    out = []
    for a in arrays:
        g = np.zeros_like(a)
        it = np.nditer(a, flags=["multi_index"])
        for _ in it:
            i = it.multi_index
            old = a[i]
            a[i] = old + eps
            hi = f()
            a[i] = old - eps
            lo = f()
            a[i] = old
            g[i] = (hi - lo) / (2 * eps)
        out.append(g)
    return out


def assert_grad_close(analytic, numeric, atol=1e-5, rtol=1e-4):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    bad = np.abs(analytic - numeric) > np.maximum(atol, rtol * np.abs(numeric))
    assert not bad.any(), f"max gradient error {np.abs(analytic - numeric).max():.3e}"


@pytest.fixture
def gradcheck():
    """Check a Tensor-valued op against central differences.

    ``build(*tensors)`` must return a Tensor; the checked scalar is
    ``sum(out * w)`` for a fixed random ``w``, so every output element counts.
    """

    def check(build, *arrays, seed=0, atol=1e-5, rtol=1e-4, eps=1e-6):
        arrays = [np.array(a, dtype=np.float64) for a in arrays]
        tensors = [Tensor(a, requires_grad=True) for a in arrays]
        out = build(*tensors)
        w = np.random.default_rng(seed).standard_normal(out.shape)
        backward((out * Tensor(w)).sum())
        analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

        def f():
            return float((build(*[Tensor(a) for a in arrays]).data * w).sum())

        for an, nu in zip(analytic, numeric_grad(f, arrays, eps)):
            assert_grad_close(an, nu, atol, rtol)
        return analytic

    return check
