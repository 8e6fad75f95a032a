from pathlib import Path

import numpy as np
import pytest

from hexgen.tensor import Tensor

ROOT = Path(__file__).resolve().parents[1]
MNIST = ROOT / "data" / "mnist"


def fd_check(f, inputs, eps=1e-4, seed=0):
    """Relative error between backward() and central differences of sum(f * probe).

    ``inputs`` are float64 Tensors with requires_grad; returns the worst
    relative error over all of them.
    """
    rng = np.random.default_rng(seed)
    out = f(*inputs)
    probe = rng.standard_normal(out.shape)
    for t in inputs:
        t.grad = None
    out.backward(probe)
    worst = 0.0
    for t in inputs:
        analytic = t.grad.copy()
        numeric = np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        for i in range(flat.size):
            old = flat[i]
            flat[i] = old + eps
            up = float(np.sum(f(*inputs).data * probe))
            flat[i] = old - eps
            down = float(np.sum(f(*inputs).data * probe))
            flat[i] = old
            numeric.reshape(-1)[i] = (up - down) / (2 * eps)
        scale = max(np.abs(numeric).max(), np.abs(analytic).max(), 1e-8)
        worst = max(worst, float(np.abs(numeric - analytic).max() / scale))
    return worst


def leaf(shape, seed=0, low=-1.0, high=1.0):
    data = np.random.default_rng(seed).uniform(low, high, size=shape)
    return Tensor(data, requires_grad=True, dtype=np.float64)


@pytest.fixture(scope="session")
def mnist_path():
    if not (MNIST / "train-images-idx3-ubyte.gz").exists():
        pytest.skip("MNIST files not present under data/mnist")
    return MNIST


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
