import numpy as np
import pytest

from lewislp import _kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compile the descent kernel once so timed tests measure math, not LLVM.
    _kernels.warmup()


def gauss(m, n, seed):
    return np.random.default_rng(seed).standard_normal((m, n))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
