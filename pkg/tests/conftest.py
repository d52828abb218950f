import numpy as np
import pytest

from seqbind import kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Pay any JIT compilation cost once, before timed assertions run."""
    kernels.warmup()


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    previous = kernels.set_backend(request.param)
    yield request.param
    kernels.set_backend(previous)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
