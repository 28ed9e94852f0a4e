import pytest

from heatdec import _kernels


@pytest.fixture(scope="session", autouse=True)
def compiled_kernels() -> None:
    # compile once up front so timed tests never include JIT latency
    _kernels.warmup()
