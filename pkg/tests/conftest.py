import numpy as np
import pytest

from heaptrees import kernels


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=["compiled", "pure"])
def backend(request):
    if request.param == "compiled":
        if kernels.BACKEND != "compiled":
            pytest.skip("compiled extension not built")
        from heaptrees import _kernels
        return _kernels
    from heaptrees import _pure
    return _pure
