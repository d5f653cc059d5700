import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_instance(values, demands, b):
    from jdp_pack.instance import PackingInstance

    return PackingInstance(
        values=np.asarray(values, dtype=float),
        demands=np.asarray(demands, dtype=float),
        b=float(b),
    )
