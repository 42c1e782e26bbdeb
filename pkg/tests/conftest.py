import numpy as np
import pytest

from sparsepat.model import BlockRealization, make_spec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def noiseless(block: BlockRealization) -> BlockRealization:
    return BlockRealization(block.support_index, block.taps_nz, np.zeros_like(block.noise_freq))


def desk_spec(snr_db=20.0, **kw):
    """N=7, L=4, S=2 with the given overrides."""
    return make_spec(**{"n_block": 7, "l_taps": 4, "s_sparsity": 2, "snr_db": snr_db, **kw})


def within_se(sample, target, k=3.0):
    x = np.asarray(sample, dtype=float)
    se = x.std(ddof=1) / np.sqrt(x.size)
    return abs(x.mean() - target) <= k * se, (x.mean(), se)
