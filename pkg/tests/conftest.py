import numpy as np
import pytest

from idnc_video.video import LayeredGop

# SFMs from the worked examples; receivers and packets are 0-based here.
EXAMPLE1_F = np.array([[1, 0, 1, 1, 1], [0, 1, 1, 0, 0]], dtype=bool)
EXAMPLE1_GOP = LayeredGop((2, 2, 1))

TWO_LAYER_F = np.array([[0, 1], [1, 1]], dtype=bool)
TWO_LAYER_GOP = LayeredGop((1, 1))

WINDOWS_F = np.array([[0, 0, 1, 1, 1, 1], [0, 0, 1, 0, 0, 1]], dtype=bool)
WINDOWS_GOP = LayeredGop((2, 2, 1, 1))


def random_instance(rng: np.random.Generator, max_receivers: int = 5, max_packets: int = 8):
    """Random SFM, layer split, erasure vector and remaining-slot count for oracle checks."""
    M = int(rng.integers(1, max_receivers + 1))
    N = int(rng.integers(1, max_packets + 1))
    L = int(rng.integers(1, N + 1))
    cuts = np.sort(rng.choice(np.arange(1, N), size=L - 1, replace=False)) if L > 1 else np.array([], int)
    sizes = np.diff(np.concatenate([[0], cuts, [N]]))
    gop = LayeredGop(tuple(int(s) for s in sizes))
    F = rng.random((M, N)) < rng.uniform(0.2, 0.9)
    eps = rng.uniform(0.0, 0.6, size=M)
    Q = int(rng.integers(1, N + 2))
    return F, gop, eps, Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
