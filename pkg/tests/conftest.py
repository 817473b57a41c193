import numpy as np
import pytest

from chordkit.chords import default_vocabulary
from chordkit.net import ModelConfig, ModelParams


@pytest.fixture(scope="session")
def vocab():
    return default_vocabulary()


@pytest.fixture(scope="session")
def tiny_config():
    """Downsized dimensions for gradient checks (T <= 6, d <= 16)."""
    return ModelConfig(input_dim=8, num_heads=2, ffn_dim=16, num_layers=1,
                       depthwise_kernel=5, output_dim=100, cqt_bins=12,
                       dropout_rate=0.0, max_offset=8)


@pytest.fixture()
def tiny_params(tiny_config):
    rng = np.random.default_rng(1234)
    params = ModelParams(tiny_config, rng)
    # Perturb norm gains/shifts so their gradients are exercised at
    # non-default operating points.
    for name, tensor in params.tensors.items():
        if name.endswith((".g", ".b")) and not name.startswith("head"):
            tensor += rng.normal(0.0, 0.1, tensor.shape)
    return params
