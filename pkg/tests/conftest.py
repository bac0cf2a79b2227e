import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eivdc.data_model import PanelData
from eivdc.dgp import DgpConfig, generate_panel

settings.register_profile(
    "ci", derandomize=True, max_examples=50,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ci")


@pytest.fixture
def rng():
    return np.random.default_rng(20240816)


@pytest.fixture
def tiny_panel():
    """Three firms, three years, hand-written values."""
    return PanelData(
        firm_id=np.array([0, 0, 1, 1, 1, 2, 2]),
        year=np.array([1, 2, 1, 2, 3, 2, 3]),
        y=np.array([1.0, 3.0, 2.0, 4.0, 6.0, 5.0, 7.0]),
        x=np.array([0.5, 1.5, 1.0, 2.0, 3.0, 2.5, 3.5]),
        z=np.array([[1.0], [2.0], [1.5], [2.5], [3.5], [3.0], [4.0]]),
    )


@pytest.fixture(scope="session")
def desk_panel():
    """One simulated desk-scale panel (n=500, T=5, slope 0.025)."""
    return generate_panel(DgpConfig(n=500, T=5, beta=0.025, seed=424242)).to_panel()
