import pytest

from slpkit.series import ingest
from slpkit.slp import aggregate
from slpkit.synth import SynthConfig, generate


@pytest.fixture(scope="session")
def noiseless_data():
    """Exact round-trip dataset: 100 households, no noise, hard switches."""
    cfg = SynthConfig.noiseless(n_households=100)
    series, gt = generate(cfg)
    scaled, reports = ingest(series)
    return cfg, gt, scaled, aggregate(scaled)


@pytest.fixture(scope="session")
def paper_data():
    """Paper-like dataset: 150 households, sliding 21-day transitions."""
    cfg = SynthConfig.paper_like(n_households=150, seed=0)
    series, gt = generate(cfg)
    scaled, reports = ingest(series)
    return cfg, gt, scaled, aggregate(scaled)
