import numpy as np
import pytest

from fhbeam.network import ChannelSet, SystemConfig, complex_normal, dbm_to_watt, generate_channels

# lines printed by test_acceptance, reported once at the end of the session
ACCEPTANCE_LINES: list[str] = []

DESK_SEED = 0


def desk_config(M=32, K=3, N=2, d=2, L=1, **kw):
    """Small instance at 20 dBm budget and -80 dBm noise with the standard path-loss model."""
    return SystemConfig(L, M, N, d, K, noise_power=dbm_to_watt(-80), power_budget=dbm_to_watt(20), **kw)


def worked_example():
    """M = N = d = K = 1, H = 1, sigma^2 = 1, P = 4; the precoder V = 2 meets the budget."""
    cfg = SystemConfig(1, 1, 1, 1, 1, noise_power=1.0, power_budget=4.0)
    ch = ChannelSet(np.ones((1, 1, 1, 1, 1), complex), cfg)
    V = np.full((1, 1, 1, 1), 2.0 + 0j)
    return ch, V


def random_instance(rng, L=1, K=3, M=16, N=2, d=2, snr=10.0, weights=True):
    """Unit-gain Rayleigh channels with random weights and random (unnormalized) precoders."""
    w = tuple(rng.uniform(0.5, 2.0, L * K)) if weights else 1.0
    cfg = SystemConfig(L, M, N, d, K, noise_power=1.0, power_budget=snr, weights=w)
    ch = ChannelSet(complex_normal(rng, (L, K, L, N, M)), cfg)
    V = complex_normal(rng, (L, K, M, d)) * rng.uniform(0.2, 3.0)
    return ch, V


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_channels():
    return generate_channels(desk_config(), DESK_SEED)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
