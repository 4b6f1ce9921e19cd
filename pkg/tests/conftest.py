import numpy as np
import pytest

from locbeam.geometry import (
    SPEED_OF_LIGHT,
    ArrayGeometry,
    ChannelParams,
    PathLossParams,
    build_bs_ris_channel,
    reconstruct_ris_ue_los,
)

P_HAT = (10.0, 5.0, 18.0)
WAVELENGTH = SPEED_OF_LIGHT / 60e9


def random_channel(rng, N, M, scale=1.0):
    H = scale * (rng.standard_normal((N, M)) + 1j * rng.standard_normal((N, M))) / np.sqrt(2)
    h = scale * (rng.standard_normal(N) + 1j * rng.standard_normal(N)) / np.sqrt(2)
    return H, h


def random_theta(rng, N, beta=1.0):
    return beta * np.exp(2j * np.pi * rng.random(N))


def reference_channels(L):
    g = ArrayGeometry.reference(L=L)
    pl = PathLossParams()
    H = build_bs_ris_channel(g, pl, WAVELENGTH)
    h = reconstruct_ris_ue_los(g, pl, WAVELENGTH, P_HAT)
    return g, H, h


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def params():
    return ChannelParams.from_carrier(60e9)


@pytest.fixture(scope="session")
def pl():
    return PathLossParams()


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
