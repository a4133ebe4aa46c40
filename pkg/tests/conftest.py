import numpy as np
import pytest

from gatefid import builtin_ensemble, noise_preset


@pytest.fixture(scope="session")
def clifford():
    return builtin_ensemble("clifford1q")


@pytest.fixture(scope="session")
def pauli():
    return builtin_ensemble("pauli1q")


@pytest.fixture(scope="session")
def preset_channels_d2():
    return [
        noise_preset("depolarizing", (0.2,), 2),
        noise_preset("dephasing", (0.3,), 2),
        noise_preset("over_rotation", ("z", 0.35), 2),
        noise_preset("amplitude_damping", (0.15,), 2),
        noise_preset("identity", (), 2),
    ]


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240811))
