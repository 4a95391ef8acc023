import numpy as np
import pytest

from nicepdn.circuits import BranchSet, PiNetwork, RlcBranch


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_passive_y(rng, n_freqs=5, n_ports=2):
    """Random symmetric positive-real Y samples on a log grid.

    Conductance part is built as A A^T + margin*I so every sample is safely
    passive; susceptance is symmetric but otherwise free.
    """
    freqs = np.geomspace(1e3, 1e9, n_freqs)
    data = np.empty((n_freqs, n_ports, n_ports), dtype=complex)
    for k in range(n_freqs):
        a = rng.normal(size=(n_ports, n_ports)) * 0.05
        g = a @ a.T + 0.01 * np.eye(n_ports)
        b = rng.normal(size=(n_ports, n_ports)) * 0.05
        data[k] = g + 1j * (b + b.T) / 2.0
    return freqs, data


@pytest.fixture
def default_pi():
    cap = BranchSet(
        [RlcBranch(r=5e-3, l=2e-9, c=100e-6), RlcBranch(r=2e-3, l=0.5e-9, c=1e-6)]
    )
    return PiNetwork(
        ya=cap, yb=BranchSet([RlcBranch(r=10e-3, l=5e-9)]), yc=cap
    )
