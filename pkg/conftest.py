import argparse

import numpy as np
import pytest

from hilbert import HilbertSpace


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def qubit():
    return HilbertSpace.qubit()


@pytest.fixture
def fock():
    return HilbertSpace.fock(8)


@pytest.fixture
def grid():
    """Small periodic grid, x_min on the lattice so translations wrap exactly."""
    return HilbertSpace.grid1d(16, 0.5, x_min=-4.0)


@pytest.fixture
def run_args(tmp_path):
    return argparse.Namespace(hbar=1.0, seed=0, workers=1, rel_tol=1e-8, output_dir=str(tmp_path),
                              print_freq=None)
