"""Shared fixtures: the worked examples every module gets tested against."""

import numpy as np
import pytest

from ssmkit import (oscillator_chain, lorenz_extended, master_spectrum,
                    compute_manifold)

CHAIN_F0 = np.array([-0.386, -0.587, -0.521, -0.243, 0.095,
                     0.335, 0.402, 0.323, 0.188, 0.075])


@pytest.fixture(scope="session")
def chain10():
    return oscillator_chain(10, m=1.0, k=1.0, c=0.1, kappa=0.3)


@pytest.fixture(scope="session")
def chain10_forced():
    return oscillator_chain(10, m=1.0, k=1.0, c=0.1, kappa=0.3,
                            forcing_amplitude=CHAIN_F0, eps=0.1)


@pytest.fixture(scope="session")
def lorenz_master():
    sys = lorenz_extended()
    ms = master_spectrum(sys, select={"mode": "indices", "indices": [0, 1]},
                         n_outer=2)
    return sys, ms


@pytest.fixture(scope="session")
def lorenz_man3(lorenz_master):
    sys, ms = lorenz_master
    return compute_manifold(sys, ms, order=3, style="normal-form")


@pytest.fixture(scope="session")
def chain_mode2_master(chain10_forced):
    ms = master_spectrum(chain10_forced,
                         select={"mode": "pair", "pair": 2}, n_outer=8)
    return ms


@pytest.fixture(scope="session")
def chain_mode2_man5(chain10_forced, chain_mode2_master):
    return compute_manifold(chain10_forced, chain_mode2_master, order=5,
                            style="normal-form")
