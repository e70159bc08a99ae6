import numpy as np
import pytest

from cipsim import engine, learning
from cipsim.dynamics import trivial_state
from cipsim.params import CipParams, ImpulseParams, SimulationSettings

# Sub-box of the standard measurement box (roughly the envelope reached by
# disturbances up to Q = 0.03) used for desk-scale learning runs.
DESK_BOX = (
    (-0.065, 0.215),
    (-1.64, 5.29),
    (-0.175, 0.155),
    (-1.9, 2.575),
)

# Disturbed standing trials quiet down only around 25-36 s, so desk-scale
# runs use a 40 s horizon (the library default stays at 20 s).
LONG = SimulationSettings(t_end=40.0)


@pytest.fixture(scope="session")
def params():
    return CipParams()


@pytest.fixture(scope="session")
def impulse():
    return ImpulseParams()


@pytest.fixture(scope="session")
def settings():
    return SimulationSettings(t_end=40.0)


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels(params):
    # force numba compilation outside of any timed test
    engine.run(trivial_state(), params, SimulationSettings(t_end=0.01))


@pytest.fixture(scope="session")
def table_m3(params, impulse):
    grid = learning.GridSpec.uniform(DESK_BOX, 3)
    return learning.learn_table(grid, params, impulse, LONG)


@pytest.fixture(scope="session")
def table_m5(params, impulse):
    grid = learning.GridSpec.uniform(DESK_BOX, 5)
    return learning.learn_table(grid, params, impulse, LONG)


@pytest.fixture(scope="session")
def table_m10(params, impulse):
    grid = learning.GridSpec.uniform(DESK_BOX, 10)
    return learning.learn_table(grid, params, impulse, LONG)


def make_synthetic_table(labels4d, bounds=DESK_BOX):
    """Table with hand-set labels, for lookup tests that need no learning."""
    labels4d = np.asarray(labels4d, dtype=np.uint8)
    grid = learning.GridSpec(
        tuple(b[0] for b in bounds),
        tuple(b[1] for b in bounds),
        labels4d.shape,
    )
    return learning.ClassifierTable(grid=grid, labels=labels4d, provenance={})
