import numpy as np
import pytest

import gplfm

# Ten-storey shear building used throughout: m = 200 kg, k = 5e5 N/m,
# C = 0.1 M + 0.0005 K.
BUILDING_MASS = 200.0
BUILDING_STIFFNESS = 5.0e5
BUILDING_RAYLEIGH = (0.1, 0.0005)

EXPECTED_FREQUENCIES_HZ = np.array(
    [1.19, 3.54, 5.81, 7.96, 9.92, 11.67, 13.15, 14.34, 15.21, 15.74]
)
EXPECTED_DAMPING_PCT = np.array(
    [0.86, 0.78, 1.05, 1.35, 1.64, 1.90, 2.13, 2.31, 2.44, 2.52]
)


@pytest.fixture(scope="session")
def building():
    return gplfm.build_shear_building(
        [BUILDING_MASS] * 10,
        [BUILDING_STIFFNESS] * 10,
        rayleigh=BUILDING_RAYLEIGH,
        load_dofs=[9],
    )


@pytest.fixture(scope="session")
def building_seismic():
    return gplfm.build_shear_building(
        [BUILDING_MASS] * 10,
        [BUILDING_STIFFNESS] * 10,
        rayleigh=BUILDING_RAYLEIGH,
        ground_motion=True,
    )


@pytest.fixture(scope="session")
def all_accel_sensors():
    return gplfm.SensorLayout.from_dofs(10, accelerations=range(10))


@pytest.fixture(scope="session")
def building_ssm(building, all_accel_sensors):
    return gplfm.assemble_continuous_ssm(building, all_accel_sensors)


@pytest.fixture(scope="session")
def sdof():
    """1-dof system with a collocated force input."""
    return gplfm.build_shear_building(
        [1.0], [50.0], rayleigh=(0.2, 0.001), load_dofs=[0]
    )


@pytest.fixture(scope="session")
def sdof_ssm(sdof):
    sensors = gplfm.SensorLayout.from_dofs(1, accelerations=[0])
    return gplfm.assemble_continuous_ssm(sdof, sensors)


@pytest.fixture
def default_prior():
    def make(n_s):
        return gplfm.GaussianBelief(np.zeros(n_s), 1e-10 * np.eye(n_s))

    return make
