import pytest

import pdmsusy as pm

DELTA_E = 1.0


@pytest.fixture(scope="session")
def cosine_system():
    profile = pm.cosine_profile(1.15)
    grid = pm.auto_grid(profile, DELTA_E, n_points=4001)
    return pm.build_ladder_system(profile, grid, DELTA_E)


@pytest.fixture(scope="session")
def constant_system():
    profile = pm.constant_profile(1.0)
    grid = pm.auto_grid(profile, DELTA_E, n_points=4001)
    return pm.build_ladder_system(profile, grid, DELTA_E)


@pytest.fixture(scope="session")
def quadratic_system():
    profile = pm.quadratic_profile(0.15)
    grid = pm.auto_grid(profile, DELTA_E, n_points=4001)
    return pm.build_ladder_system(profile, grid, DELTA_E)


@pytest.fixture(scope="session")
def linear_system():
    profile = pm.linear_profile()
    grid = pm.auto_grid(profile, DELTA_E, n_points=4001)
    return pm.build_ladder_system(profile, grid, DELTA_E)


@pytest.fixture(scope="session")
def cosine_first_transform(cosine_system):
    u1, du1 = pm.closed_form_state(cosine_system, 1)
    return pm.first_order_transform(cosine_system, u1, 1.5 * DELTA_E, du1)


@pytest.fixture(scope="session")
def cosine_second_transform(cosine_system):
    u1, du1 = pm.closed_form_state(cosine_system, 1)
    u2, du2 = pm.closed_form_state(cosine_system, 2)
    return pm.second_order_nonconfluent(
        cosine_system, u1, 1.5 * DELTA_E, u2, 2.5 * DELTA_E, du1, du2
    )
