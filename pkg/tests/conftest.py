import pytest

from reeb_ldp import (builtin_system, find_critical_points, build_reeb_graph,
                      tabulate_all, build_geometries)


@pytest.fixture(scope="session")
def harmonic():
    return builtin_system("harmonic")


@pytest.fixture(scope="session")
def harmonic_cps(harmonic):
    return find_critical_points(harmonic)


@pytest.fixture(scope="session")
def harmonic_graph(harmonic, harmonic_cps):
    return build_reeb_graph(harmonic, harmonic_cps)


@pytest.fixture(scope="session")
def harmonic_tables(harmonic, harmonic_graph):
    return tabulate_all(harmonic, harmonic_graph)


@pytest.fixture(scope="session")
def harmonic_geos(harmonic_tables):
    return build_geometries(harmonic_tables)


@pytest.fixture(scope="session")
def doublewell():
    return builtin_system("doublewell")


@pytest.fixture(scope="session")
def doublewell_cps(doublewell):
    return find_critical_points(doublewell)


@pytest.fixture(scope="session")
def doublewell_graph(doublewell, doublewell_cps):
    return build_reeb_graph(doublewell, doublewell_cps)


@pytest.fixture(scope="session")
def doublewell_tables(doublewell, doublewell_graph):
    return tabulate_all(doublewell, doublewell_graph)
