import numpy as np
import pytest

from gridlight import Catalog, Engine
from gridlight.fixtures import axis_values, generate_fixture, write_tabular_fixture

ERA_VARS = "t:coord-sum,cc:sinusoidal,q:coord:lat,o3:coord:lon,u:constant:3,v:constant:4"


@pytest.fixture(scope="session")
def era24(tmp_path_factory):
    """24 hourly files of 1 x 73 x 144 with six equal-sized variables."""
    out = tmp_path_factory.mktemp("era24")
    return generate_fixture(out, "time:1,lat:73,lon:144", 24, ERA_VARS)


@pytest.fixture(scope="session")
def quarter_grid(tmp_path_factory):
    """Quarter-degree grid matching the query examples."""
    out = tmp_path_factory.mktemp("quarter")
    return generate_fixture(out, "time:1,lat:721,lon:1440", 2, "sp")


@pytest.fixture(scope="session")
def small_grid(tmp_path_factory):
    """Eight files of 2 x 19 x 36, small enough for brute force."""
    out = tmp_path_factory.mktemp("small")
    return generate_fixture(out, "time:2,lat:19,lon:36", 8, "t:sinusoidal,sp:coord-sum")


@pytest.fixture(scope="session")
def subbox_csv(tmp_path_factory):
    """Tabular rows on a 6-hour x 29-lat x 144-lon sub-box of era24 (~10% of its cells)."""
    path = tmp_path_factory.mktemp("tab") / "nao.csv"
    write_tabular_fixture(path, range(4, 10), axis_values("lat", 73)[20:49], axis_values("lon", 144))
    return str(path)


@pytest.fixture()
def catalog(era24, quarter_grid, small_grid, subbox_csv):
    cat = Catalog()
    cat.register_grid_dataset("era", era24, ["time"])
    cat.register_grid_dataset("era_b", quarter_grid, ["time"])
    cat.register_grid_dataset("small", small_grid, ["time"])
    cat.register_tabular_dataset("nao", [subbox_csv], [("time", "timestamp"), ("lat", "f64"),
                                                      ("lon", "f64"), ("val", "f64")])
    return cat


@pytest.fixture()
def engine(catalog):
    return Engine(catalog, workers=2)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[number])
    passed = sum(line.startswith("PASS") for line in RESULTS.values())
    terminalreporter.write_line(f"{passed}/{len(RESULTS)} criteria passed")
