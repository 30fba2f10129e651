import pytest

from hoirel import fixtures
from hoirel.weights import WeightBundle


@pytest.fixture(scope="session")
def spec():
    return fixtures.FixtureSpec()


@pytest.fixture(scope="session")
def table(spec):
    return fixtures.category_table(spec)


@pytest.fixture(scope="session")
def config(spec, table):
    return fixtures.engine_config(spec, table)


@pytest.fixture(scope="session")
def bank(spec, table):
    return fixtures.knowledge_bank(spec, table)


@pytest.fixture(scope="session")
def weights(config):
    return WeightBundle(fixtures.generate_weights(11, config))


@pytest.fixture()
def scene(spec, table):
    return fixtures.generate_scene(11, 0, spec, table)
