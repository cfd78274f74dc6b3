import pytest

from vrs_forge.synth import ScenarioSpec, build_scenario


@pytest.fixture(scope="session")
def scenario():
    return build_scenario(ScenarioSpec(epochs=20))


@pytest.fixture(scope="session")
def timeline(scenario):
    return scenario.timeline()
