import copy
from importlib import resources

import pytest

from cyres.scenario import parse_scenario, scenario_from_dict


def scenario_dict(**sections):
    """Minimal scenario document; keyword sections replace the defaults."""
    doc = {
        "fleet": {"n": 4},
        "threats": [],
        "run": {"horizon": 10, "dt": 0.5, "seed": 0},
    }
    for key, value in sections.items():
        doc[key] = copy.deepcopy(value)
    return doc


def make_scenario(**sections):
    return scenario_from_dict(scenario_dict(**sections))


def figure2_bytes() -> bytes:
    return resources.files("cyres").joinpath("scenarios/figure2.json").read_bytes()


@pytest.fixture
def figure2():
    return parse_scenario(figure2_bytes())
