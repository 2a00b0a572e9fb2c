from pathlib import Path

import pytest

from matsg.scenario import load_spec, parse_spec

ROOT = Path(__file__).resolve().parent
CORPUS = ROOT / "corpus"
SCENARIOS = ROOT.parent / "src" / "matsg" / "scenarios"


@pytest.fixture(scope="session")
def ued_spec():
    return load_spec(SCENARIOS / "ued.scen")


@pytest.fixture(scope="session")
def actions_spec():
    return load_spec(SCENARIOS / "actions.scen")


@pytest.fixture(scope="session")
def straight_spec():
    """One macro-controlled vehicle on an empty intersection, straight route."""
    return parse_spec(
        "scenario straight\nmap fourway\nego count 1\n"
        "param route in {straight}\nparam npc_count in 0..0\n"
        "bind ego.route = route\nbind npc.count = npc_count\n"
    )
