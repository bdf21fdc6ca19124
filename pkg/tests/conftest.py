"""Test configuration for pytest"""

import sys
from pathlib import Path

import pytest
import structlog

# Add src directory to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.config import configure_logging  # noqa: E402
from src.ingestion.spec_loader import parse_spec  # noqa: E402
from src.models.automaton import LTA, Alphabet, GroundTransition, LambdaTransition  # noqa: E402
from src.models.lattice import Interval  # noqa: E402

SPECS_DIR = project_root / "specs"


@pytest.fixture(autouse=True)
def _fresh_logging():
    """Start every test from the default logging setup bound to its own stderr"""
    configure_logging()
    yield
    structlog.reset_defaults()


@pytest.fixture
def specs_dir() -> Path:
    return SPECS_DIR


@pytest.fixture
def unary_alphabet() -> Alphabet:
    return Alphabet.of({"f": 1, "g": 2, "nil": 0})


@pytest.fixture
def run_automaton(unary_alphabet) -> LTA:
    """[0,4] -> q1, f(q1) -> q2 with q2 final"""
    return LTA.build(
        unary_alphabet,
        [
            LambdaTransition(Interval(0, 4), "q1"),
            GroundTransition("f", ("q1",), "q2"),
        ],
        finals=["q2"],
    )


@pytest.fixture
def running_spec():
    return parse_spec(SPECS_DIR / "running.lta")


@pytest.fixture
def factorial_spec():
    return parse_spec(SPECS_DIR / "factorial.lta")


@pytest.fixture
def branches_spec():
    return parse_spec(SPECS_DIR / "branches.lta")
