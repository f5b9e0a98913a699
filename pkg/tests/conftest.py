"""Test configuration for pytest."""

import sys
from pathlib import Path

import pytest

# Add src to path
root_dir = Path(__file__).parent.parent
sys.path.insert(0, str(root_dir))

from src.core.model import Variable  # noqa: E402
from src.formats.instance_format import load_instance, parse_instance  # noqa: E402

INSTANCES_DIR = root_dir / "instances"

QBF_FALSE = "FORMULA\n(exists x (forall y (and (clause x y) (clause -x y))))\n"
QBF_TRUE = "FORMULA\n(forall y (exists x (and (clause x y) (clause -x -y))))\n"
NONPRENEX = "FORMULA\n(exists x (and (forall y (clause x y)) (forall z (clause -x z))))\n"


@pytest.fixture
def instances_dir():
    return INSTANCES_DIR


@pytest.fixture
def ex33():
    """exists x. forall y. (E(x,y) and exists x. E(x,y)) over the six-element structure."""
    return load_instance(INSTANCES_DIR / "ex33.qcsp")


@pytest.fixture
def false2():
    return load_instance(INSTANCES_DIR / "false2.qcsp")


@pytest.fixture
def x_var():
    return Variable("x", "e")


@pytest.fixture
def y_var():
    return Variable("y", "u")


@pytest.fixture
def qbf_false():
    """Indices: 1 exists x, 2 forall y, 3 and, 4 (x y), 5 (-x y)."""
    return parse_instance(QBF_FALSE)


@pytest.fixture
def qbf_true():
    return parse_instance(QBF_TRUE)


@pytest.fixture
def nonprenex():
    """Indices: 1 exists x, 2 and, 3 forall y, 4 (x y), 5 forall z, 6 (-x z)."""
    return parse_instance(NONPRENEX)
