"""Shared fixtures: the shipped scheme files, an isolated config home and goldens."""

from pathlib import Path

import pytest

from multisub.config import ENV_VARS
from multisub.formats import load_scheme
from multisub.scheme import SchemeSet, SubdivisionOp

SCHEMES_DIR = Path(__file__).resolve().parent.parent / "schemes"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"


def scheme_file(name: str) -> Path:
    return SCHEMES_DIR / f"{name}.json"


@pytest.fixture(scope="session")
def example_i() -> SchemeSet:
    return load_scheme(scheme_file("example_i"))


@pytest.fixture(scope="session")
def example_ii() -> SchemeSet:
    return load_scheme(scheme_file("example_ii"))


@pytest.fixture(scope="session")
def ex_mult1() -> SchemeSet:
    return load_scheme(scheme_file("ex_mult1"))


@pytest.fixture(scope="session")
def ex_mult2() -> SchemeSet:
    return load_scheme(scheme_file("ex_mult2"))


@pytest.fixture(scope="session")
def ex_v0() -> SchemeSet:
    return load_scheme(scheme_file("ex_v0_neq_v0bar"))


@pytest.fixture(scope="session")
def sqrt3() -> SchemeSet:
    return load_scheme(scheme_file("sqrt3"))


@pytest.fixture(scope="session")
def haar() -> SchemeSet:
    return SchemeSet.of([SubdivisionOp.build({0: 1, 1: 1}, 2)])


@pytest.fixture(autouse=True)
def isolated_home(tmp_path, monkeypatch):
    """Point the config directory at a temporary path and clear overrides."""
    for var in ENV_VARS:
        monkeypatch.delenv(var, raising=False)
    home = tmp_path / "multisub-home"
    monkeypatch.setenv("MULTISUB_HOME", str(home))
    return home


@pytest.fixture
def golden():
    """
    Compare a value with tests/golden/<name>.

    Goldens are committed files; a missing one fails the test.
    """

    def check(name: str, value: str) -> None:
        path = GOLDEN_DIR / name
        if not path.exists():
            pytest.fail(f"missing golden file {path}")
        assert path.read_text().strip() == value

    return check
