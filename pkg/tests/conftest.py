from importlib import resources
from pathlib import Path

import numpy as np
import pytest

from draftlmt.dataset import from_arrays, load_dataset
from draftlmt.synthetic import two_regime
from draftlmt.tree import ModelTree, TreeConfig, train

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_csv() -> Path:
    return Path(str(resources.files("draftlmt") / "data" / "synthetic_draft.csv"))


@pytest.fixture(scope="session")
def fixture_config() -> Path:
    return Path(str(resources.files("draftlmt") / "data" / "synthetic.json"))


@pytest.fixture(scope="session")
def draft_data(fixture_csv):
    data, report = load_dataset(fixture_csv)
    return data


@pytest.fixture(scope="session")
def two_regime_data():
    X, y, p = two_regime(4000, seed=1)
    return from_arrays(X, y), p


@pytest.fixture(scope="session")
def two_regime_tree(two_regime_data):
    data, _ = two_regime_data
    return train(data, TreeConfig())


@pytest.fixture(scope="session")
def hand_tree() -> ModelTree:
    return ModelTree.from_json((DATA / "hand_tree.json").read_text())


def write_csv(path: Path, header: list[str], rows: list[list]) -> Path:
    lines = [",".join(header)] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# --------------------------------------------------------------------------- acceptance report

ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k.split()[0])):
        status, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"[{status}] criterion {key}: {detail}")
