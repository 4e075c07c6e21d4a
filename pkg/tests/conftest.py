import pytest

from convergence.series import SeriesFamily, SeriesSpec
from convergence.workspace import ScalarMode
from runner import db


@pytest.fixture
def alternating_harmonic():
    return SeriesSpec(SeriesFamily.ALTERNATING_HARMONIC)


@pytest.fixture
def coordinate_decay():
    return SeriesSpec(SeriesFamily.COORDINATE_DECAY, alpha=1.0)


@pytest.fixture
def exact_alternating_harmonic():
    return SeriesSpec(SeriesFamily.ALTERNATING_HARMONIC, mode=ScalarMode.EXACT_RATIONAL)


@pytest.fixture
def write_file(tmp_path):
    """Write text into a fresh file under tmp_path and return its path as str."""
    counter = {"n": 0}

    def _write(text: str, name: str = None) -> str:
        counter["n"] += 1
        path = tmp_path / (name or f"input_{counter['n']}.txt")
        path.write_text(text)
        return str(path)

    return _write


@pytest.fixture
def ledger(tmp_path, monkeypatch):
    """Point the run ledger at a throwaway SQLite file."""
    url = f"sqlite:///{tmp_path / 'ledger' / 'runs.db'}"
    monkeypatch.setattr(db, "DATABASE_URL", url)
    monkeypatch.setattr(db, "_initialized_url", None)
    yield url
    monkeypatch.setattr(db, "_initialized_url", None)
