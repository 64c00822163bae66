from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def neutral_corpus() -> list[tuple[str, str]]:
    """(input, hand-verified expected output) rows of the annotated corpus."""
    rows = []
    for line in (FIXTURES / "neutral_corpus.tsv").read_text(encoding="utf-8").splitlines():
        source, expected = line.split("\t")
        rows.append((source, expected))
    return rows
