"""Acceptance criteria: one PASS/FAIL line per criterion at the published
tolerances. A criterion the model cannot reach fails here on purpose."""
import pytest

from ewmirror.verify import run_checks

ROW_IDS = [
    "1", "2a", "2b", "3a", "3b", "3c", "3d", "4a", "4b", "5a", "5b", "5c",
    "6a", "6b", "6c", "6d", "7a", "7b", "7c", "7d", "8a", "8b", "8c",
    "9a", "9b", "9c", "10a", "10b", "11a", "11b", "12a", "12b", "12c",
]


@pytest.fixture(scope="module")
def rows():
    return {r.id: r for r in run_checks(threads=4)}


def test_every_criterion_reported(rows):
    assert sorted(rows) == sorted(ROW_IDS)


@pytest.mark.parametrize("row_id", ROW_IDS)
def test_criterion(rows, row_id, capsys):
    row = rows[row_id]
    with capsys.disabled():
        print("\n" + row.line())
    assert row.passed, row.line()
