import pytest

from flowdiag.acceptance import CHECKS, selftest


@pytest.mark.parametrize("name", list(CHECKS))
def test_acceptance_check_passes(name):
    table = selftest([name])

    assert list(table["check"]) == [name]
    row = table.iloc[0]
    assert row["passed"], row["detail"]


def test_selftest_table_columns():
    table = selftest(["quadratic_spectrum_identity"])

    assert list(table.columns) == ["check", "passed", "detail"]
    assert "max spectrum deviation" in table.iloc[0]["detail"]
