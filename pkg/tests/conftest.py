import numpy as np
import pandas as pd
import pytest

from condtab.schema import ColumnSpec, DataTable, TableSchema


@pytest.fixture
def small_schema():
    return TableSchema((
        ColumnSpec("lat", "numerical", always_observed=True),
        ColumnSpec("sqft", "numerical", dependencies=("btype",)),
        ColumnSpec("btype", "categorical", ("SFD", "SFA", "MF")),
        ColumnSpec("fuel", "categorical", ("Electricity", "Gas"), dependencies=("lat",)),
    ))


@pytest.fixture
def small_table(small_schema):
    rng = np.random.default_rng(0)
    n = 200
    btype = rng.choice(["SFD", "SFA", "MF"], size=n)
    frame = pd.DataFrame({
        "lat": rng.choice([30.0, 40.0], size=n),
        "sqft": 1500 + 500 * (btype == "SFD") + rng.normal(0, 100, size=n),
        "btype": btype,
        "fuel": rng.choice(["Electricity", "Gas"], size=n),
    })
    return DataTable(small_schema, frame)


def pytest_terminal_summary(terminalreporter):
    """Echo one PASS/FAIL line per acceptance criterion that ran."""
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(results):
        ok, detail = results[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'} | {detail}")
