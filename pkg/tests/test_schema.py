import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condtab.schema import (ColumnSpec, DataError, DataTable, SchemaError, TableSchema, load_csv, load_schema,
                            save_schema, split, split_sizes, write_csv)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def two_col_schema(missing=""):
    return TableSchema((ColumnSpec("sqft", "numerical"),
                        ColumnSpec("fuel", "categorical", ("Electricity", "Natural Gas"))), missing)


def test_load_three_valid_rows(tmp_path):
    p = write(tmp_path / "d.csv", "sqft,fuel\n1200,Electricity\n900.5,Natural Gas\n1500,Electricity\n")
    table = load_csv(p, two_col_schema())
    assert len(table) == 3
    assert table.frame["sqft"].tolist() == [1200.0, 900.5, 1500.0]


def test_header_order_does_not_matter(tmp_path):
    p = write(tmp_path / "d.csv", "fuel,sqft\nElectricity,1\n")
    table = load_csv(p, two_col_schema())
    assert table.frame.columns.tolist() == ["sqft", "fuel"]


def test_unknown_category_reports_coordinates(tmp_path):
    p = write(tmp_path / "d.csv", "sqft,fuel\n1,Electricity\n2,Propane\n")
    with pytest.raises(DataError) as err:
        load_csv(p, two_col_schema())
    assert err.value.row == 2 and err.value.column == "fuel"
    assert "Propane" in str(err.value)


def test_non_numeric_cell_reports_coordinates(tmp_path):
    p = write(tmp_path / "d.csv", "sqft,fuel\nabc,Electricity\n")
    with pytest.raises(DataError) as err:
        load_csv(p, two_col_schema())
    assert (err.value.row, err.value.column) == (1, "sqft")


@pytest.mark.parametrize("text", ["", "sqft,fuel,extra\n1,Electricity,3\n", "sqft\n1\n"])
def test_bad_headers(tmp_path, text):
    p = write(tmp_path / "d.csv", text)
    with pytest.raises(DataError):
        load_csv(p, two_col_schema())


def test_missing_sentinel(tmp_path):
    p = write(tmp_path / "d.csv", "sqft,fuel\nNA,Electricity\n3,NA\n")
    table = load_csv(p, two_col_schema(missing="NA"))
    assert table.missing_mask().tolist() == [[True, False], [False, True]]


def test_empty_cell_is_missing_by_default(tmp_path):
    p = write(tmp_path / "d.csv", "sqft,fuel\n,Electricity\n")
    assert load_csv(p, two_col_schema()).missing_mask()[0, 0]


def test_schema_validation():
    with pytest.raises(SchemaError):
        ColumnSpec("c", "categorical", ("a",))
    with pytest.raises(SchemaError):
        ColumnSpec("c", "categorical", ("a", "a"))
    with pytest.raises(SchemaError):
        TableSchema((ColumnSpec("a", "numerical", dependencies=("b",)),))
    with pytest.raises(SchemaError):
        TableSchema((ColumnSpec("a", "numerical", dependencies=("b",)),
                     ColumnSpec("b", "numerical", dependencies=("a",))))


def test_schema_file_round_trip(tmp_path, small_schema):
    save_schema(small_schema, tmp_path / "s.yaml")
    again = load_schema(tmp_path / "s.yaml")
    assert again == small_schema
    assert again.digest() == small_schema.digest()
    assert small_schema.n_num == 2 and small_schema.cat_widths == [3, 2]
    assert small_schema.n_num + len(small_schema.cat_widths) == len(small_schema.columns)


def test_split_sizes_example():
    assert split_sizes(10, (0.8, 0.1, 0.1)) == [8, 1, 1]


def test_split_is_deterministic_and_disjoint(small_table):
    a = split(small_table, (0.8, 0.1, 0.1), 7)
    b = split(small_table, (0.8, 0.1, 0.1), 7)
    for x, y in zip(a, b):
        pd.testing.assert_frame_equal(x.frame, y.frame)
    merged = pd.concat([p.frame for p in a]).sort_values(["lat", "sqft"]).reset_index(drop=True)
    original = small_table.frame.sort_values(["lat", "sqft"]).reset_index(drop=True)
    pd.testing.assert_frame_equal(merged, original)


@pytest.mark.parametrize("fractions", [(0.5, 0.5, 0.5), (1.0, 0.0, 0.0), (0.9, 0.05, 0.04)])
def test_split_rejects_bad_fractions(small_table, fractions):
    with pytest.raises(ValueError):
        split(small_table, fractions, 0)


def test_split_rejects_empty_table(small_schema):
    empty = DataTable(small_schema, pd.DataFrame({n: [] for n in small_schema.names}))
    with pytest.raises(DataError):
        split(empty, (0.8, 0.1, 0.1), 0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(allow_nan=False, allow_infinity=False, width=64),
                          st.sampled_from(["Electricity", "Natural Gas", None])), min_size=1, max_size=20))
def test_csv_round_trip(tmp_path_factory, rows):
    schema = two_col_schema()
    frame = pd.DataFrame({"sqft": [r[0] for r in rows], "fuel": [r[1] for r in rows]})
    table = DataTable(schema, frame)
    path = tmp_path_factory.mktemp("rt") / "t.csv"
    write_csv(table, path)
    again = load_csv(path, schema)
    assert again.frame["fuel"].tolist() == table.frame["fuel"].tolist()
    np.testing.assert_array_equal(again.frame["sqft"].to_numpy(), table.frame["sqft"].to_numpy())
