import math

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condtab.masking import MaskPair, draw_masks, mask_from_missing, masked_count, partition
from condtab.schema import ColumnSpec, DataError, DataTable, TableSchema


def wide_schema(n_cat=31):
    cols = [ColumnSpec("lat", "numerical", always_observed=True),
            ColumnSpec("lon", "numerical", always_observed=True),
            ColumnSpec("sqft", "numerical"), ColumnSpec("kwh", "numerical")]
    cols += [ColumnSpec(f"c{i}", "categorical", ("a", "b", "c")) for i in range(n_cat)]
    return TableSchema(tuple(cols))


def test_small_cap_masks_one_or_two_of_31():
    schema = wide_schema()
    rng = np.random.default_rng(0)
    counts = {int((1 - draw_masks(8, schema, 0.5, 0.05, rng).mask_cat[0]).sum()) for _ in range(500)}
    assert counts == {1, 2}


def test_zero_cap_never_masks_numericals():
    m = draw_masks(16, wide_schema(), 0.0, 0.2, np.random.default_rng(1))
    assert np.all(m.mask_num == 1)


def test_always_observed_never_masked():
    schema = wide_schema(3)
    rng = np.random.default_rng(2)
    lat_lon = np.concatenate([draw_masks(100, schema, 1.0, 1.0, rng).mask_num[:, :2] for _ in range(100)])
    assert lat_lon.shape[0] == 10_000 and np.all(lat_lon == 1)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 64), st.floats(0.0, 1.0), st.floats(0.0, 1.0), st.integers(0, 2**32 - 1))
def test_equal_counts_per_row(batch, f_num, f_cat, seed):
    schema = wide_schema(5)
    m = draw_masks(batch, schema, f_num, f_cat, np.random.default_rng(seed))
    num_masked = (m.mask_num == 0).sum(axis=1)
    cat_masked = (m.mask_cat == 0).sum(axis=1)
    assert len(set(num_masked)) == 1 and len(set(cat_masked)) == 1
    assert num_masked[0] <= max(math.ceil(f_num * 2), 1 if f_num > 0 else 0)
    assert (cat_masked[0] >= 1) == (f_cat > 0)
    assert np.all(m.mask_num[:, :2] == 1)


def test_identities_vary_per_row():
    m = draw_masks(200, wide_schema(10), 0.5, 0.1, np.random.default_rng(3))
    assert len({tuple(r) for r in m.mask_cat}) > 1


def test_masked_count_rule():
    assert masked_count(0.01, 31) == 1
    assert masked_count(0.05, 31) == 2
    assert masked_count(1.0, 4) == 4


def test_no_maskable_columns_with_positive_cap():
    schema = TableSchema((ColumnSpec("lat", "numerical", always_observed=True),
                          ColumnSpec("c", "categorical", ("a", "b"))))
    with pytest.raises(ValueError):
        draw_masks(4, schema, 0.5, 0.2, np.random.default_rng(0))
    assert np.all(draw_masks(4, schema, 0.0, 0.2, np.random.default_rng(0)).mask_num == 1)


def test_partition_identities(small_schema):
    rng = np.random.default_rng(4)
    x = rng.normal(size=(5, 2 + 5))
    ones = MaskPair(np.ones((5, 2)), np.ones((5, 2)))
    cond, target = partition(x, ones, small_schema)
    np.testing.assert_array_equal(cond, x)
    np.testing.assert_array_equal(target, 0)
    zeros = MaskPair(np.array([[1.0, 0.0]] * 5), np.zeros((5, 2)))
    cond, target = partition(x, zeros, small_schema)
    np.testing.assert_array_equal(cond[:, 1:], 0)
    np.testing.assert_array_equal(cond[:, 0], x[:, 0])
    m = draw_masks(5, small_schema, 1.0, 1.0, rng)
    cond, target = partition(x, m, small_schema)
    np.testing.assert_array_equal(cond + target, x)


def test_mask_from_missing(small_schema, small_table):
    m = mask_from_missing(small_table)
    assert np.all(m.mask_num == 1) and np.all(m.mask_cat == 1)
    holed = small_table.copy()
    holed.frame.loc[3, "btype"] = None
    holed.frame.loc[4, "sqft"] = np.nan
    m = mask_from_missing(holed)
    assert m.mask_cat[3].tolist() == [0, 1]
    assert m.mask_num[4].tolist() == [1, 0]
    holed.frame.loc[5, "lat"] = np.nan
    with pytest.raises(DataError):
        mask_from_missing(holed)


def test_row_with_nothing_observed():
    schema = TableSchema((ColumnSpec("a", "numerical"), ColumnSpec("b", "categorical", ("x", "y"))))
    table = DataTable(schema, pd.DataFrame({"a": [np.nan], "b": [None]}))
    with pytest.raises(DataError):
        mask_from_missing(table)
