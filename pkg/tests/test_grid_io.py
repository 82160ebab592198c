import json
import struct

import numpy as np
import pytest

from linedelta import (GridSpec, ScalarField, UsageError, read_field,
                       slice_csv_text, write_field)


def test_gridspec_validation():
    with pytest.raises(UsageError):
        GridSpec((0, 0, 0), 0.0, (4, 4, 4))
    with pytest.raises(UsageError):
        GridSpec((0, 0, 0), 0.1, (4, 4))          # origin/dims mismatch
    with pytest.raises(UsageError):
        GridSpec((0, 0, 0), 0.1, (1, 4, 4))
    with pytest.raises(UsageError):
        GridSpec((0, 0, 0, 0), 0.1, (4, 4, 4, 4))
    with pytest.raises(UsageError):
        GridSpec((np.inf, 0, 0), 0.1, (4, 4, 4))


def test_cell_centers_and_flat_order():
    g = GridSpec((0.0, 10.0, -1.0), 0.5, (2, 3, 2))
    assert g.cell_count == 12
    assert g.cell_volume == 0.5 ** 3
    assert np.allclose(g.axis_centers(0), [0.25, 0.75])
    # x-fastest layout
    flat = np.arange(g.cell_count)
    ix, iy, iz = g.multi_index(flat)
    assert list(ix[:4]) == [0, 1, 0, 1]
    assert list(iy[:4]) == [0, 0, 1, 1]
    assert np.array_equal(g.flat_index((ix, iy, iz)), flat)
    c = g.centers_at(np.array([0, 1, 2]))
    assert np.allclose(c[1], (0.75, 10.25, -0.75))


def test_index_box_and_flat_indices():
    g = GridSpec((0.0, 0.0, 0.0), 1.0, (4, 4, 4))
    rng = g.index_box((0.4, 0.4, 0.4), (2.7, 1.2, 0.9))
    imin, imax = rng
    assert list(imin) == [0, 0, 0]
    assert list(imax) == [2, 0, 0]
    flat = g.box_flat_indices(imin, imax)
    assert sorted(flat) == [0, 1, 2]
    assert g.index_box((10, 10, 10), (11, 11, 11)) is None


def test_scalar_field_from_flat_ordering():
    g = GridSpec((0.0, 0.0), 1.0, (2, 3))
    flat = np.arange(6, dtype=float)
    f = ScalarField.from_flat(g, flat)
    assert f.values[1, 0] == 1.0
    assert f.values[0, 2] == 4.0
    assert np.array_equal(f.flat_values(), flat)
    with pytest.raises(UsageError):
        ScalarField(g, np.zeros((3, 2)))


def test_field_dump_roundtrip(tmp_path):
    g = GridSpec((-1.0, 0.0, 2.0), 0.25, (3, 2, 2))
    vals = np.arange(12, dtype=float)
    f = ScalarField.from_flat(g, vals)
    base = tmp_path / "rho"
    write_field(f, base, "rho", extra_meta={"note": 1})
    back, meta = read_field(base)
    assert np.array_equal(back.flat_values(), vals)
    assert back.grid == g
    assert meta["name"] == "rho"
    assert meta["config"] == {"note": 1}
    # explicit little-endian float64 layout, x-fastest
    raw = (tmp_path / "rho.f64").read_bytes()
    assert raw[:8] == struct.pack("<d", 0.0)
    assert raw[8:16] == struct.pack("<d", 1.0)
    assert json.loads((tmp_path / "rho.json").read_text())["order"] == "x-fastest"


def test_slice_csv_3d():
    g = GridSpec((0.0, 0.0, 0.0), 1.0, (2, 2, 2))
    f = ScalarField.from_flat(g, np.arange(8, dtype=float))
    text = slice_csv_text(f, "z", 1)
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,value"
    assert lines[1] == "0.5,0.5,4.0"
    assert lines[2] == "1.5,0.5,5.0"
    with pytest.raises(UsageError):
        slice_csv_text(f, "z", 7)
    with pytest.raises(UsageError):
        slice_csv_text(f, "w", 0)


def test_slice_csv_2d():
    g = GridSpec((0.0, 0.0), 1.0, (2, 2))
    f = ScalarField.from_flat(g, np.array([1.0, 2.0, 3.0, 4.0]))
    text = slice_csv_text(f, "y", 0)
    assert text.splitlines()[1] == "0.5,1.0"
