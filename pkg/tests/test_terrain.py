import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from towersite import (GridPoint, TerrainError, TerrainGrid, elevation_between, generate_fractal,
                       load_ascii_grid, load_binary, write_ascii_grid, write_binary)
from towersite.terrain import NODATA


def test_binary_readback(tmp_path):
    path = tmp_path / "t.bin"
    np.array([1, 2, 3, 4], dtype="<i2").tofile(path)
    g = load_binary(path, 2, 2)
    assert g[0, 0] == 1 and g[1, 1] == 4 and g[0, 1] == 2


def test_binary_min_max_match_byte_scan(tmp_path, rng):
    path = tmp_path / "big.bin"
    rng.integers(-500, 9000, size=1_000_000).astype("<i2").tofile(path)
    raw = path.read_bytes()
    assert len(raw) == 2_000_000
    # independent scan of the little-endian byte pairs
    lo = hi = None
    for k in range(0, len(raw), 2):
        v = int.from_bytes(raw[k:k + 2], "little", signed=True)
        lo = v if lo is None or v < lo else lo
        hi = v if hi is None or v > hi else hi
    g = load_binary(path, 1000, 1000)
    assert (g.min_elevation(), g.max_elevation()) == (lo, hi)


def test_binary_size_mismatch(tmp_path):
    path = tmp_path / "t.bin"
    np.array([1, 2, 3], dtype="<i2").tofile(path)
    with pytest.raises(TerrainError):
        load_binary(path, 2, 2)


def test_binary_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_binary(tmp_path / "nope.bin", 2, 2)


def test_binary_nodata_rejected(tmp_path):
    path = tmp_path / "t.bin"
    np.array([1, NODATA, 3, 4], dtype="<i2").tofile(path)
    with pytest.raises(TerrainError):
        load_binary(path, 2, 2)


def test_ascii_matches_binary(tmp_path):
    a = tmp_path / "t.asc"
    a.write_text("nrows 2 ncols 2\n1 2\n3 4")
    b = tmp_path / "t.bin"
    np.array([1, 2, 3, 4], dtype="<i2").tofile(b)
    assert load_ascii_grid(a) == load_binary(b, 2, 2)


def test_ascii_round_trip(tmp_path, rng):
    g = TerrainGrid.from_array(rng.integers(-1000, 9000, size=(50, 50)))
    write_ascii_grid(g, tmp_path / "g.asc")
    assert load_ascii_grid(tmp_path / "g.asc") == g


@pytest.mark.parametrize("text", ["nrows 2\n1 2\n3 4", "nrows 2 ncols 2\n1 2\n3", "nrows 2 ncols 2\n1 x\n3 4"])
def test_ascii_parse_failure(tmp_path, text):
    p = tmp_path / "bad.asc"
    p.write_text(text)
    with pytest.raises(TerrainError):
        load_ascii_grid(p)


@settings(max_examples=40, deadline=None)
@given(arrays(np.int16, st.tuples(st.integers(2, 12), st.integers(2, 12)),
              elements=st.integers(-32767, 32767)))
def test_binary_round_trip(tmp_path_factory, z):
    path = tmp_path_factory.mktemp("rt") / "g.bin"
    g = TerrainGrid.from_array(z)
    write_binary(g, path)
    assert load_binary(path, *z.shape) == g
    assert path.read_bytes() == z.astype("<i2").tobytes()


def test_fractal_deterministic():
    a = generate_fractal(65, 80, 0.5, seed=7)
    b = generate_fractal(65, 80, 0.5, seed=7)
    assert a == b
    assert a.shape == (65, 80)


def test_fractal_seed_matters():
    assert generate_fractal(64, 64, seed=1) != generate_fractal(64, 64, seed=2)


def test_fractal_range():
    g = generate_fractal(100, 120, 0.6, seed=3, zmin=200, zmax=900)
    assert 200 <= g.min_elevation() and g.max_elevation() <= 900


def test_fractal_low_roughness_nearly_flat():
    g = generate_fractal(129, 129, roughness=1e-3, seed=5, zmin=0, zmax=1000)
    assert g.max_elevation() - g.min_elevation() < 0.05 * 1000


def test_fractal_varies_at_moderate_roughness():
    g = generate_fractal(129, 129, roughness=0.7, seed=5, zmin=0, zmax=1000)
    assert g.max_elevation() - g.min_elevation() > 100


def test_elevation_between_examples():
    g = TerrainGrid.from_array([[10, 20], [6387, 16344]])
    assert elevation_between(g, (0, 0), (0, 1), 0.5) == 15
    assert elevation_between(g, (0, 0), (0, 1), 0.0) == 10
    assert elevation_between(g, (1, 0), (1, 1), 0.25) == 8876.25


def test_elevation_between_rejects_non_adjacent():
    g = TerrainGrid.from_array(np.zeros((3, 3)))
    with pytest.raises(TerrainError):
        elevation_between(g, (0, 0), (1, 1), 0.5)
    with pytest.raises(TerrainError):
        elevation_between(g, (2, 2), (2, 3), 0.5)


@given(st.integers(-32767, 32767), st.integers(-32767, 32767), st.floats(0, 1))
def test_elevation_between_bounded(a, b, f):
    g = TerrainGrid.from_array([[a, b], [0, 0]])
    v = elevation_between(g, GridPoint(0, 0), GridPoint(0, 1), f)
    assert min(a, b) - 1e-6 <= v <= max(a, b) + 1e-6


def test_grid_validation():
    with pytest.raises(TerrainError):
        TerrainGrid(2, 2, np.zeros(3, np.int32))
    g = TerrainGrid.from_array([[1, 2], [3, 4]])
    assert g.contains((1, 1)) and not g.contains((2, 0)) and not g.contains((0, -1))
    assert not g.elevations.flags.writeable
