import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sitsgraph import datacube
from sitsgraph.datacube import GeoBounds, SitsCube, load_cube, ndwi, save_cube, synth_seasonal
from sitsgraph.errors import (
    InvalidSpec,
    MissingFile,
    NonMonotonicTimestamps,
    ShapeMismatch,
    UnknownBand,
)


def _write_cube_dir(tmp_path, t=2, c=1, h=4, w=4, timestamps=None, blob=None):
    meta = {
        "T": t,
        "C": c,
        "H": h,
        "W": w,
        "dtype": "f32",
        "bands": [f"B{i:02d}" for i in range(c)],
        "timestamps": timestamps or ["2020-01-01", "2020-03-01"][:t],
        "geo": {"lat0": 43.0, "lat1": 44.0, "lon0": 1.0, "lon1": 2.0},
        "nodata": None,
    }
    (tmp_path / "meta.json").write_text(json.dumps(meta))
    if blob is None:
        blob = np.arange(t * c * h * w, dtype="<f4").tobytes()
    (tmp_path / "cube.bin").write_bytes(blob)
    return tmp_path


class TestLoadCube:
    def test_shape_bookkeeping(self, tmp_path):
        cube = load_cube(_write_cube_dir(tmp_path))
        assert cube.shape == (2, 1, 4, 4)
        assert cube.values.size == 32

    def test_short_blob_rejected(self, tmp_path):
        blob = bytes(120)
        with pytest.raises(ShapeMismatch):
            load_cube(_write_cube_dir(tmp_path, blob=blob))

    def test_non_monotonic_timestamps(self, tmp_path):
        with pytest.raises(NonMonotonicTimestamps):
            load_cube(_write_cube_dir(tmp_path, timestamps=["2020-03-01", "2020-01-01"]))

    def test_missing_files(self, tmp_path):
        with pytest.raises(MissingFile):
            load_cube(tmp_path)
        _write_cube_dir(tmp_path)
        (tmp_path / "cube.bin").unlink()
        with pytest.raises(MissingFile):
            load_cube(tmp_path)

    def test_roundtrip_is_byte_identical(self, tmp_path):
        (tmp_path / "a").mkdir()
        cube = load_cube(_write_cube_dir(tmp_path / "a"))
        save_cube(cube, tmp_path / "b")
        assert (tmp_path / "a" / "cube.bin").read_bytes() == (tmp_path / "b" / "cube.bin").read_bytes()


class TestNdwi:
    def _cube(self, g, n, geo):
        vals = np.zeros((1, 2, 1, 1), dtype=np.float32)
        vals[0, 0, 0, 0] = g
        vals[0, 1, 0, 0] = n
        return SitsCube(vals, ["2020-01-01"], ["B03", "B08"], geo)

    def test_direct_arithmetic(self, geo):
        out = ndwi(self._cube(0.2, 0.1, geo))
        assert out.bands == ["NDWI"]
        assert out.values[0, 0, 0, 0] == pytest.approx(0.1 / 0.3, abs=1e-7)

    def test_zero_denominator_guard(self, geo):
        out = ndwi(self._cube(0.0, 0.0, geo))
        assert out.values[0, 0, 0, 0] == 0.0

    def test_boundary(self, geo):
        out = ndwi(self._cube(0.0, 0.5, geo))
        assert out.values[0, 0, 0, 0] == -1.0

    def test_unknown_band(self, geo):
        with pytest.raises(UnknownBand):
            ndwi(self._cube(0.1, 0.2, geo), green_band="B99")

    def test_nan_propagates(self, geo):
        out = ndwi(self._cube(np.nan, 0.5, geo))
        assert np.isnan(out.values[0, 0, 0, 0])

    @given(
        g=st.floats(0.0, 1.0, allow_nan=False),
        n=st.floats(0.0, 1.0, allow_nan=False),
    )
    @settings(max_examples=50, deadline=None)
    def test_antisymmetric_outside_guard(self, g, n):
        geo = GeoBounds(43.0, 44.0, 1.0, 2.0)
        if abs(g + n) < 1e-12:
            return
        a = ndwi(self._cube(g, n, geo)).values[0, 0, 0, 0]
        b = ndwi(self._cube(n, g, geo)).values[0, 0, 0, 0]
        assert a == pytest.approx(-b, abs=1e-6)


class TestPixelGeo:
    def test_doy_clamps_leap_day(self):
        assert datacube.day_of_year_fraction("2020-12-31") == pytest.approx(364 / 365)
        assert datacube.day_of_year_fraction("2021-12-31") == pytest.approx(364 / 365)
        assert datacube.day_of_year_fraction("2020-01-01") == 0.0

    def test_lat_lon_within_hull(self, fix_a):
        p = fix_a.pixel_geo(0, 0, 0)
        assert 43.0 <= p.lat <= 44.0
        assert 1.0 <= p.lon <= 2.0


class TestSynthSeasonal:
    def test_deterministic(self):
        a_cube, a_lab = synth_seasonal(seed=9, t=6, h=8, w=8, n_blobs=3, period_dates=3)
        b_cube, b_lab = synth_seasonal(seed=9, t=6, h=8, w=8, n_blobs=3, period_dates=3)
        assert a_cube.values.tobytes() == b_cube.values.tobytes()
        assert np.array_equal(a_lab, b_lab)

    def test_two_blobs_no_noise_two_values(self):
        cube, _ = synth_seasonal(seed=1, t=5, h=8, w=8, n_blobs=2, period_dates=4, sigma=0.0)
        for t in range(5):
            assert len(np.unique(cube.values[t, 0])) == 2

    def test_periodicity_measured_on_cube(self):
        # difference of two samples p apart is N(0, sqrt(2)*sigma); the 3-sigma
        # band on that scale holds for >= 99% of (pixel, t) samples
        sigma = 0.02
        cube, _ = synth_seasonal(seed=4, t=12, h=16, w=16, n_blobs=4, period_dates=6, sigma=sigma)
        v = cube.values[:, 0].astype(np.float64)
        diffs = np.abs(v[6:] - v[:-6])
        frac = (diffs <= 3 * np.sqrt(2) * sigma).mean()
        assert frac >= 0.99

    def test_labels_partition_every_pixel(self):
        _, lab = synth_seasonal(seed=2, t=4, h=10, w=12, n_blobs=5, period_dates=4)
        assert lab.min() >= 0
        assert lab.shape == (4, 10, 12)

    def test_invalid_spec(self):
        with pytest.raises(InvalidSpec):
            synth_seasonal(seed=0, t=2, h=8, w=8, n_blobs=3, period_dates=3)
        with pytest.raises(InvalidSpec):
            synth_seasonal(seed=0, t=4, h=8, w=8, n_blobs=1, period_dates=3)


class TestSynthContext:
    def test_label_is_neighbor_majority(self):
        cube, labels = datacube.synth_context(seed=5, cells=4, cell_px=2, t=2)
        sig = cube.values[0, 0, ::2, ::2]  # one sample per cell
        lab = labels[0, ::2, ::2]
        cells = 4
        for i in range(cells):
            for j in range(cells):
                neigh = []
                for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                    if 0 <= i + di < cells and 0 <= j + dj < cells:
                        neigh.append(1 if sig[i + di, j + dj] > 0.5 else 0)
                expect = 1 if sum(neigh) * 2 > len(neigh) else 0
                assert lab[i, j] == expect
