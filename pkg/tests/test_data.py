import numpy as np
import pytest

from tsnorm import (
    Dataset,
    SyntheticSpec,
    export_csv,
    generate_synthetic,
    load_csv,
    sample_instances,
)
from tsnorm.data import BadSpecError, ParseError, TooShortError, WindowTooLongError


class TestLoadCsv:
    def test_timestamp_column_skipped(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "timestamp,a,b\n"
            "2024-01-01T00:00,1.0,4.0\n"
            "2024-01-01T01:00,2.0,5.0\n"
            "2024-01-01T02:00,3.0,6.0\n"
        )
        d = load_csv(path, "d", "1h", 1, split_fraction=0.67)
        assert d.length == 3 and d.channels == 2
        np.testing.assert_array_equal(d.values[:, 0], [1.0, 2.0, 3.0])
        assert d.split_index == 2

    def test_plain_headers_all_channels(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,4\n5,6\n7,8\n")
        d = load_csv(path, "d", "1h", 1, split_fraction=0.75)
        assert d.channels == 2 and d.split_index == 3

    def test_parse_error_names_cell(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a,b\n1,2\n3,oops\n5,6\n")
        with pytest.raises(ParseError) as exc:
            load_csv(path, "d", "1h", 1)
        assert exc.value.row == 3 and exc.value.col == 2

    def test_too_short(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("a\n1\n")
        with pytest.raises(TooShortError):
            load_csv(path, "d", "1h", 1)

    def test_split_index_override(self, tmp_path):
        # exact train/test row counts, matching published configurations
        path = tmp_path / "d.csv"
        rows = "\n".join(str(float(i)) for i in range(100))
        path.write_text("a\n" + rows + "\n")
        d = load_csv(path, "d", "1h", 1, split_index=80)
        assert d.split_index == 80

    def test_round_trip_exact(self, tmp_path):
        rng = np.random.default_rng(77)
        original = Dataset("r", rng.normal(3.0, 2.0, (50, 3)), "1h", 2, 40)
        path = tmp_path / "r.csv"
        export_csv(original, path)
        again = load_csv(path, "r", "1h", 2, split_index=40)
        np.testing.assert_array_equal(again.values, original.values)


class TestGenerateSynthetic:
    def test_deterministic(self):
        spec = SyntheticSpec(seed=5)
        a = generate_synthetic(spec)
        b = generate_synthetic(spec)
        assert len(a) == spec.n_datasets
        for da, db in zip(a, b):
            np.testing.assert_array_equal(da.values, db.values)
            assert da.name == db.name

    def test_scale_exponents_drive_magnitudes(self):
        spec = SyntheticSpec(n_datasets=2, scale_exponents=(0.0, 3.0),
                             level_shifts=0, noise=0.0, trend=0.0, seed=1)
        small, big = generate_synthetic(spec)
        ratio = np.abs(big.values).mean() / np.abs(small.values).mean()
        assert 100.0 < ratio < 10000.0

    def test_corpus_spans_three_decades(self):
        datasets = generate_synthetic(SyntheticSpec(seed=2))
        spans = [d.values.std() for d in datasets]
        assert max(spans) / min(spans) >= 1e3

    def test_pure_sinusoid_seasonal_naive_oracle(self):
        # no noise, no shifts, no trend: the seasonal difference vanishes
        spec = SyntheticSpec(n_datasets=1, channels=1, level_shifts=0,
                             noise=0.0, trend=0.0, seed=3)
        (d,) = generate_synthetic(spec)
        lagged = d.values[spec.seasonal_period:] - d.values[:-spec.seasonal_period]
        assert np.abs(lagged).max() <= 1e-9

    def test_bad_spec(self):
        with pytest.raises(BadSpecError):
            SyntheticSpec(n_datasets=0)
        with pytest.raises(BadSpecError):
            SyntheticSpec(length=10, seasonal_period=24)
        with pytest.raises(BadSpecError):
            SyntheticSpec.from_dict({"bogus_field": 1})


class TestSampleInstances:
    def test_count_zero(self, tiny_dataset):
        assert sample_instances(tiny_dataset, 96, 24, 0, seed=0) == []

    def test_instances_inside_train_rows(self, tiny_dataset):
        instances = sample_instances(tiny_dataset, 96, 24, 200, seed=1)
        for inst in instances:
            start = inst.origin[1]
            assert start >= 0
            assert start + 96 + 24 <= tiny_dataset.split_index

    def test_deterministic_offsets(self, tiny_dataset):
        a = sample_instances(tiny_dataset, 96, 24, 32, seed=9)
        b = sample_instances(tiny_dataset, 96, 24, 32, seed=9)
        assert [i.origin for i in a] == [i.origin for i in b]

    def test_window_too_long(self, tiny_dataset):
        with pytest.raises(WindowTooLongError):
            sample_instances(tiny_dataset, 400, 24, 1, seed=0)

    def test_values_match_source(self, tiny_dataset):
        (inst,) = sample_instances(tiny_dataset, 10, 5, 1, seed=4)
        start = inst.origin[1]
        np.testing.assert_array_equal(
            inst.context, tiny_dataset.values[start : start + 10]
        )
        np.testing.assert_array_equal(
            inst.horizon, tiny_dataset.values[start + 10 : start + 15]
        )
