import os

import numpy as np
import pytest

from conftest import FIXTURES
from smoothlime.datasets import (TrainSplitStandardizer, generate_simulated, load_csv,
                                 split_and_normalize)
from smoothlime.exceptions import DegenerateFeature, EmptySplit, NonBinaryTarget, ParseError


class TestSimulated:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_class_means(self, seed):
        data = generate_simulated(1000, seed)
        for label, mu in ((0, [-1, -1]), (1, [1, 1])):
            m = data.features[data.labels == label].mean(axis=0)
            np.testing.assert_allclose(m, mu, atol=0.15)

    def test_two_rows(self):
        data = generate_simulated(2, 5)
        assert data.features.shape == (2, 2)
        assert set(data.labels.tolist()) <= {0, 1}

    def test_deterministic(self):
        a, b = generate_simulated(100, 3), generate_simulated(100, 3)
        assert a.features.tobytes() == b.features.tobytes()
        np.testing.assert_array_equal(a.labels, b.labels)

    @pytest.mark.parametrize("seed", range(5))
    def test_balance(self, seed):
        n = 1000
        ones = generate_simulated(n, seed).labels.sum()
        assert abs(ones - n / 2) <= 5 * np.sqrt(n) / 2


class TestCsv:
    def test_fixture(self):
        data = load_csv(os.path.join(FIXTURES, "small.csv"), "y", ["region"])
        assert data.features.shape == (4, 2)
        assert data.feature_names == ("a", "b")
        np.testing.assert_array_equal(data.labels, [0, 1, 1, 0])
        assert data.features[2, 0] == 3.25

    def test_parse_error_names_row(self):
        with pytest.raises(ParseError) as exc:
            load_csv(os.path.join(FIXTURES, "bad_value.csv"), "y", ["region"])
        assert exc.value.line == 3
        assert "line 3" in str(exc.value)

    def test_non_binary(self):
        with pytest.raises(NonBinaryTarget):
            load_csv(os.path.join(FIXTURES, "nonbinary.csv"), "y", ["region"])

    def test_categorical_without_drop_fails(self):
        with pytest.raises(ParseError):
            load_csv(os.path.join(FIXTURES, "small.csv"), "y")

    def test_missing_target(self):
        with pytest.raises(ParseError):
            load_csv(os.path.join(FIXTURES, "small.csv"), "label", ["region"])

    def test_ragged_row(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("a,y\n1.0,0\n2.0\n")
        with pytest.raises(ParseError, match="line 3"):
            load_csv(p, "y")

    def test_synthetic_fixture(self):
        data = load_csv(os.path.join(FIXTURES, "synthetic.csv"), "label", ["region"])
        assert data.features.shape == (300, 3)


class TestSplit:
    def test_train_stats(self):
        data = split_and_normalize(load_csv(os.path.join(FIXTURES, "synthetic.csv"), "label",
                                            ["region"]), 0.8, 1)
        np.testing.assert_allclose(data.X_train.mean(axis=0), 0.0, atol=1e-10)
        np.testing.assert_allclose(data.X_train.std(axis=0), 1.0, atol=1e-10)
        assert len(data.train_idx) == 240 and len(data.test_idx) == 60

    def test_stats_from_train_only(self):
        raw = generate_simulated(200, 4)
        data = split_and_normalize(raw, 0.8, 2)
        mean, std = data.norm_stats
        np.testing.assert_allclose(mean, raw.features[data.train_idx].mean(axis=0))
        np.testing.assert_allclose(data.X_test, (raw.features[data.test_idx] - mean) / std)

    def test_renormalize_is_identity(self):
        data = split_and_normalize(generate_simulated(300, 1), 0.8, 0)
        again = TrainSplitStandardizer().fit(data.X_train).transform(data.X_train)
        np.testing.assert_allclose(again, data.X_train, atol=1e-10)

    def test_constant_column(self):
        raw = generate_simulated(50, 0)
        from dataclasses import replace
        const = replace(raw, features=np.column_stack([raw.features, np.ones(50)]))
        with pytest.raises(DegenerateFeature):
            split_and_normalize(const, 0.8, 0)

    @pytest.mark.parametrize("seed", [0, 7, 2**40])
    def test_disjoint_cover_deterministic(self, seed):
        raw = generate_simulated(101, 0)
        a = split_and_normalize(raw, 0.8, seed, normalize=False)
        b = split_and_normalize(raw, 0.8, seed, normalize=False)
        assert not set(a.train_idx) & set(a.test_idx)
        assert sorted(np.concatenate([a.train_idx, a.test_idx])) == list(range(101))
        np.testing.assert_array_equal(a.train_idx, b.train_idx)

    def test_too_small(self):
        with pytest.raises(EmptySplit):
            split_and_normalize(generate_simulated(4, 0), 0.8, 0)

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            split_and_normalize(generate_simulated(10, 0), 1.0, 0)
