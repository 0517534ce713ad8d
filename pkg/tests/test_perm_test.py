import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from spectroprosodic._validation import InputError
from spectroprosodic.info_theory import chao_shen_entropy, effective_cardinality
from spectroprosodic.perm_test import (
    NullDistribution,
    PermutationIndependenceTest,
    TestReport,
    format_p,
    null_distribution,
    p_value_bound,
    run_test,
    shuffle,
    trial_rng,
)
from spectroprosodic.quantization import QuantizedSequence


class TestShuffle:
    def test_length_one(self):
        assert shuffle([4], 0).tolist() == [4]

    @given(st.lists(st.integers(0, 9), min_size=1, max_size=100), st.integers(0, 2**31))
    def test_multiset_preserved(self, seq, seed):
        assert sorted(shuffle(seq, seed).tolist()) == sorted(seq)

    def test_deterministic(self):
        seq = np.arange(50)
        np.testing.assert_array_equal(shuffle(seq, trial_rng(3, 9)), shuffle(seq, trial_rng(3, 9)))
        assert not np.array_equal(shuffle(seq, trial_rng(3, 9)), shuffle(seq, trial_rng(3, 10)))

    def test_keeps_metadata(self):
        seq = QuantizedSequence([0, 1, 1, 2], 3, "f0", "male")
        out = shuffle(seq, 1)
        assert (out.alphabet_size, out.source, out.speaker) == (3, "f0", "male")

    def test_uniform_over_permutations(self):
        counts = {}
        for d in range(6000):
            key = tuple(shuffle([0, 1, 2], trial_rng(0, d)).tolist())
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 6
        assert all(abs(c - 1000) < 120 for c in counts.values())


class TestNullDistribution:
    def test_constant_y(self):
        null = null_distribution([0, 1, 2, 0, 1], [3] * 5, D=20, seed=1)
        np.testing.assert_array_equal(null.samples, 1.0)

    def test_constant_x(self):
        y = [0, 1, 1, 2, 2, 2, 0, 1]
        null = null_distribution([0] * 8, y, D=15, seed=2)
        np.testing.assert_allclose(null.samples, effective_cardinality(chao_shen_entropy([2, 3, 3])))

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            null_distribution([0, 1], [0], D=3)

    def test_trial_independence_from_threads(self):
        rng = np.random.default_rng(4)
        x, y = rng.integers(0, 6, 300), rng.integers(0, 5, 300)
        a = null_distribution(x, y, D=64, seed=5, n_jobs=1)
        b = null_distribution(x, y, D=64, seed=5, n_jobs=3)
        np.testing.assert_array_equal(a.samples, b.samples)
        # prefix property: the first trials do not depend on D
        c = null_distribution(x, y, D=10, seed=5)
        np.testing.assert_array_equal(a.samples[:10], c.samples)

    def test_bounds(self):
        rng = np.random.default_rng(5)
        x, y = rng.integers(0, 6, 200), rng.integers(0, 4, 200)
        plugin = null_distribution(x, y, D=50, seed=1, estimator="plugin")
        assert np.all((plugin.samples >= 1) & (plugin.samples <= 4 + 1e-12))
        assert np.all(null_distribution(x, y, D=50, seed=1).samples >= 1)

    def test_histogram(self, tmp_path):
        null = NullDistribution.from_samples(np.random.default_rng(0).normal(5, 1, 1000), 0)
        assert null.histogram_counts.sum() == 1000
        null.write_histogram_csv(tmp_path / "h.csv")
        lines = (tmp_path / "h.csv").read_text().splitlines()
        assert lines[0] == "bin_left,bin_right,count"
        assert sum(int(line.split(",")[2]) for line in lines[1:]) == 1000

    def test_degenerate_histogram(self):
        null = NullDistribution.from_samples(np.ones(5), 0)
        assert null.histogram_counts.tolist() == [5]

    def test_pmf(self):
        values, p = NullDistribution.from_samples([1.0, 2.0, 2.0, 3.0], 0).pmf()
        np.testing.assert_allclose(p, [0.25, 0.5, 0.25])


class TestPValue:
    def test_count(self):
        null = NullDistribution.from_samples([1.0, 2.0, 3.0], 0)
        assert p_value_bound(2.0, null) == (2, 0.75)

    def test_never_reached(self):
        null = NullDistribution.from_samples(np.full(100_000, 5.0), 0)
        count, bound = p_value_bound(1.0, null)
        assert count == 0
        assert format_p(count, null.D) == "p < 1e-05"
        assert bound == pytest.approx(1 / 100_001)

    def test_upper_extreme(self):
        null = NullDistribution.from_samples([1.0, 2.0, 3.0], 0)
        count, bound = p_value_bound(3.0, null)
        assert count == 3 and bound == 1.0

    @given(st.floats(1, 10), st.floats(1, 10))
    def test_monotone(self, a, b):
        null = NullDistribution.from_samples(np.random.default_rng(0).uniform(1, 10, 200), 0)
        lo, hi = sorted((a, b))
        assert p_value_bound(lo, null)[0] <= p_value_bound(hi, null)[0]


def dependent_data(seed, n=2000, alphabet=8):
    x = np.random.default_rng(seed).integers(0, alphabet, n)
    return x, x % 2


class TestRunTest:
    def test_dependent_rejects(self):
        x, y = dependent_data(0)
        report = run_test(x, y, D=1000, seed=0)
        assert report.c_test == 1.0
        assert report.p_count == 0
        assert 1.9 < report.null_summary["mean"] < 2.1

    def test_deterministic(self):
        x, y = dependent_data(1, n=300)
        a = run_test(x, y, D=50, seed=7, speaker="f", feature="voicing")
        b = run_test(x, y, D=50, seed=7, speaker="f", feature="voicing")
        assert a.to_json() == b.to_json()
        np.testing.assert_array_equal(a.null.samples, b.null.samples)

    def test_report_roundtrip(self, tmp_path):
        x, y = dependent_data(2, n=200)
        report = run_test(x, y, D=30, seed=1, speaker="m", feature="f0", config={"trials": 30})
        report.save(tmp_path / "r.json")
        data = json.loads((tmp_path / "r.json").read_text())
        assert data["p_value_bound"] == (data["p_count"] + 1) / (data["D"] + 1)
        assert data["tool_version"]
        assert TestReport.load(tmp_path / "r.json") == report

    def test_estimator_api(self):
        x, y = dependent_data(3, n=200)
        est = PermutationIndependenceTest(n_permutations=20, random_state=2).fit(x, y)
        assert est.p_count_ == 0 and est.c_test_ == 1.0
        assert clone(est).get_params()["n_permutations"] == 20

    def test_bad_estimator(self):
        with pytest.raises(ValueError):
            PermutationIndependenceTest(10, estimator="nsb").fit([0, 1], [1, 0])

    @settings(max_examples=5, deadline=None)
    @given(st.integers(0, 2**31))
    def test_independent_not_extreme(self, seed):
        rng = np.random.default_rng(seed)
        x, y = rng.integers(0, 5, 400), rng.integers(0, 3, 400)
        report = run_test(x, y, D=200, seed=seed)
        assert report.c_test >= 1.0
