import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from synth_audit.config import parse_config
from synth_audit.data import Dataset, make_split
from synth_audit.errors import DegenerateLabelsError, ParameterError
from synth_audit.evaluation import (
    accuracy_at_median,
    auc,
    auc_bruteforce,
    median_threshold,
    precision_quantile_curve,
    subgroup_report,
    wasserstein_utility,
    w1_equal_size,
)
from synth_audit.generators import NOISE_GRID
from synth_audit.numcore import SeededRng
from synth_audit.pipeline import frontier_sweep
from synth_audit.scenarios import sample_population


def test_auc_examples():
    assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert auc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0
    assert auc([3.0] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


def test_auc_degenerate_labels():
    with pytest.raises(DegenerateLabelsError):
        auc([1.0, 2.0], [1, 1])


def test_auc_equals_bruteforce_on_tied_instances():
    rng = np.random.default_rng(0)
    for _ in range(200):
        n = int(rng.integers(2, 60))
        y = rng.integers(0, 2, n)
        y[0], y[1] = 0, 1
        s = rng.integers(0, 5, n).astype(float)
        assert auc(s, y) == auc_bruteforce(s, y)


@given(
    st.lists(st.tuples(st.integers(-20, 20), st.booleans()), min_size=2, max_size=40).filter(
        lambda r: 0 < sum(b for _, b in r) < len(r)
    )
)
@settings(max_examples=100, deadline=None)
def test_auc_properties(rows):
    s = np.array([float(a) for a, _ in rows])
    y = np.array([int(b) for _, b in rows])
    a = auc(s, y)
    assert 0.0 <= a <= 1.0
    assert a == auc_bruteforce(s, y)
    # strictly increasing transform and label flip
    assert auc(np.exp(s / 10) + 3, y) == a
    assert auc(s, 1 - y) == pytest.approx(1 - a, abs=1e-12)


def test_accuracy_examples():
    assert median_threshold([3, 2, 1, 0]) == 1.5
    assert accuracy_at_median([3, 2, 1, 0], [1, 1, 0, 0]) == 1.0
    assert accuracy_at_median([3, 2, 1, 0], [0, 1, 1, 0]) == 0.5
    # all equal: strict > predicts nobody a member
    assert accuracy_at_median([2.0] * 5, [1, 0, 0, 1, 0]) == 0.6


def test_precision_examples():
    curve = precision_quantile_curve([4, 3, 2, 1], [1, 0, 1, 0], [0.25, 0.5, 1.0])
    assert curve.rows() == [(0.25, 1.0), (0.5, 0.5), (1.0, 0.5)]


def test_precision_tie_break_keeps_input_order():
    curve = precision_quantile_curve([1.0, 1.0, 1.0, 1.0], [0, 1, 1, 0], [0.25, 0.5])
    assert curve.precision.tolist() == [0.0, 0.5]


def test_precision_grid_errors():
    with pytest.raises(ParameterError):
        precision_quantile_curve([1, 2], [0, 1], [])
    with pytest.raises(ParameterError):
        precision_quantile_curve([1, 2], [0, 1], [0.0])


@given(st.integers(2, 200), st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_precision_at_one_is_base_rate(n, seed):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, n)
    y[0], y[1] = 0, 1
    curve = precision_quantile_curve(rng.normal(size=n), y, [1.0])
    assert curve.precision[0] == y.mean()


def test_subgroup_hand_instance():
    # minority rows 0-3 separate perfectly; majority rows 4-7 are reversed
    scores = [4.0, 3.0, 1.0, 0.0, 0.5, 0.6, 2.0, 2.5]
    labels = [1, 1, 0, 0, 1, 1, 0, 0]
    mask = [1, 1, 1, 1, 0, 0, 0, 0]
    rep = subgroup_report(scores, labels, mask)
    assert rep["minority"].auc == 1.0
    assert rep["majority"].auc == 0.0
    assert rep["gap_auc"] == 1.0


def test_subgroup_all_zero_mask():
    with pytest.raises(DegenerateLabelsError) as info:
        subgroup_report([1.0, 2.0], [0, 1], [0, 0])
    assert info.value.group == "minority"


def test_subgroup_symmetric_groups_no_gap():
    s = np.array([0.1, 0.9, 0.4, 0.6] * 2)
    y = np.array([0, 1, 0, 1] * 2)
    rep = subgroup_report(s, y, [1] * 4 + [0] * 4)
    assert rep["gap_auc"] == 0.0 and rep["gap_accuracy"] == 0.0


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_subgroup_accuracy_weighted_identity(seed):
    rng = np.random.default_rng(seed)
    n = 40
    s = rng.integers(0, 6, n).astype(float)
    y = np.tile([0, 1], n // 2)
    mask = np.tile([1, 1, 0, 0], n // 4)
    rep = subgroup_report(s, y, mask)
    mixed = (rep["minority"].n * rep["minority"].accuracy + rep["majority"].n * rep["majority"].accuracy) / n
    assert mixed == pytest.approx(accuracy_at_median(s, y), abs=1e-12)


def test_w1_examples():
    a = Dataset.from_array([[0.0], [1.0]])
    assert wasserstein_utility(a, a) == 0.0
    assert wasserstein_utility(a, Dataset.from_array([[0.0], [3.0]])) == 1.0
    assert wasserstein_utility(a, Dataset.from_array([[2.5], [3.5]])) == 2.5


@given(
    st.lists(st.floats(-100, 100), min_size=5, max_size=5),
    st.lists(st.floats(-100, 100), min_size=5, max_size=5),
    st.lists(st.floats(-100, 100), min_size=5, max_size=5),
)
@settings(max_examples=100, deadline=None)
def test_w1_metric_properties(a, b, c):
    ab, ba = w1_equal_size(a, b), w1_equal_size(b, a)
    assert ab >= 0 and ab == ba
    assert ab <= w1_equal_size(a, c) + w1_equal_size(c, b) + 1e-9


def test_w1_subsamples_larger_set():
    big = Dataset.from_array(np.random.default_rng(0).normal(size=(500, 2)))
    small = Dataset.from_array(np.random.default_rng(1).normal(size=(50, 2)))
    assert wasserstein_utility(big, small, SeededRng(0)) == wasserstein_utility(small, big, SeededRng(0))


def _frontier_setup():
    cfg = parse_config("[generator]\nn_syn = 1000\n").validate()
    pop = sample_population("gauss-mixture", 3000, SeededRng(0))
    return cfg, make_split(pop, 100, 1000, 100, SeededRng(1))


def test_frontier_grid_points():
    cfg, split = _frontier_setup()
    rows = frontier_sweep(cfg, (0.0,) + NOISE_GRID, split, seed=0)
    assert len(rows) == 13
    knobs = [r[0] for r in rows]
    assert knobs[1:] == list(NOISE_GRID)
    domias = [r[2]["domias"] for r in rows]
    util = [r[1] for r in rows]
    # memorizing endpoint: most attackable, and no worse utility than heavy noise
    assert domias[0] == max(domias)
    assert util[0] < util[-1]


def test_frontier_single_point():
    cfg, split = _frontier_setup()
    assert len(frontier_sweep(cfg, [0.5], split, seed=0)) == 1
