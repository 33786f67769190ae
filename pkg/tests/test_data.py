import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from synth_audit.data import (
    BINARY,
    CONTINUOUS,
    Dataset,
    Predicate,
    concat,
    dequantize,
    fit_standardizer,
    load_csv,
    make_split,
    shifted_reference,
    standardize_fit_apply,
    write_csv,
)
from synth_audit.errors import DataError, DegenerateColumnError, ParameterError, ParseError, SizeError
from synth_audit.numcore import SeededRng


def _write(tmp_path, text):
    path = tmp_path / "d.csv"
    path.write_text(text)
    return path


def test_binary_column_inferred(tmp_path):
    data = load_csv(_write(tmp_path, "a,flag\n0.5,1\n1.5,0\n2.5,1\n"))
    assert [c.kind for c in data.schema.columns] == [CONTINUOUS, BINARY]
    assert data.values.shape == (3, 2)


def test_parse_error_names_row(tmp_path):
    rows = "".join(f"{i},{i}\n" for i in range(6)) + "abc,1\n"
    with pytest.raises(ParseError) as info:
        load_csv(_write(tmp_path, "a,b\n" + rows))
    assert info.value.row == 7
    assert "row 7" in str(info.value)


def test_missing_value_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, "a,b\n1,\n"))


def test_ragged_row_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_csv(_write(tmp_path, "a,b\n1,2,3\n"))


def test_csv_roundtrip_exact(tmp_path):
    values = np.array([[0.1, 1 / 3], [np.pi, -1e-300], [1e300, 2.0]])
    ds = Dataset.from_array(values, ["p", "q"])
    path = tmp_path / "out.csv"
    write_csv(ds, path)
    back = load_csv(path, binary_hint=False)
    np.testing.assert_array_equal(back.values, values)
    assert back.schema.names == ["p", "q"]


@given(hnp.arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 3)),
                  elements=st.floats(-1e12, 1e12, allow_nan=False)))
@settings(max_examples=40, deadline=None)
def test_csv_roundtrip_property(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    write_csv(Dataset.from_array(values), path)
    np.testing.assert_array_equal(load_csv(path, binary_hint=False).values, values)


def test_standardize_hand_example():
    params = fit_standardizer(Dataset.from_array([0.0, 2.0]))
    assert params.mean[0] == 1.0 and params.std[0] == 1.0
    assert params.apply(Dataset.from_array([3.0])).values[0, 0] == 2.0


def test_standardize_self_gives_zero_mean_unit_std(np_rng):
    ds = Dataset.from_array(np_rng.normal(3.0, 2.0, size=(200, 3)))
    (out,), _ = standardize_fit_apply(ds, [ds])
    np.testing.assert_allclose(out.values.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.values.std(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose(out.destandardize().values, ds.values, atol=1e-12)


def test_constant_column_rejected():
    with pytest.raises(DegenerateColumnError):
        fit_standardizer(Dataset.from_array([[1.0, 5.0], [2.0, 5.0]], ["a", "b"]))


def test_dataset_values_read_only():
    ds = Dataset.from_array([[1.0]])
    with pytest.raises(ValueError):
        ds.values[0, 0] = 2.0


def test_dequantize_only_touches_binary(tmp_path):
    data = load_csv(_write(tmp_path, "a,flag\n0.5,1\n1.5,0\n2.5,1\n"))
    out = dequantize(data, SeededRng(0))
    np.testing.assert_array_equal(out.values[:, 0], data.values[:, 0])
    jitter = out.values[:, 1] - data.values[:, 1]
    assert np.all(np.abs(jitter) <= 0.05) and np.any(jitter != 0)


def _population(n=3000, d=2, seed=0):
    return Dataset.from_array(np.random.default_rng(seed).normal(size=(n, d)))


def test_split_sizes_and_labels():
    split = make_split(_population(), 500, 2000, 400, SeededRng(0))
    assert split.d_mem.n_rows == 500 and split.d_ref.n_rows == 2000 and split.d_test.n_rows == 400
    assert split.labels.sum() == 200


def test_split_disjoint_and_members_from_mem():
    split = make_split(_population(), 300, 1000, 200, SeededRng(3))
    mem, ref = set(split.mem_idx.tolist()), set(split.ref_idx.tolist())
    assert not mem & ref
    members = split.test_idx[split.labels == 1]
    fresh = split.test_idx[split.labels == 0]
    assert set(members.tolist()) <= mem
    assert not set(fresh.tolist()) & (mem | ref)
    assert len(set(split.test_idx.tolist())) == 200


def test_split_deterministic():
    a = make_split(_population(), 100, 500, 100, SeededRng(9))
    b = make_split(_population(), 100, 500, 100, SeededRng(9))
    np.testing.assert_array_equal(a.d_test.values, b.d_test.values)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_split_too_few_members():
    with pytest.raises(SizeError):
        make_split(_population(), 10, 100, 40, SeededRng(0))


def test_split_too_few_rows():
    with pytest.raises(SizeError):
        make_split(_population(n=100), 50, 100, 20, SeededRng(0))


def _two_groups(n0=1000, n1=1000):
    x = np.concatenate([np.full(n0, 5.0), np.zeros(n1)]) + np.arange(n0 + n1) * 1e-4
    return Dataset.from_array(x)


def test_shifted_reference_counts():
    group0 = Predicate.parse("x0 > 3")
    ref = shifted_reference(_two_groups(), group0, 0.8, 1000, SeededRng(0))
    assert ref.n_rows == 1000
    assert int(group0.mask(ref).sum()) == 800


def test_shifted_reference_no_shift():
    group0 = Predicate.parse("x0 > 3")
    ref = shifted_reference(_two_groups(), group0, 0.0, 500, SeededRng(0))
    assert not group0.mask(ref).any()


def test_shifted_reference_rounds_half_up():
    group0 = Predicate.parse("x0 > 3")
    ref = shifted_reference(_two_groups(), group0, 0.25, 10, SeededRng(0))
    assert int(group0.mask(ref).sum()) == 3


def test_shifted_reference_errors():
    group0 = Predicate.parse("x0 > 3")
    with pytest.raises(SizeError):
        shifted_reference(_two_groups(n0=0), group0, 1.0, 10, SeededRng(0))
    with pytest.raises(ParameterError):
        shifted_reference(_two_groups(), group0, 1.5, 10, SeededRng(0))


def test_predicate_parse_and_mask():
    ds = Dataset.from_array([[1.0, 4.0], [2.0, -1.0]], ["a", "b"])
    np.testing.assert_array_equal(Predicate.parse("b <= 0").mask(ds), [False, True])
    with pytest.raises(ParameterError):
        Predicate.parse("b between 1 and 2")


def test_concat_preserves_rows():
    a, b = Dataset.from_array([[1.0]]), Dataset.from_array([[2.0], [3.0]])
    np.testing.assert_array_equal(concat([a, b]).values.ravel(), [1.0, 2.0, 3.0])
