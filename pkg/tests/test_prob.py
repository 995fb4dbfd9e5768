import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manidim.prob import (
    FilterSpec,
    InvalidDistributionError,
    apply_filter,
    entropy_bits,
    renormalize,
    shannon_entropy,
    validate,
)


def test_validate_accepts_valid_distribution():
    assert validate([[0.5, 0.5]]) == []


def test_validate_flags_bad_sum():
    out = validate([[0.5, 0.6]])
    assert len(out) == 1
    assert out[0].row == 0
    assert out[0].kind == "sum"


def test_validate_flags_negative_entry_but_not_sum():
    # -0.1 + 1.1 = 1.0, so only the sign rule fires
    out = validate([[-0.1, 1.1]])
    assert [v.kind for v in out] == ["negative"]


def test_validate_reports_multiple_rows():
    out = validate([[0.5, 0.5], [0.9, 0.2], [-0.5, 1.5]])
    assert {(v.row, v.kind) for v in out} == {(1, "sum"), (2, "negative")}


def test_validate_respects_tolerance():
    rows = [[0.5, 0.5 + 5e-5]]
    assert validate(rows, tolerance=1e-4) == []
    assert len(validate(rows, tolerance=1e-9)) == 1


def test_renormalize_divides_by_row_sum():
    out = renormalize([[1.0, 3.0]])
    np.testing.assert_allclose(out, [[0.25, 0.75]])


def test_renormalize_rejects_zero_row():
    with pytest.raises(InvalidDistributionError):
        renormalize([[0.0, 0.0]])


def test_entropy_deterministic_vector_is_zero():
    assert shannon_entropy([1, 0, 0, 0]) == 0.0


def test_entropy_uniform_over_four_is_two_bits():
    assert shannon_entropy([0.25, 0.25, 0.25, 0.25]) == pytest.approx(2.0, abs=1e-12)


def test_entropy_uniform_over_two_with_zeros():
    assert shannon_entropy([0.5, 0.5, 0, 0]) == pytest.approx(1.0, abs=1e-12)


def test_entropy_rejects_invalid_vector():
    with pytest.raises(InvalidDistributionError):
        shannon_entropy([0.5, 0.6])


@given(st.lists(st.floats(0.001, 1.0), min_size=2, max_size=8), st.randoms())
@settings(max_examples=50, deadline=None)
def test_entropy_range_and_permutation_invariance(raw, pyrandom):
    p = np.asarray(raw)
    p /= p.sum()
    h = shannon_entropy(p, tolerance=1e-6)
    assert 0.0 <= h <= np.log2(p.size) + 1e-12
    perm = list(range(p.size))
    pyrandom.shuffle(perm)
    assert shannon_entropy(p[perm], tolerance=1e-6) == pytest.approx(h, abs=1e-9)


def test_filter_eta_strictness():
    seq = [[0.6, 0.4], [0.4, 0.6], [0.45, 0.55]]
    kept, idx = apply_filter(seq, FilterSpec(eta=0.5))
    assert idx.size == 0 and kept.shape[0] == 0  # all maxima >= 0.5
    kept, idx = apply_filter(seq, FilterSpec(eta=0.7))
    assert list(idx) == [0, 1, 2]


def test_filter_excludes_ties_at_eta():
    kept, idx = apply_filter([[0.5, 0.5]], FilterSpec(eta=0.5))
    assert idx.size == 0


def test_filter_eta_one_keeps_deterministic_rows():
    kept, idx = apply_filter([[1.0, 0.0], [0.3, 0.7]], FilterSpec(eta=1.0))
    assert list(idx) == [0, 1]


def test_filter_argmax_mode():
    seq = [[0.9, 0.1], [0.3, 0.7]]
    kept, idx = apply_filter(seq, FilterSpec(eta=0.5, argmax_word=0))
    assert list(idx) == [0]
    np.testing.assert_array_equal(kept, [[0.9, 0.1]])


def test_filter_argmax_requires_strict_excess():
    kept, idx = apply_filter([[0.5, 0.5]], FilterSpec(eta=0.5, argmax_word=0))
    assert idx.size == 0


def test_filter_entropy_band():
    seq = [[0.5, 0.5, 0.0, 0.0], [0.25, 0.25, 0.25, 0.25]]
    kept, idx = apply_filter(seq, FilterSpec(eta=1.0, entropy_min=1.5))
    assert list(idx) == [1]
    kept, idx = apply_filter(seq, FilterSpec(eta=1.0, entropy_max=1.5))
    assert list(idx) == [0]


def test_filter_preserves_order_and_is_idempotent():
    rng = np.random.default_rng(5)
    seq = rng.dirichlet(np.ones(6), size=200)
    spec = FilterSpec(eta=0.4, entropy_min=1.0, entropy_max=2.4)
    kept, idx = apply_filter(seq, spec)
    assert np.all(np.diff(idx) > 0)
    again, idx2 = apply_filter(kept, spec)
    np.testing.assert_array_equal(again, kept)
    assert list(idx2) == list(range(kept.shape[0]))


@given(st.integers(0, 2**32 - 1), st.floats(0.2, 0.99))
@settings(max_examples=30, deadline=None)
def test_filter_idempotence_property(seed, eta):
    rng = np.random.default_rng(seed)
    seq = rng.dirichlet(np.full(5, 0.7), size=60)
    spec = FilterSpec(eta=eta)
    kept, _ = apply_filter(seq, spec)
    if kept.shape[0]:
        again, _ = apply_filter(kept, spec)
        np.testing.assert_array_equal(again, kept)


def test_sparse_dirichlet_high_entropy_filter_retains_almost_nothing():
    # Symmetric concentration summing to 1 over a GPT-sized vocabulary:
    # rows are near-deterministic, so demanding >= 3 bits keeps ~none.
    rng = np.random.default_rng(77)
    k = 50257
    rows = np.empty((1000, k))
    for i0 in range(0, 1000, 200):
        g = rng.gamma(1.0 / k, size=(200, k))
        rows[i0 : i0 + 200] = g / g.sum(axis=1, keepdims=True)
    spec = FilterSpec(eta=0.5, entropy_min=3.0)
    _, idx = apply_filter(rows, spec)
    assert idx.size / 1000 < 0.01


def test_filter_spec_validation():
    with pytest.raises(ValueError):
        FilterSpec(eta=0.0)
    with pytest.raises(ValueError):
        FilterSpec(eta=1.2)
    with pytest.raises(ValueError):
        FilterSpec(eta=0.5, entropy_min=2.0, entropy_max=1.0)


def test_entropy_bits_matches_scalar():
    rng = np.random.default_rng(3)
    seq = rng.dirichlet(np.ones(7), size=20)
    ents = entropy_bits(seq)
    for row, h in zip(seq, ents):
        assert h == pytest.approx(shannon_entropy(row, tolerance=1e-6), abs=1e-12)
