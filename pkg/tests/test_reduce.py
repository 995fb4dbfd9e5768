import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from manidim.metrics import fisher_rao
from manidim.reduce import ReductionSpec, modulo_project, project_sequence


def test_modulo_grouping_four_to_two():
    spec = ReductionSpec(m_groups=2, source_dim=4)
    out = modulo_project([0.1, 0.2, 0.3, 0.4], spec)
    np.testing.assert_allclose(out, [0.4, 0.6], atol=1e-15)


def test_identity_when_m_equals_k():
    spec = ReductionSpec(m_groups=4, source_dim=4)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    np.testing.assert_array_equal(modulo_project(p, spec), p)


def test_single_group_collapses_to_one():
    spec = ReductionSpec(m_groups=1, source_dim=5)
    out = modulo_project([0.2, 0.2, 0.2, 0.2, 0.2], spec)
    np.testing.assert_allclose(out, [1.0], atol=1e-15)


def test_length_mismatch_rejected():
    spec = ReductionSpec(m_groups=2, source_dim=4)
    with pytest.raises(ValueError):
        modulo_project([0.5, 0.5], spec)


def test_spec_bounds():
    with pytest.raises(ValueError):
        ReductionSpec(m_groups=0, source_dim=4)
    with pytest.raises(ValueError):
        ReductionSpec(m_groups=5, source_dim=4)


def test_hand_summed_three_rows_k6_m3():
    # indices 0,3 -> group 0; 1,4 -> group 1; 2,5 -> group 2
    rows = [
        [0.05, 0.10, 0.15, 0.20, 0.25, 0.25],
        [0.30, 0.05, 0.05, 0.10, 0.40, 0.10],
        [1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6, 1 / 6],
    ]
    expected = [
        [0.25, 0.35, 0.40],
        [0.40, 0.45, 0.15],
        [1 / 3, 1 / 3, 1 / 3],
    ]
    out = project_sequence(rows, ReductionSpec(m_groups=3, source_dim=6))
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_sequence_projection_preserves_length():
    rng = np.random.default_rng(0)
    rows = rng.dirichlet(np.ones(11), size=7)
    out = project_sequence(rows, ReductionSpec(m_groups=4, source_dim=11))
    assert out.shape == (7, 4)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 30))
@settings(max_examples=50, deadline=None)
def test_mass_conservation(seed, m, k_extra):
    k = m + k_extra
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.ones(k))
    q = modulo_project(p, ReductionSpec(m_groups=m, source_dim=k))
    assert abs(q.sum() - p.sum()) < 1e-12
    assert np.all(q >= 0)


def test_linearity_in_mixtures():
    rng = np.random.default_rng(4)
    spec = ReductionSpec(m_groups=3, source_dim=10)
    p, q = rng.dirichlet(np.ones(10), size=2)
    for alpha in (0.0, 0.3, 0.9, 1.0):
        mixed = modulo_project(alpha * p + (1 - alpha) * q, spec)
        parts = alpha * modulo_project(p, spec) + (1 - alpha) * modulo_project(q, spec)
        np.testing.assert_allclose(mixed, parts, atol=1e-14)


def test_grouping_never_increases_fisher_rao():
    rng = np.random.default_rng(8)
    rows = rng.dirichlet(np.full(20, 0.4), size=30)
    spec = ReductionSpec(m_groups=7, source_dim=20)
    reduced = project_sequence(rows, spec)
    for t in range(30):
        for s in range(t + 1, 30):
            assert fisher_rao(reduced[t], reduced[s]) <= fisher_rao(rows[t], rows[s]) + 1e-9
