import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from derivlab.algebra import (
    DimensionError,
    NormKind,
    generate_samples,
    identity,
    mul,
    norm,
    random_unit_element,
    sample_unit_circle,
    zero,
)

KINDS = [NormKind.FROBENIUS, NormKind.OPERATOR2]


def test_mul_examples():
    x = random_unit_element(3, 2)
    np.testing.assert_array_equal(mul(identity(2), x), x)
    np.testing.assert_array_equal(mul(zero(2), x), zero(2))
    a = np.array([[0, 1], [0, 0]])
    b = np.array([[0, 0], [1, 0]])
    np.testing.assert_array_equal(mul(a, b), np.array([[1, 0], [0, 0]]))


def test_mul_dimension_mismatch():
    with pytest.raises(DimensionError):
        mul(identity(2), identity(3))


def test_norm_examples():
    assert norm(zero(3)) == 0.0
    assert norm(zero(3), "operator2") == 0.0
    assert norm(identity(2)) == pytest.approx(np.sqrt(2), abs=1e-15)
    assert norm(np.array([[0, 1], [0, 0]]), NormKind.OPERATOR2) == pytest.approx(1.0, abs=1e-15)


def test_operator_norm_is_largest_singular_value():
    x = random_unit_element(5, 3)
    assert norm(x, "operator2") == pytest.approx(np.linalg.svd(x, compute_uv=False)[0], rel=1e-14)


def test_unit_circle():
    assert sample_unit_circle(1) == [1]
    np.testing.assert_allclose(sample_unit_circle(2), [1, -1], atol=1e-15)
    np.testing.assert_allclose(sample_unit_circle(4), [1, 1j, -1, -1j], atol=1e-15)
    for lam in sample_unit_circle(37):
        assert abs(abs(lam) - 1) <= 1e-14
    with pytest.raises(ValueError):
        sample_unit_circle(0)


def test_samples_deterministic():
    a = generate_samples(7, 3, 5, 0.7)
    b = generate_samples(7, 3, 5, 0.7)
    for x, y in zip(a.points, b.points):
        assert x.tobytes() == y.tobytes()
    for (x1, y1), (x2, y2) in zip(a.pair_points, b.pair_points):
        assert x1.tobytes() == x2.tobytes() and y1.tobytes() == y2.tobytes()
    c = generate_samples(8, 3, 5, 0.7)
    assert not np.array_equal(a.points[0], c.points[0])


@pytest.mark.parametrize("radius", [1.0, 0.5])
@pytest.mark.parametrize("kind", KINDS)
def test_samples_postconditions(radius, kind):
    s = generate_samples(1, 2, 8, radius, kind)
    assert len(s.points) == 8 and len(s.pair_points) == 8
    for x in list(s.points) + [z for p in s.pair_points for z in p]:
        assert x.shape == (2, 2)
        assert 0 < norm(x, kind) <= radius * (1 + 1e-15)
        assert not x.flags.writeable


def test_samples_validation():
    with pytest.raises(ValueError):
        generate_samples(1, 2, 0)
    with pytest.raises(ValueError):
        generate_samples(1, 2, 3, radius=0)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), dim=st.integers(1, 4), alpha=st.complex_numbers(max_magnitude=1e3))
def test_norm_axioms(seed, dim, alpha):
    s = generate_samples(seed, dim, 4)
    for kind in KINDS:
        for x, y in s.pair_points:
            nx, ny = norm(x, kind), norm(y, kind)
            assert norm(x @ y, kind) <= nx * ny + 1e-12
            assert norm(x + y, kind) <= nx + ny + 1e-12
            assert norm(alpha * x, kind) == pytest.approx(abs(alpha) * nx, rel=1e-12, abs=1e-300)
