import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gsrecon.grid import FieldSample, field, inner, make_grid, norm


def test_midpoint_nodes_1d():
    g = make_grid(1, 4)
    np.testing.assert_allclose(g.nodes(), [1 / 8, 3 / 8, 5 / 8, 7 / 8])
    assert g.du == 0.25


def test_resolution_below_two_rejected():
    with pytest.raises(ValueError, match="resolution"):
        make_grid(1, 1)


def test_lattice_2d():
    g = make_grid(2, 16)
    U, V = g.nodes()
    assert U.shape == V.shape == (4, 4)
    assert g.du == 1 / 16
    np.testing.assert_allclose(U[:, 0], [1 / 8, 3 / 8, 5 / 8, 7 / 8])
    np.testing.assert_allclose(V[0, :], [1 / 8, 3 / 8, 5 / 8, 7 / 8])


def test_non_square_2d_rejected():
    with pytest.raises(ValueError, match="perfect square"):
        make_grid(2, 12)


@pytest.mark.parametrize("dim,res", [(1, 7), (1, 256), (2, 64), (2, 4096)])
def test_weights_sum_to_one_and_nodes_inside(dim, res):
    g = make_grid(dim, res)
    assert g.weights().sum() == pytest.approx(1.0, abs=1e-14)
    assert g.weights().size == res
    nodes = np.atleast_2d(np.asarray(g.nodes()))
    assert nodes.min() > 0 and nodes.max() < 1


def test_inner_examples(grid256):
    one = field(grid256, lambda u: np.ones_like(u))
    e1 = field(grid256, lambda u: np.exp(2j * np.pi * u))
    assert inner(one, one) == pytest.approx(1.0)
    assert abs(inner(e1, one)) < 1e-14
    assert inner(e1, e1) == pytest.approx(1.0)


def test_inner_grid_mismatch():
    with pytest.raises(ValueError, match="grid mismatch"):
        inner(make_grid(1, 8).zeros(), make_grid(1, 16).zeros())


def test_norm_examples(grid256):
    assert norm(grid256.zeros()) == 0
    assert norm(field(grid256, lambda u: 3 + 0 * u)) == pytest.approx(3.0)
    haar = field(grid256, lambda u: np.where(u < 0.5, 1.0, -1.0))
    assert norm(haar) == pytest.approx(1.0)


def test_trig_polynomials_integrate_exactly():
    g = make_grid(1, 64)
    for k in range(-31, 32):
        for j in range(-31, 32):
            if (k - j) % 64 == 0 and k != j:
                continue
            val = inner(field(g, lambda u: np.exp(2j * np.pi * k * u)),
                        field(g, lambda u: np.exp(2j * np.pi * j * u)))
            assert abs(val - (1.0 if k == j else 0.0)) < 1e-13


def test_field_sample_is_read_only(grid256):
    f = grid256.zeros()
    with pytest.raises(ValueError):
        f.values[0] = 1.0


def test_field_sample_arithmetic(grid256, rng):
    a = FieldSample(grid256, rng.standard_normal(256))
    b = FieldSample(grid256, rng.standard_normal(256))
    np.testing.assert_allclose((a + b - b).values, a.values)
    np.testing.assert_allclose((2 * a).values, (a * 2).values)
    np.testing.assert_allclose((-a).values, -a.values)


def test_field_sample_length_checked(grid256):
    with pytest.raises(ValueError, match="expected 256"):
        FieldSample(grid256, np.zeros(10))


_vals = st.lists(st.floats(-10, 10, allow_nan=False), min_size=32, max_size=32)


@settings(max_examples=40, deadline=None)
@given(_vals, _vals, _vals, _vals, _vals, _vals,
       st.complex_numbers(max_magnitude=5), st.complex_numbers(max_magnitude=5))
def test_inner_sesquilinear_and_cauchy_schwarz(fr, fi, gr, gi, hr, hi, a, c):
    grid = make_grid(1, 32)
    f = FieldSample(grid, np.array(fr) + 1j * np.array(fi))
    g = FieldSample(grid, np.array(gr) + 1j * np.array(gi))
    h = FieldSample(grid, np.array(hr) + 1j * np.array(hi))
    scale = 1 + norm(f) * norm(g) + norm(h) * (norm(f) + norm(g))
    assert abs(inner(f * a + h, g) - (a * inner(f, g) + inner(h, g))) < 1e-10 * scale
    assert abs(inner(f, g * c) - np.conj(c) * inner(f, g)) < 1e-10 * scale
    assert abs(inner(f, g) - np.conj(inner(g, f))) < 1e-12 * scale
    assert abs(inner(f, g)) <= norm(f) * norm(g) + 1e-12 * scale
    assert norm(f + g) <= norm(f) + norm(g) + 1e-12 * scale
    assert math.isclose(norm(f * c), abs(c) * norm(f), rel_tol=1e-12, abs_tol=1e-12)
