import math

import numpy as np
import pytest

from gsrecon import fpca, simulate
from gsrecon.bases import BasisSpec, build_basis
from gsrecon.grid import FieldSample, make_grid, norm


@pytest.fixture(scope="module")
def model1d():
    return simulate.gaussian_model_1d(make_grid(1, 1024))


def test_rng_stream_independent_and_reproducible():
    a = simulate.rng_stream(3, 1, 2).standard_normal(5)
    np.testing.assert_array_equal(a, simulate.rng_stream(3, 1, 2).standard_normal(5))
    assert not np.allclose(a, simulate.rng_stream(3, 2, 1).standard_normal(5))


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        simulate.NoiseSpec(sigma=-1.0)


# -- 1D model ---------------------------------------------------------------------------------


def test_model_structure(model1d):
    assert model1d.m0 == 10
    np.testing.assert_array_equal(model1d.eigvals, np.arange(10, 0, -1))
    gram = (model1d.fpcs.conj() @ model1d.fpcs.T) * model1d.grid.du
    assert np.abs(gram - np.eye(10)).max() < 1e-8


def test_model_rejects_bad_arguments():
    with pytest.raises(ValueError):
        simulate.gaussian_model_1d(make_grid(2, 64))
    with pytest.raises(ValueError):
        simulate.gaussian_model_1d(make_grid(1, 64), m0=11)


def test_bumps_vanish_at_the_boundary():
    ends = np.array([0.0, 1.0])
    for bumps in simulate.BUMP_TABLE:
        assert np.abs(simulate.bump_mixture(ends, bumps)).max() < 1e-6


def test_draw_examples(model1d):
    assert norm(simulate.draw_1d(model1d, None, xi=np.zeros(10))) == 0.0
    f = simulate.draw_1d(model1d, None, xi=np.eye(10)[0])
    np.testing.assert_allclose(f.values, math.sqrt(10) * model1d.fpcs[0], atol=1e-14)


def test_draw_covariance_monte_carlo(model1d):
    rng = simulate.rng_stream(1)
    draws = np.stack([simulate.draw_1d(model1d, rng).values for _ in range(10_000)])
    coeffs = draws @ model1d.fpcs.T * model1d.grid.du  # coordinates in the FPC frame
    cov = coeffs.T @ coeffs / len(coeffs)
    np.testing.assert_allclose(np.diag(cov), model1d.eigvals, rtol=0.05)
    off = cov - np.diag(np.diag(cov))
    assert np.abs(off).max() < 0.05 * model1d.eigvals.max()


def test_model_is_strictly_low_rank(model1d):
    rng = simulate.rng_stream(2)
    for _ in range(5):
        f = simulate.draw_1d(model1d, rng)
        resid = f.values - (model1d.fpcs.T @ (model1d.fpcs @ f.values * model1d.grid.du))
        assert np.abs(resid).max() < 1e-10


# -- phantoms ---------------------------------------------------------------------------------------


def test_phantom_zero_table():
    g = make_grid(2, 4096)
    assert norm(simulate.phantom(np.zeros((0, 6)), g)) == 0.0


def test_single_ellipse_area():
    g = make_grid(2, 512 * 512)
    img = simulate.phantom(np.array([[1.0, 0.5, 0.5, 0.0, 0.0, 0.0]]), g)
    # the image lives on [-1,1]^2, four times the unit square
    assert 4 * img.values.sum() * g.du == pytest.approx(math.pi / 4, abs=1e-3)


def test_default_phantom_matches_point_oracle():
    g = make_grid(2, 256 * 256)
    img = simulate.phantom(simulate.SHEPP_LOGAN_E0, g).values
    U, V = g.nodes()
    rng = np.random.default_rng(0)
    idx = rng.integers(0, 256, size=(1000, 2))
    for i, j in idx:
        x, y = 2 * U[i, j] - 1, 2 * V[i, j] - 1
        total = 0.0
        for A, a, b, x0, y0, phi in simulate.SHEPP_LOGAN_E0:
            t = math.radians(phi)
            xr = (x - x0) * math.cos(t) + (y - y0) * math.sin(t)
            yr = -(x - x0) * math.sin(t) + (y - y0) * math.cos(t)
            if (xr / a) ** 2 + (yr / b) ** 2 <= 1:
                total += A
        assert img[i, j] == total
    assert -1.0 <= img.min() and img.max() <= 1.0


def test_phantom_needs_2d_grid():
    with pytest.raises(ValueError):
        simulate.phantom(simulate.SHEPP_LOGAN_E0, make_grid(1, 64))


def test_perturbation_examples():
    E0 = simulate.SHEPP_LOGAN_E0
    np.testing.assert_array_equal(simulate.perturb_ellipses(E0, None, 0.0), E0)
    a = simulate.perturb_ellipses(E0, simulate.rng_stream(1), 0.05)
    b = simulate.perturb_ellipses(E0, simulate.rng_stream(2), 0.05)
    assert not np.allclose(a, b)
    assert np.all(a[:, 1:3] > 0) and np.all(np.abs(a[:, 3:5]) <= 1)
    with pytest.raises(ValueError):
        simulate.perturb_ellipses(E0, None, -1.0)


def test_perturbation_deviation_matches_table():
    rng = simulate.rng_stream(3)
    E0 = np.tile([0.0, 1.0, 1.0, 0.0, 0.0, 0.0], (1, 1))
    devs = np.stack([simulate.perturb_ellipses(E0, rng, 0.1)[0] - E0[0] for _ in range(4000)])
    np.testing.assert_allclose(devs.std(axis=0), 0.1 * simulate.PERTURBATION_SCALE, rtol=0.05)


# -- measurements and training sets ---------------------------------------------------------------------


def test_measure_examples(grid256, rng):
    F = build_basis(BasisSpec("fourier", 3), grid256)
    one = FieldSample(grid256, np.ones(256))
    np.testing.assert_allclose(simulate.measure(one, F).values, [1.0, 0.0, 0.0], atol=1e-14)
    f = FieldSample(grid256, rng.standard_normal(256))
    np.testing.assert_array_equal(simulate.measure(f, F).values, F.analyze(f.values))
    with pytest.raises(ValueError, match="grid mismatch"):
        simulate.measure(make_grid(1, 128).zeros(), F)
    with pytest.raises(ValueError, match="random generator"):
        simulate.measure(f, F, sigma=0.1)


def test_measurement_noise_variance(grid256):
    F = build_basis(BasisSpec("fourier", 12), grid256)
    f = grid256.zeros()
    sigma = 0.02 * math.sqrt(2)
    rng = simulate.rng_stream(4)
    w = np.stack([simulate.measure(f, F, sigma, rng).values for _ in range(100)])
    assert np.mean(np.abs(w) ** 2) == pytest.approx(sigma ** 2, rel=0.3)
    assert np.var(w.real) == pytest.approx(sigma ** 2 / 2, rel=0.3)
    assert np.var(w.imag) == pytest.approx(sigma ** 2 / 2, rel=0.3)


def test_training_set_identical_without_noise(model1d):
    rec = build_basis(BasisSpec("wavelet", 32, s=4), model1d.grid)
    a = simulate.make_training_set(model1d, 2, rec, 0.0, simulate.rng_stream(5))
    b = simulate.make_training_set(model1d, 2, rec, 0.0, simulate.rng_stream(5))
    np.testing.assert_array_equal(a.Y, b.Y)
    assert a.Y.shape == (2, 32) and a.basis_spec.count == 32
    with pytest.raises(ValueError):
        simulate.make_training_set(model1d, 1, rec, 0.0, simulate.rng_stream(5))


def test_training_rows_lie_in_projected_span(model1d):
    rec = build_basis(BasisSpec("wavelet", 64, s=4), model1d.grid)
    T = simulate.make_training_set(model1d, 20, rec, 0.0, simulate.rng_stream(6))
    C = rec.analyze(model1d.fpcs)  # 10 x 64
    Q, _ = np.linalg.qr(C.T)
    resid = T.Y - (T.Y @ Q) @ Q.T
    assert np.abs(resid).max() < 1e-10


def test_training_noise_is_real_for_the_1d_model(model1d):
    rec = build_basis(BasisSpec("wavelet", 32, s=4), model1d.grid)
    T = simulate.make_training_set(model1d, 50, rec, 0.01, simulate.rng_stream(7))
    assert not np.iscomplexobj(T.Y) and T.noise_sigma_tilde == 0.01


@pytest.mark.slow
def test_phantom_training_low_rank_and_snr():
    g = make_grid(2, 65536)
    rec = build_basis(BasisSpec("wavelet", 4096, dim=2, s=4), g)
    gen = simulate.PhantomGenerator(g, 0.05)
    rng = simulate.rng_stream(0, 0)
    fields = np.stack([gen(rng).values for _ in range(512)])
    X = rec.analyze(fields)
    Z = simulate.complex_noise(rng, 1e-4, X.shape)
    snr = np.mean(np.linalg.norm(X, axis=1) / np.linalg.norm(Z, axis=1))
    assert 30 < snr < 42
    model = fpca.fit_eigenmodel(X + Z, 230)
    assert fpca.explained_variance(model) > 0.98


def test_reproducible_phantoms():
    g = make_grid(2, 4096)
    gen = simulate.PhantomGenerator(g)
    a = gen(simulate.rng_stream(9, 1)).values
    np.testing.assert_array_equal(a, gen(simulate.rng_stream(9, 1)).values)
