"""The one sampling/transform convention everything else leans on."""

import numpy as np
import pytest

from kplanenet import fourier


def test_axis_and_spacing():
    ax = fourier.axis(4.0, 9)
    assert ax[0] == -4.0 and ax[-1] == 4.0 and len(ax) == 9
    assert fourier.spacing(4.0, 9) == 1.0
    np.testing.assert_allclose(np.diff(ax), 1.0, rtol=0, atol=1e-15)


def test_freqs_comb():
    w = fourier.freqs(4.0, 9)
    # period L = n*h = 9, so the fundamental is 2 pi / 9
    assert w[1] == pytest.approx(2 * np.pi / 9.0, rel=1e-15)
    assert w[0] == 0.0


def test_forward_matches_continuous_transform_on_gaussian():
    """Sampled unit Gaussian vs fhat(w) = sqrt(2 pi) exp(-w^2/2)."""
    X, n = 16.0, 257
    x = fourier.axis(X, n)
    spectrum = fourier.forward(np.exp(-0.5 * x ** 2), X)
    w = fourier.freqs(X, n)
    exact = np.sqrt(2 * np.pi) * np.exp(-0.5 * w ** 2)
    assert np.max(np.abs(spectrum - exact)) < 1e-12


def test_inverse_round_trip_is_exact(rng):
    values = rng.standard_normal((17, 23))
    back = fourier.inverse(fourier.forward(values, (3.0, 5.0)), (3.0, 5.0))
    assert np.max(np.abs(back.imag)) < 1e-13
    np.testing.assert_allclose(back.real, values, atol=1e-12)


def test_forward_partial_axes(rng):
    """Transforming one axis of a stack equals transforming each slice."""
    values = rng.standard_normal((4, 33))
    full = fourier.forward(values, 2.0, axes=(1,))
    for i in range(4):
        np.testing.assert_allclose(full[i], fourier.forward(values[i], 2.0),
                                   atol=1e-12)


def test_radial_multiplier_is_spectral_laplacian():
    X, n = 12.0, 129
    x = fourier.axis(X, n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    gauss = np.exp(-0.5 * (xx ** 2 + yy ** 2))
    got, residue = fourier.apply_radial_multiplier(gauss, (X, X),
                                                   lambda w: w ** 2)
    exact = (2.0 - xx ** 2 - yy ** 2) * gauss  # -Laplacian of the Gaussian
    assert residue < 1e-12
    assert np.max(np.abs(got - exact)) < 1e-9


def test_extent_count_mismatch_raises(rng):
    with pytest.raises(ValueError):
        fourier.forward(rng.standard_normal((8, 8)), (1.0, 2.0, 3.0))
    with pytest.raises(ValueError):
        fourier.inverse(rng.standard_normal((8, 8)).astype(complex), (1.0,))
