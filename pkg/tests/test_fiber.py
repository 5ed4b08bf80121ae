import numpy as np
import pytest

from halfscatter.errors import InvalidModelError
from halfscatter.fiber import (
    ModelSpec,
    band_structure,
    beta_factor,
    build_fiber_matrix,
    degenerate_pairs,
    fiber_eigensystem,
    remark_degenerate_pairs,
    split_potential,
)


@pytest.mark.parametrize("theta", [0.0, 0.7, np.pi / 2, 2.5])
def test_two_site_fiber_matrix(theta):
    expected = np.array([[0, 1 + np.exp(-1j * theta)], [1 + np.exp(1j * theta), 0]])
    np.testing.assert_allclose(build_fiber_matrix(theta, 2), expected, atol=1e-15)


def test_three_site_circulant_at_zero():
    expected = np.ones((3, 3)) - np.eye(3)
    np.testing.assert_allclose(build_fiber_matrix(0.0, 3), expected)


def test_two_site_at_pi_vanishes():
    assert np.all(build_fiber_matrix(np.pi, 2) == 0)


def test_period_one_rejected():
    with pytest.raises(InvalidModelError):
        build_fiber_matrix(0.0, 1)


@pytest.mark.parametrize("theta", [0.0, 1.1, 3.0, 5.9])
def test_two_site_eigenvalues(theta):
    eig = fiber_eigensystem(theta, 2)
    np.testing.assert_allclose(eig.lambdas, [-2 * np.cos(theta / 2), 2 * np.cos(theta / 2)], atol=1e-14)


def test_two_site_projections_at_zero():
    eig = fiber_eigensystem(0.0, 2)
    np.testing.assert_allclose(eig.projections[0], 0.5 * np.array([[1, -1], [-1, 1]]), atol=1e-15)
    np.testing.assert_allclose(eig.projections[1], 0.5 * np.array([[1, 1], [1, 1]]), atol=1e-15)


def test_four_site_eigenvalues_at_zero():
    eig = fiber_eigensystem(0.0, 4)
    np.testing.assert_allclose(eig.lambdas, [0, -2, 0, 2], atol=1e-15)
    assert degenerate_pairs(eig) == [(1, 3)]


@pytest.mark.parametrize("period", [2, 3, 5, 8])
@pytest.mark.parametrize("theta", [0.0, 0.4, np.pi, 4.0])
def test_eigensystem_diagonalizes_matrix(period, theta):
    eig = fiber_eigensystem(theta, period)
    a = build_fiber_matrix(theta, period)
    np.testing.assert_allclose(a @ eig.eigvecs, eig.eigvecs * eig.lambdas, atol=1e-13)
    np.testing.assert_allclose(eig.eigvecs.conj().T @ eig.eigvecs, np.eye(period), atol=1e-13)
    np.testing.assert_allclose(eig.projections.sum(axis=0), np.eye(period), atol=1e-13)


@pytest.mark.parametrize("label,theta", [("0", 0.0), ("pi", np.pi), ("2pi", 2 * np.pi)])
@pytest.mark.parametrize("period", [2, 3, 4, 5, 6, 7])
def test_degenerate_pairs_match_case_list(label, theta, period):
    assert degenerate_pairs(fiber_eigensystem(theta, period)) == remark_degenerate_pairs(label, period)


def test_band_structure_touching_bands():
    bs = band_structure(ModelSpec((1.0, 1.0), 0.0))
    np.testing.assert_allclose(bs.bands, [[-4, 0], [0, 4]], atol=1e-15)
    assert bs.spectrum == (-4.0, 4.0)


def test_band_structure_equal_bands_at_pi():
    bs = band_structure(ModelSpec((1.0, 1.0), np.pi))
    np.testing.assert_allclose(bs.bands, [[-2, 2], [-2, 2]], atol=1e-15)


@pytest.mark.parametrize("period", [2, 3, 6])
def test_spectrum_inside_minus_four_four(period, rng):
    for theta in rng.uniform(0, 2 * np.pi, 5):
        lo, hi = band_structure(ModelSpec(tuple(np.ones(period)), theta)).spectrum
        assert -4 - 1e-14 <= lo and hi <= 4 + 1e-14


def test_split_potential_examples():
    f = split_potential((0.0, -1.0))
    np.testing.assert_array_equal(f.u, np.diag([1.0, -1.0]))
    np.testing.assert_array_equal(f.vhalf, np.diag([0.0, 1.0]))
    f = split_potential((4.0, 9.0))
    np.testing.assert_array_equal(f.u, np.eye(2))
    np.testing.assert_array_equal(f.vhalf, np.diag([2.0, 3.0]))


def test_split_potential_identities(rng):
    v = rng.normal(size=5)
    f = split_potential(v)
    np.testing.assert_allclose(f.vhalf @ f.u @ f.vhalf, np.diag(v), atol=1e-15)
    np.testing.assert_allclose(f.u @ f.u, np.eye(5))


def test_zero_potential_rejected():
    with pytest.raises(InvalidModelError):
        split_potential((0.0, 0.0))
    with pytest.raises(InvalidModelError):
        ModelSpec((0.0, 0.0), 0.0)


def test_theta_range_checked():
    with pytest.raises(InvalidModelError):
        ModelSpec((1.0, 1.0), -0.1)


def test_beta_factor_examples():
    eig = fiber_eigensystem(np.pi, 2)  # lambda_1 = lambda_2 = 0
    assert beta_factor(0.0, 1, eig) == pytest.approx(np.sqrt(2))
    assert beta_factor(eig.lambdas[0] + 2.0, 1, eig) == pytest.approx(0.0, abs=1e-7)
    assert beta_factor(3.0, 2, eig) == pytest.approx(5 ** 0.25)
    assert beta_factor(3.0, 2, eig) == pytest.approx(1.4953, abs=1e-4)
