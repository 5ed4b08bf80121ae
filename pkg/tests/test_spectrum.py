import numpy as np
import pytest

from halfscatter.errors import ThresholdError
from halfscatter.fiber import ModelSpec, model_data
from halfscatter.oracles import truncated_spectrum_oracle
from halfscatter.resolvent import criterion_matrix
from halfscatter.spectrum import eigenvalue_test, point_spectrum, surface_dispersion


def _n2_condition(energy, theta, a):
    c = 2 * np.cos(theta / 2)
    return ((energy + c) ** 2 - 4) ** -0.5 + ((energy - c) ** 2 - 4) ** -0.5 - 2 / a**2


def test_bound_state_root_of_two_site_condition(bound_state_model):
    from scipy.optimize import brentq

    root = brentq(_n2_condition, -4.08, -4.07, args=(0.0, 1.0), xtol=1e-14)
    assert root == pytest.approx(-4.0738, abs=1e-3)
    test = eigenvalue_test(root, bound_state_model)
    assert test.kernel_dim == 1


def test_far_below_has_no_kernel(bound_state_model):
    assert eigenvalue_test(-10.0, bound_state_model).kernel_dim == 0


def test_threshold_rejected(bound_state_model):
    with pytest.raises(ThresholdError):
        eigenvalue_test(-4.0, bound_state_model)


def test_point_spectrum_single_bound_state(bound_state_model):
    spec = point_spectrum(bound_state_model)
    assert [(m, loc) for _, m, loc in spec.entries] == [(1, "below")]
    oracle = truncated_spectrum_oracle(2000, bound_state_model)
    assert spec.entries[0][0] == pytest.approx(oracle[0], abs=1e-6)


@pytest.mark.parametrize("theta", [0.0, np.pi / 2, 2.0, np.pi])
def test_two_upper_states(theta):
    model = ModelSpec((8.0, 8.0), theta)
    entries = point_spectrum(model).entries
    count = sum(m for _, m, loc in entries if loc == "above")
    assert count >= 2
    above = sorted(e for e, m, loc in entries if loc == "above" for _ in range(m))
    np.testing.assert_allclose(above, truncated_spectrum_oracle(2000, model), atol=1e-8)


def test_double_state_at_pi_has_multiplicity_two():
    entries = point_spectrum(ModelSpec((8.0, 8.0), np.pi)).entries
    assert entries == [(pytest.approx(8.246211251235321, abs=1e-9), 2, "above")]


def test_embedded_eigenvalue():
    entries = point_spectrum(ModelSpec((1.0, 0.0, 1.0, 0.0), 0.0)).entries
    embedded = [e for e, _, loc in entries if loc == "embedded"]
    assert embedded == [pytest.approx(np.sqrt(5), abs=1e-9)]


def test_criterion_matrix_hermitian(rng):
    for _ in range(10):
        model = ModelSpec(tuple(rng.normal(size=4)), rng.uniform(0, 2 * np.pi))
        lo, hi = model_data(model).eig.spectrum
        c = criterion_matrix(lo - rng.uniform(0.1, 3), model)
        np.testing.assert_allclose(c, c.conj().T, atol=1e-12)


def test_tiny_potential_spectrum_stable():
    model = ModelSpec((1e-6, 1e-6), 0.3)
    a = point_spectrum(model, xtol=1e-13)
    b = point_spectrum(model, xtol=5e-14)
    assert len(a.entries) == len(b.entries)


def test_dispersion_branch_below_continuum():
    thetas = np.linspace(0, 2 * np.pi, 16)
    result = surface_dispersion((0.0, -1.0), thetas)
    below = {}
    for theta, _, energy, _, loc in result.rows:
        if loc == "below":
            below[theta] = energy
    assert len(below) == len(thetas)
    for theta, energy in below.items():
        assert energy < -2 * abs(np.cos(theta / 2)) - 2


def test_dispersion_single_point():
    result = surface_dispersion((0.0, -1.0), [0.5])
    assert len(result.rows) == 1


def test_dispersion_sign_flip_runs():
    surface_dispersion((1.0, -0.5), [0.0, 1.0])
    surface_dispersion((-1.0, 0.5), [0.0, 1.0])
