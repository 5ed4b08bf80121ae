import numpy as np
import pytest

from halfscatter.errors import BoundaryPointError, SingularMatrixError, ThresholdError
from halfscatter.fiber import ModelSpec, model_data
from halfscatter.oracles import extrapolated_boundary_oracle, quadrature_sandwich_oracle
from halfscatter.resolvent import (
    boundary_sandwich,
    continued_weight,
    full_sandwiched_resolvent,
    m_matrix,
    momentum_integral,
    sandwiched_resolvent,
)


def test_momentum_integral_examples():
    assert complex(momentum_integral(3j, 0.0)) == pytest.approx(1j / np.sqrt(13), abs=1e-15)
    assert complex(momentum_integral(3.0, 0.0)) == pytest.approx(-1 / np.sqrt(5), abs=1e-15)
    assert abs(complex(momentum_integral(1e8j, 0.0))) < 1e-7


def test_momentum_integral_matches_quadrature(rng):
    w = np.linspace(0, np.pi, 200001)
    for _ in range(5):
        z = complex(rng.uniform(-5, 5), rng.uniform(0.3, 2))
        lam = rng.uniform(-2, 2)
        values = 1.0 / (2 * np.cos(w) + lam - z)
        reference = np.trapezoid(values, w) / np.pi
        assert complex(momentum_integral(z, lam)) == pytest.approx(reference, abs=1e-9)


def test_momentum_integral_rejects_band():
    with pytest.raises(BoundaryPointError):
        momentum_integral(1.0, 0.0)


def test_sandwich_example_near_real_axis():
    model = ModelSpec((1.0, 1.0), 0.0)
    g = sandwiched_resolvent(5 + 0.01j, model)
    eig = model_data(model).eig
    limit = -(eig.projections[0] / np.sqrt(45) + eig.projections[1] / np.sqrt(5))
    assert np.linalg.norm(g - limit, 2) < 0.01
    assert g[0, 0].real == pytest.approx(-0.2981, abs=2e-3)


def test_sandwich_herglotz_and_reflection(rng):
    for _ in range(10):
        n = int(rng.integers(2, 7))
        model = ModelSpec(tuple(rng.normal(size=n)), rng.uniform(0, 2 * np.pi))
        z = complex(rng.uniform(-5, 5), rng.uniform(0.05, 2))
        g = sandwiched_resolvent(z, model)
        im = (g - g.conj().T) / 2j
        assert np.linalg.eigvalsh(im).min() > -1e-13
        np.testing.assert_allclose(sandwiched_resolvent(z.conjugate(), model), g.conj().T, atol=1e-14)


def test_sandwich_rejects_real():
    with pytest.raises(BoundaryPointError):
        sandwiched_resolvent(0.5, ModelSpec((1.0, 1.0), 0.0))


def test_sandwich_against_quadrature_oracle(rng):
    for _ in range(5):
        n = int(rng.integers(2, 6))
        model = ModelSpec(tuple(rng.normal(size=n)), rng.uniform(0, 2 * np.pi))
        z = complex(rng.uniform(-5, 5), rng.uniform(0.1, 1))
        np.testing.assert_allclose(sandwiched_resolvent(z, model), quadrature_sandwich_oracle(z, model), atol=1e-11)


def test_boundary_below_spectrum_is_hermitian():
    model = ModelSpec((1.0, -2.0, 0.5), 0.3)
    g = boundary_sandwich(-6.0, model)
    np.testing.assert_allclose(g, g.conj().T, atol=1e-15)
    assert np.linalg.eigvalsh(g).min() >= -1e-15


def test_boundary_imaginary_part_two_open_channels(two_channel_model):
    data = model_data(two_channel_model)
    g = boundary_sandwich(0.0, two_channel_model)
    beta2 = np.sqrt(np.abs((0.0 - data.lambdas) ** 2 - 4))
    expected = sum(data.sandwiches[j] / beta2[j] for j in range(2))
    np.testing.assert_allclose(g.imag, expected.real, atol=1e-14)


def test_boundary_against_extrapolated_oracle(two_channel_model):
    for energy in (0.0, -2.0, 1.3):
        np.testing.assert_allclose(boundary_sandwich(energy, two_channel_model), extrapolated_boundary_oracle(energy, two_channel_model), atol=1e-8)


def test_boundary_is_limit_of_resolvent(two_channel_model):
    b = boundary_sandwich(0.3, two_channel_model)
    errs = [np.linalg.norm(sandwiched_resolvent(0.3 + 1j * e, two_channel_model) - b) for e in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_boundary_rejects_threshold():
    with pytest.raises(ThresholdError):
        boundary_sandwich(0.0, ModelSpec((1.0, 1.0), 0.0))


def test_m_matrix_large_z_tends_to_u():
    model = ModelSpec((2.0, -1.0, 0.5), 1.0)
    np.testing.assert_allclose(m_matrix(1e7j, model), model_data(model).u, atol=1e-6)


def test_m_matrix_singular_at_bound_state(bound_state_model):
    with pytest.raises(SingularMatrixError):
        m_matrix(-4.0736530371873965, bound_state_model)


def test_full_resolvent_against_perturbed_lattice():
    from halfscatter.oracles import truncated_fiber_resolvent_oracle

    model = ModelSpec((1.0, -2.0), 0.8)
    z = 0.4 + 0.5j
    np.testing.assert_allclose(full_sandwiched_resolvent(z, model), truncated_fiber_resolvent_oracle(z, 400, model, free=False), atol=1e-10)


def test_continued_weight_quotient():
    value, quotient = continued_weight(0.5, 1e-3, 0.0)
    base, _ = continued_weight(0.5, 0.0, 0.0)
    assert (value - base) / 1e-6 == pytest.approx(quotient, rel=1e-5)
