import numpy as np
import pytest

from halfscatter.errors import InvalidRunError
from halfscatter.fiber import ModelSpec, build_fiber_matrix
from halfscatter.oracles import (
    apply_fiber_free,
    apply_free_hamiltonian,
    bloch_transform,
    chebyshev_propagate,
    extrapolated_boundary_oracle,
    quadrature_sandwich_oracle,
    truncated_fiber,
    truncated_fiber_resolvent_oracle,
    truncated_spectrum_oracle,
)
from halfscatter.resolvent import sandwiched_resolvent as sandwich
from halfscatter.spectrum import point_spectrum


def test_lattice_against_closed_form():
    model = ModelSpec((1.0, -1.0, 0.5), 0.4)
    lattice = truncated_fiber_resolvent_oracle(3j, 2000, model)
    np.testing.assert_allclose(lattice, sandwich(3j, model), atol=1e-10)


def test_lattice_real_z_symmetric():
    model = ModelSpec((1.0, 2.0), 0.0)
    out = truncated_fiber_resolvent_oracle(-7.0, 300, model)
    np.testing.assert_allclose(out, out.T, atol=1e-14)
    assert np.allclose(out.imag, 0.0)


def test_lattice_truncation_converged():
    model = ModelSpec((0.0, -1.0), 0.0)
    a = truncated_fiber_resolvent_oracle(2j, 100, model)
    b = truncated_fiber_resolvent_oracle(2j, 200, model)
    assert np.max(np.abs(a - b)) <= 1e-6


def test_quadrature_oracle_matches(two_channel_model):
    z = 0.3 + 0.5j
    np.testing.assert_allclose(quadrature_sandwich_oracle(z, two_channel_model), sandwich(z, two_channel_model), atol=1e-10)


def test_extrapolated_boundary(two_channel_model):
    from halfscatter.resolvent import boundary_sandwich

    np.testing.assert_allclose(
        extrapolated_boundary_oracle(0.4, two_channel_model), boundary_sandwich(0.4, two_channel_model), atol=1e-6
    )


def test_truncated_spectrum_examples(bound_state_model):
    assert truncated_spectrum_oracle(1000, bound_state_model)[0] == pytest.approx(-4.0736530371873965, abs=1e-6)
    weak = ModelSpec((0.1, 0.1), 0.0)
    expected = [e for e, m, loc in point_spectrum(weak).entries if loc != "embedded" for _ in range(m)]
    np.testing.assert_allclose(truncated_spectrum_oracle(400, weak), expected, atol=1e-6)


def test_truncated_fiber_hermitian():
    tf = truncated_fiber(ModelSpec((1.0, -2.0, 0.5), 1.1), 30)
    assert tf.size == 31 * 3
    d = (tf.h - tf.h.getH()).toarray()
    assert np.max(np.abs(d)) < 1e-14
    with pytest.raises(ValueError):
        truncated_fiber(ModelSpec((1.0,), 0.0), 0)


def _random_psi(rng, period, width=6, depth=5):
    return {(int(x), int(n)): complex(rng.normal(), rng.normal()) for x in range(-width, width) for n in range(depth) if rng.random() < 0.5}


def test_bloch_transform_example():
    seq, _ = bloch_transform({(3, 0): 1.0, (1, 2): 2.0}, np.pi / 2, 2)
    assert seq.shape == (3, 2)
    assert seq[0, 0] == pytest.approx(np.exp(-1j * np.pi / 2))
    assert seq[2, 0] == pytest.approx(2.0)


@pytest.mark.parametrize("theta", np.linspace(0, 2 * np.pi, 16, endpoint=False))
def test_bloch_intertwines_free_hamiltonian(theta, rng):
    period = 3
    psi = _random_psi(rng, period)
    lhs, _ = bloch_transform(apply_free_hamiltonian(psi), theta, period)
    seq, _ = bloch_transform(psi, theta, period)
    rhs = apply_fiber_free(seq, theta)
    rows = min(len(lhs), len(rhs))
    np.testing.assert_allclose(lhs[:rows], rhs[:rows], atol=1e-12)


def test_fiber_matrix_is_bloch_of_shift():
    a = build_fiber_matrix(0.7, 4)
    np.testing.assert_allclose(a, a.conj().T)


def test_chebyshev_unitary_and_exact():
    from scipy.linalg import expm

    rng = np.random.default_rng(3)
    h = rng.normal(size=(6, 6))
    h = (h + h.T) / 2
    vec = rng.normal(size=6)
    scale = 1.1 * np.max(np.abs(np.linalg.eigvalsh(h)))
    out = chebyshev_propagate(h, vec, 3.0, scale)
    np.testing.assert_allclose(out, expm(-3j * h) @ vec, atol=1e-10)
    assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(vec))


def test_probe_rejects_closed_energy(two_channel_model):
    from halfscatter.oracles import timedomain_smatrix_probe

    with pytest.raises(InvalidRunError):
        timedomain_smatrix_probe(two_channel_model, 10.0)
