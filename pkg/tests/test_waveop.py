import numpy as np
import pytest

from halfscatter.errors import EntryPointError, PreconditionError
from halfscatter.fiber import ModelSpec, model_data
from halfscatter.waveop import (
    RescaledGrid,
    b_minus,
    band_limited_samples,
    b_plus,
    channel_nodes,
    compactness_profile,
    decay_ratio,
    degeneracy_report,
    exceptional_limit,
    fourier_symbol,
    intertwining_defect,
    isometry_ratios,
    n_channel_function,
    pi_operator,
    theta_epsilon_apply,
    trace_quadrature,
    wave_operator,
    wave_operator_scan,
)

SMALL_GRID = RescaledGrid(257, 8.0)


def test_b_functions():
    assert float(b_plus(0.0)) == pytest.approx(np.sqrt(2.0))
    assert float(b_minus(0.0)) == 0.0
    s = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(b_plus(s) ** 2 + b_minus(s) ** 2, 2.0 * np.cosh(s) / np.cosh(s), rtol=1e-14)


def test_grid_validation():
    with pytest.raises(PreconditionError):
        RescaledGrid(128, 8.0)
    with pytest.raises(PreconditionError):
        RescaledGrid(129, -1.0)


@pytest.mark.parametrize("step", [1 / 32, 1 / 16])
def test_fourier_symbols(step):
    k = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(fourier_symbol("tanh", k, step), np.tanh(np.pi * k), atol=1e-3)
    np.testing.assert_allclose(fourier_symbol("sech", k, step), 1 / np.cosh(np.pi * k), atol=1e-3)


def test_fourier_symbol_unknown_kind():
    with pytest.raises(ValueError):
        fourier_symbol("sin", 0.0, 0.1)


def test_pi_operator_against_regularized_integral():
    grid = RescaledGrid(513, 8.0)
    pi = pi_operator(grid)
    func = lambda t: np.exp(-((t - 0.3) ** 2) / 2.0)
    sample = np.where(np.abs(grid.nodes) <= 3.0)[0][::16]
    direct = pi.apply(func(grid.nodes))[sample]
    errors = [np.max(np.abs(theta_epsilon_apply(func, grid.nodes[sample], eps) - direct)) for eps in (1e-1, 1e-2, 1e-3)]
    assert errors[2] < errors[1] < errors[0]
    assert errors[2] < 1e-2


def test_pi_split_sums_to_whole():
    pi = pi_operator(RescaledGrid(65, 4.0))
    np.testing.assert_allclose(pi.leading + pi.compact, pi.matrix, atol=1e-14)


def test_n_channel_function_direct_and_limit():
    model = ModelSpec((1.0, -1.0, 0.5), 0.7)
    lam = model_data(model).lambdas
    j, jp = 3, 1
    assert lam[j - 1] > lam[jp - 1]
    energy = lam[jp - 1] - 2.0 + 0.25 * (lam[j - 1] - lam[jp - 1])
    value = n_channel_function(energy, j, jp, model)
    assert value.shape == (3, 3) and np.all(np.isfinite(value))
    edge = lam[jp - 1] - 2.0
    at = n_channel_function(edge, j, jp, model)
    near = n_channel_function(edge + 1e-6, j, jp, model)
    assert np.linalg.norm(at - near) <= 1e-2 * max(1.0, np.linalg.norm(at))
    with pytest.raises(PreconditionError):
        n_channel_function(lam[j - 1], j, jp, model)


def test_n_channel_function_errors():
    model = ModelSpec((1.0, -1.0), 0.0)
    with pytest.raises(PreconditionError):
        n_channel_function(100.0, 1, 2, model)


def test_n_channel_threshold_extension_continuous():
    model = ModelSpec((1.0, 2.0, 3.0, 4.0), 0.0)
    data = model_data(model)
    lam = data.lambdas
    top, bottom = 4, 2
    edge = lam[top - 1] - 2.0
    assert edge == pytest.approx(0.0, abs=1e-12)
    near = n_channel_function(edge - 1e-5, top, bottom, model)
    at = n_channel_function(edge, top, bottom, model)
    assert np.linalg.norm(at - near) <= 1e-2 * max(1.0, np.linalg.norm(at))


def test_exceptional_limit_nondegenerate_small():
    np.testing.assert_allclose(exceptional_limit(ModelSpec((1.0, 2.0, 3.0, 4.0), 0.0)), 0.0, atol=1e-10)
    with pytest.raises(PreconditionError):
        exceptional_limit(ModelSpec((1.0, 2.0, 3.0), 0.0))


def test_degeneracy_parity_supported():
    rep = degeneracy_report(ModelSpec((1.0, 0.0, 1.0, 0.0), 0.0))
    assert rep.applicable and rep.degenerate and rep.consistent
    assert rep.special_form == "even-sites" or rep.special_form == "odd-sites"
    assert rep.norm_top_bottom > 1e-10


def test_degeneracy_generic():
    rep = degeneracy_report(ModelSpec((1.0, 2.0, 3.0, 4.0), 0.0))
    assert rep.applicable and not rep.degenerate and rep.consistent
    assert rep.norm_top_bottom <= 1e-10 and rep.norm_bottom_top <= 1e-10


def test_degeneracy_not_applicable():
    rep = degeneracy_report(ModelSpec((1.0, 0.0, 1.0, 0.0), np.pi / 3))
    assert not rep.applicable and not rep.degenerate
    assert rep.as_dict() == {"applicable": False, "is_theta_zero": False, "is_period_even": True}
    assert not degeneracy_report(ModelSpec((1.0, 0.0, 1.0), 0.0)).applicable


def test_small_potential_small_operator():
    model = ModelSpec((1.0, -1.0), np.pi / 2)
    norms = []
    for t in (0.1, 0.01, 0.001):
        wd = wave_operator(model.scaled(t), SMALL_GRID)
        fs = band_limited_samples(wd.model, SMALL_GRID, 4)
        norms.append(max(np.linalg.norm(wd.assembled @ f) for f in fs))
    assert norms[0] < 0.2
    assert norms[2] < norms[1] < norms[0]
    assert norms[1] / norms[0] == pytest.approx(0.1, rel=0.3)


def test_isometry_and_intertwining(two_channel_model):
    wd = wave_operator(two_channel_model, RescaledGrid(513, 8.0))
    np.testing.assert_allclose(isometry_ratios(wd, 4), 1.0, atol=0.03)
    assert np.max(intertwining_defect(wd, count=2)) <= 0.05


def test_singular_values_cached(two_channel_model):
    wd = wave_operator(two_channel_model, RescaledGrid(65, 4.0))
    sv = wd.singular_values("remainder")
    assert wd.singular_values("remainder") is sv
    np.testing.assert_allclose(wd.part("main"), wd.leading + wd.compact)


def test_decay_ratio_examples():
    assert decay_ratio(np.array([]), 8) == 0.0
    assert decay_ratio(np.array([2.0, 1.0, 0.5]), 8) == 0.5
    assert decay_ratio(np.array([4.0, 2.0, 1.0, 0.0]), 4) == 1.0


def test_compactness_profile_counts():
    generic = compactness_profile(ModelSpec((1.0, 2.0, 3.0, 4.0), 0.0), density=8)
    degenerate = compactness_profile(ModelSpec((1.0, 0.0, 1.0, 0.0), 0.0), density=8)
    assert len(generic.rows) == 3
    assert degenerate.rows[-1][3] >= generic.rows[-1][3]


def test_trace_quadrature_against_direct_integral(two_channel_model):
    from scipy.integrate import quad

    data = model_data(two_channel_model)
    grid = RescaledGrid(1025, 12.0)
    density = lambda j, mu: np.exp(-((mu - data.lambdas[j - 1]) ** 2))
    approx = trace_quadrature(two_channel_model, grid, density)
    exact = np.zeros(2, dtype=complex)
    for j in range(2):
        lam = data.lambdas[j]
        w = quad(lambda mu: density(j + 1, mu) / (4 - (mu - lam) ** 2) ** 0.25, lam - 2, lam + 2, limit=200)[0]
        exact += w * data.vhalf.conj().T @ data.eig.eigvecs[:, j]
    exact /= np.sqrt(np.pi)
    np.testing.assert_allclose(approx, exact, atol=1e-8)


def test_channel_nodes_shape(two_channel_model):
    nodes = channel_nodes(two_channel_model, SMALL_GRID)
    assert nodes.energies.shape == (2, SMALL_GRID.points)


def test_scan_rows():
    rows = wave_operator_scan((1.0, -1.0), [0.5, 2.0], RescaledGrid(129, 6.0), samples=2)
    assert [r["theta"] for r in rows] == [0.5, 2.0]
    assert all("norm_leading" in r for r in rows)
