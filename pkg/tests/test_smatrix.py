import numpy as np
import pytest

from halfscatter.errors import EntryPointError
from halfscatter.fiber import ModelSpec, model_data
from halfscatter.oracles import timedomain_smatrix_probe
from halfscatter.smatrix import continuity_probe, embedded_limit, onshell_smatrix, smatrix_scan, threshold_limit

EMBEDDED = (ModelSpec((1.0, 0.0, 1.0, 0.0), 0.0), np.sqrt(5.0))


def test_two_channel_unitary(two_channel_model):
    s = onshell_smatrix(0.0, two_channel_model)
    assert s.open_channels == [1, 2]
    assert s.unitarity_defect() <= 1e-10


def test_single_channel_modulus_one(two_channel_model):
    s = onshell_smatrix(-2.0, two_channel_model)
    assert s.assembled.shape == (1, 1)
    assert abs(s.assembled[0, 0]) == pytest.approx(1.0, abs=1e-12)


def test_born_limit(two_channel_model):
    errs = [np.linalg.norm(onshell_smatrix(0.0, two_channel_model.scaled(t)).assembled - np.eye(2)) for t in (1.0, 0.1, 0.01)]
    assert errs[0] > errs[1] > errs[2]


def test_entry_points(two_channel_model):
    threshold = float(model_data(two_channel_model).eig.thresholds[1])
    with pytest.raises(EntryPointError):
        onshell_smatrix(threshold, two_channel_model)
    with pytest.raises(EntryPointError):
        threshold_limit(0.0, two_channel_model)
    with pytest.raises(EntryPointError):
        embedded_limit(0.0, two_channel_model)
    model, energy = EMBEDDED
    with pytest.raises(EntryPointError):
        onshell_smatrix(energy, model)


def test_scan_unitarity(rng):
    for _ in range(3):
        model = ModelSpec(tuple(rng.normal(size=4) * 2), rng.uniform(0, 2 * np.pi))
        lo, hi = model_data(model).eig.spectrum
        scan = smatrix_scan(model, np.linspace(lo, hi, 101))
        assert scan
        assert max(s.unitarity_defect() for s in scan) <= 1e-10


def test_single_edge_limit_is_zero():
    model = ModelSpec((1.0, -1.0), np.pi / 2)
    energy = float(model_data(model).eig.thresholds[1])
    rep = threshold_limit(energy, model)
    for side, cls in rep.classification.items():
        for (j, jp), label in cls.items():
            if label != "already-open" and (j in rep.channels[side]) and j != jp:
                np.testing.assert_allclose(rep.limits[side][(j, jp)], 0.0)


def test_both_edge_limit_against_numeric():
    model = ModelSpec((1.0, -1.0), 0.0)
    rep = threshold_limit(0.0, model)
    for side, sign in (("from-left", -1), ("from-right", 1)):
        errs = []
        for k2 in (1e-4, 1e-6):
            s = onshell_smatrix(sign * k2, model)
            pos = {j: a for a, j in enumerate(s.open_channels)}
            idx = [pos[j] for j in rep.channels[side]]
            errs.append(np.max(np.abs(s.assembled[np.ix_(idx, idx)] - rep.coefficients[side])))
        assert errs[1] < errs[0]
        assert errs[1] <= 10 * 1e-3


def test_already_open_pair_two_sided():
    model = ModelSpec((1.0, -1.0, 0.5), 0.7)
    data = model_data(model)
    for energy in data.eig.thresholds:
        rep = threshold_limit(float(energy), model)
        left = continuity_probe(energy, model, [1e-4], "from-left").rows[0][1]
        right = continuity_probe(energy, model, [1e-4], "from-right").rows[0][1]
        for side in ("from-left", "from-right"):
            opened = [j for j in rep.channels[side] if all(rep.classification[side][(j, jp)] == "already-open" for jp in [j])]
            assert opened is not None
        assert np.isfinite(left) and np.isfinite(right)


def test_continuity_probe_orders():
    model = ModelSpec((1.0, -1.0), 0.0)
    table = continuity_probe(0.0, model, 2.0 ** -np.arange(8, 14), "from-right")
    errors = [e for _, e in table.rows]
    assert all(b < a for a, b in zip(errors[:-1], errors[1:]))
    assert table.order >= 0.9


def test_continuity_probe_empty():
    table = continuity_probe(0.0, ModelSpec((1.0, -1.0), 0.0), [])
    assert table.rows == [] and table.order is None


def test_embedded_limit_unitary():
    model, energy = EMBEDDED
    lim = embedded_limit(energy, model)
    a = lim.assembled
    assert np.linalg.norm(a @ a.conj().T - np.eye(a.shape[0])) <= 1e-8
    for side in ("from-left", "from-right"):
        table = continuity_probe(energy, model, [1e-3], side)
        assert table.rows[0][1] <= 10 * 1e-3


def test_timedomain_probe_matches(two_channel_model):
    s = onshell_smatrix(0.0, two_channel_model)
    probe = timedomain_smatrix_probe(two_channel_model, 0.0, incoming=1)
    for (j, jp), value in probe.blocks.items():
        assert abs(value - s.assembled[j - 1, jp - 1]) <= 5e-2
    assert sum(abs(v) ** 2 for v in probe.blocks.values()) == pytest.approx(1.0, abs=5e-2)


def test_timedomain_probe_free_limit(two_channel_model):
    probe = timedomain_smatrix_probe(two_channel_model.scaled(1e-6), 0.0, incoming=2)
    assert abs(probe.blocks[(2, 2)]) == pytest.approx(1.0, abs=1e-3)
    assert abs(probe.blocks[(1, 2)]) < 1e-3
