import numpy as np

from halfscatter.config import RunConfig
from halfscatter.validation import (
    CHECKS,
    CriterionResult,
    check_resolvent_oracles,
    random_model,
    run_criterion,
    run_validation_suite,
)


def test_empty_suite():
    report = run_validation_suite(RunConfig(suite=()))
    assert report["criteria"] == [] and report["passed"] is True


def test_every_criterion_registered():
    assert sorted(CHECKS) == list(range(1, 12))


def test_short_lattice_fails_informatively():
    config = RunConfig(lattice_length=100)
    result = check_resolvent_oracles(config, np.random.default_rng(0))
    assert not result.passed
    line = result.summary()
    assert line.startswith("FAIL criterion 1")
    assert "max_lattice_error" in line and "tol 1e-08" in line


def test_seed_recorded_and_reproducible():
    a = run_criterion(5, RunConfig())
    b = run_criterion(5, RunConfig())
    assert a.seed == b.seed == RunConfig().seed + 5
    assert a.achieved == b.achieved


def test_exception_becomes_failure(monkeypatch):
    def broken(config, rng):
        raise RuntimeError("boom")

    monkeypatch.setitem(CHECKS, 5, broken)
    result = run_criterion(5, RunConfig())
    assert isinstance(result, CriterionResult)
    assert not result.passed
    assert "boom" in str(result.details)


def test_random_model_ranges():
    rng = np.random.default_rng(1)
    for _ in range(20):
        model = random_model(rng)
        assert 2 <= model.period <= 8
        assert 0 <= model.theta <= 2 * np.pi
