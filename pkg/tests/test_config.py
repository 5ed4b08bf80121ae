import pytest

from halfscatter.config import ALL_CRITERIA, DEFAULT_TOLERANCES, RunConfig, load_config
from halfscatter.errors import ConfigError


def test_defaults():
    config = load_config(None)
    assert config == RunConfig()
    assert config.suite == ALL_CRITERIA
    assert config.model.period == 2
    assert config.tol("isometry") == DEFAULT_TOLERANCES["isometry"]


def test_parse_file(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(
        "[model]\npotential = 1, -1; 0.5\ntheta = 1.5\n"
        "[grid]\npoints = 257\nsmax = 6\n"
        "[oracle]\nlength = 500\n"
        "[run]\nseed = 7\nsuite = 1,5\noutput = out\n"
        "[tolerances]\nunitarity = 1e-8\n"
    )
    config = load_config(path)
    assert config.potential == (1.0, -1.0, 0.5)
    assert config.theta == 1.5
    assert (config.grid_points, config.grid_smax, config.lattice_length) == (257, 6.0, 500)
    assert config.suite == (1, 5) and config.seed == 7 and config.output == "out"
    assert config.tol("unitarity") == 1e-8
    assert config.tol("isometry") == DEFAULT_TOLERANCES["isometry"]
    assert config.as_dict()["potential"] == [1.0, -1.0, 0.5]


@pytest.mark.parametrize(
    "text",
    [
        "[oracle]\nlength = 50\n",
        "[grid]\npoints = 256\n",
        "[tolerances]\nnot_a_tolerance = 1\n",
        "[tolerances]\nunitarity = -1\n",
        "[run]\nsuite = 1,12\n",
        "[run]\nsuite = one\n",
        "[model]\npotential = a, b\n",
        "[grid]\npoints = many\n",
        "not an ini file",
    ],
)
def test_invalid_configs(tmp_path, text):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


def test_empty_suite(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text("[run]\nsuite = none\n")
    assert load_config(path).suite == ()
