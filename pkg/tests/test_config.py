import pytest

from mlda.config import RunConfig, load_config
from mlda.errors import ConfigurationError


def write(tmp_path, text):
    path = tmp_path / "run.toml"
    path.write_text(text)
    return path


def test_defaults_are_the_experiment():
    c = load_config()
    assert (c.m0, c.n_levels, c.n_modes, c.sigma, c.lam) == (5, 3, 24, 2.0, 0.3)
    assert c.n_obs == 25 and c.noise_std == 0.01 and c.subchain_lengths == [5, 5]
    assert (c.n_chains, c.n_samples, c.n_burnin) == (4, 5000, 2000)


def test_toml_overrides_and_alias(tmp_path):
    path = write(tmp_path, """
[model]
n_levels = 2
lambda = 0.5
sigma = 1

[sampler]
subchain_lengths = [3]
aem = false

[run]
n_chains = 2
""")
    c = load_config(path)
    assert c.n_levels == 2 and c.lam == 0.5 and c.subchain_lengths == [3] and not c.aem
    assert isinstance(c.sigma, float) and c.n_chains == 2
    assert c.n_samples == 5000


def test_round_trip(tmp_path):
    c = RunConfig(n_levels=2, subchain_lengths=[4], locations=[[0.25, 0.5], [0.75, 0.5]])
    assert RunConfig.from_dict(c.to_dict()) == c
    assert c.n_obs == 2
    assert "lambda" in c.to_dict()["model"]


@pytest.mark.parametrize("text", [
    "[model]\nbogus = 1\n",
    "[nowhere]\nm0 = 5\n",
    "[run]\nm0 = 5\n",
    "[model]\nm0 = = 5\n",
])
def test_bad_files_rejected(tmp_path, text):
    with pytest.raises(ConfigurationError):
        load_config(write(tmp_path, text))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("changes", [
    {"n_chains": 0},
    {"m0": 2},
    {"sigma": -1.0},
    {"tune_factor": 1.0},
    {"subchain_lengths": [5]},
    {"subchain_lengths": [5, 0]},
    {"n_levels": 1, "subchain_lengths": []},
    {"locations": [[0.0, 0.5]]},
    {"aem": "yes"},
    {"n_samples": -1},
])
def test_validation(changes):
    with pytest.raises(ConfigurationError):
        RunConfig(**changes)


def test_replace_ignores_none():
    c = RunConfig().replace(n_chains=None, base_seed=7)
    assert c.n_chains == 4 and c.base_seed == 7
