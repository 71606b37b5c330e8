"""Configuration : fichier clé = valeur, unités, validation, variables d'environnement."""

import numpy as np
import pytest
from scipy.constants import hbar

from config.run_config import RunConfig, UnitKind, UnitMode, parse_eps_sweep, parse_grid
from config.settings import HelitubeSettings
from core.errors import ConfigError


def test_defaults():
    config = RunConfig()
    spec = config.validate()
    assert (spec.kappa, spec.tau, spec.rho0) == (1.0, 1.0, 0.1)
    assert (config.n_s, config.n_phi) == (64, 64)
    path = config.k_path()
    assert path.size == 101
    assert path[0] == 0.0 and path[-1] == pytest.approx(0.5)


def test_from_file(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text(
        "# tube plus fin\n"
        "kappa = 0.5\n"
        "rho0 = 0.2   # ε = 0.1\n"
        "grid = 16x8\n"
        "kpath = -0.25:0.25:11\n"
        "eps_sweep = 0.01, 0.02\n"
        "units = physical:1e-30\n",
        encoding="utf-8")
    config = RunConfig.from_file(conf)
    assert config.kappa == 0.5 and config.rho0 == 0.2
    assert (config.n_s, config.n_phi) == (16, 8)
    assert config.eps_sweep == (0.01, 0.02)
    assert config.units.kind is UnitKind.PHYSICAL
    np.testing.assert_allclose(config.k_path(), np.linspace(-0.25, 0.25, 11))
    assert config.validate().epsilon == pytest.approx(0.1)


@pytest.mark.parametrize("text", ["colour = blue\n", "kappa 1.0\n", "kappa = un\n"])
def test_bad_files(tmp_path, text):
    conf = tmp_path / "bad.conf"
    conf.write_text(text, encoding="utf-8")
    with pytest.raises(ConfigError):
        RunConfig.from_file(conf)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.from_file(tmp_path / "absent.conf")


def test_embedding_violation_is_a_config_error():
    with pytest.raises(ConfigError):
        RunConfig(kappa=1.0, rho0=1.5).validate()


@pytest.mark.parametrize("changes", [
    {"kpath": "0:0.8:3"},
    {"eps_sweep": "0.1,1.0"},
    {"perturbation": "exact"},
    {"grid": "1x8"},
    {"harmonics": "2"},
])
def test_validation_errors(changes):
    with pytest.raises(ConfigError):
        RunConfig().with_text_values(changes).validate()


def test_torsion_free_tube_needs_period():
    with pytest.raises(ConfigError):
        RunConfig(tau=0.0).validate()
    assert RunConfig(tau=0.0, period_s=6.0).validate().tau == 0.0


def test_units():
    assert UnitMode.parse("natural").energy_factor == 1.0
    physical = UnitMode.parse("physical:9.1093837e-31")
    assert physical.energy_factor == pytest.approx(hbar ** 2 / (2 * 9.1093837e-31))
    assert physical.label() == "physical:9.1093837e-31"
    for text in ("physical:-1", "physical:abc", "si"):
        with pytest.raises(ConfigError):
            UnitMode.parse(text)


def test_period_only_for_torsion_free_tube():
    with pytest.raises(ConfigError):
        RunConfig(period_s=6.0).validate()
    with pytest.raises(ConfigError):
        RunConfig(tau=0.0, period_s=-1.0).validate()


def test_numerical_steps_follow_config():
    config = RunConfig().with_text_values({"fd_step": "1e-3", "resonance_delta": "2e-6", "tau": "0.5"})
    spec = config.validate()
    assert config.mass_step(spec) == pytest.approx(5e-4)
    assert config.resonance_threshold(spec.tau) == pytest.approx(5e-7)
    torus = RunConfig(tau=0.0, period_s=6.0, fd_step=1e-3)
    assert torus.mass_step(torus.validate()) == pytest.approx(1e-2)
    with pytest.raises(ConfigError):
        RunConfig(fd_step=0.0).validate()


def test_parsers():
    assert parse_grid("32X16") == (32, 16)
    assert parse_eps_sweep("0.1, 0.2,") == (0.1, 0.2)
    with pytest.raises(ConfigError):
        parse_grid("64")


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("HELITUBE_THREADS", "3")
    assert HelitubeSettings.threads() == 3
    assert RunConfig().worker_count() == 3
    assert RunConfig(threads=2).worker_count() == 2
    monkeypatch.setenv("HELITUBE_THREADS", "beaucoup")
    assert 1 <= HelitubeSettings.threads() <= 4
