"""Configuration d'une exécution : fichier `clé = valeur`, surchargé par les options CLI."""

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy.constants import hbar

from config.settings import HelitubeSettings
from core.errors import ConfigError
from core.geometry import HelixSpec

SETTINGS = HelitubeSettings()


class UnitKind(Enum):
    NATURAL = "natural"
    PHYSICAL = "physical"


@dataclass(frozen=True)
class UnitMode:
    kind: UnitKind = UnitKind.NATURAL
    mu: Optional[float] = None

    @classmethod
    def parse(cls, text):
        text = str(text).strip()
        if text == "natural":
            return cls()
        if text.startswith("physical:"):
            try:
                mu = float(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"masse invalide dans {text!r}")
            if not (mu > 0 and math.isfinite(mu)):
                raise ConfigError(f"la masse doit être > 0 : {text!r}")
            return cls(UnitKind.PHYSICAL, mu)
        raise ConfigError(f"unités inconnues {text!r} (natural | physical:<mu>)")

    @property
    def energy_factor(self):
        """ħ²/2μ en mode physique, 1 sinon."""
        if self.kind is UnitKind.NATURAL:
            return 1.0
        return hbar ** 2 / (2.0 * self.mu)

    def label(self):
        return "natural" if self.kind is UnitKind.NATURAL else f"physical:{self.mu!r}"


def parse_grid(text):
    try:
        n_s, n_phi = (int(part) for part in str(text).lower().split("x"))
    except ValueError:
        raise ConfigError(f"grille invalide {text!r} (attendu NxM)")
    return n_s, n_phi


def parse_kpath(text):
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ConfigError(f"chemin en k invalide {text!r} (attendu a:b:n)")
    try:
        return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"chemin en k invalide {text!r}")


def parse_eps_sweep(text):
    try:
        return tuple(float(v) for v in str(text).split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"balayage en ε invalide {text!r}")


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"{key} : nombre attendu, reçu {text!r}")


def _parse_int(key, text):
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key} : entier attendu, reçu {text!r}")


@dataclass(frozen=True)
class RunConfig:
    kappa: float = SETTINGS.KAPPA
    tau: float = SETTINGS.TAU
    rho0: float = SETTINGS.RHO0
    s0: float = SETTINGS.S0
    n_s: int = SETTINGS.N_S
    n_phi: int = SETTINGS.N_PHI
    n_harmonics: int = SETTINGS.N_HARMONICS
    kpath_start: Optional[float] = None
    kpath_end: Optional[float] = None
    kpath_count: int = SETTINGS.KPATH_POINTS
    transverse_n: float = 0.0
    eps_sweep: Tuple[float, ...] = SETTINGS.EPS_SWEEP
    out: Path = SETTINGS.DEFAULT_OUT_DIR
    units: UnitMode = field(default_factory=UnitMode)
    perturbation: str = "published"
    max_dimension: int = SETTINGS.MAX_DIMENSION
    fd_step: float = SETTINGS.FD_STEP
    resonance_delta: float = SETTINGS.RESONANCE_DELTA
    threads: Optional[int] = None
    period_s: Optional[float] = None
    seed: int = SETTINGS.SEED
    vkin_offset: float = 0.0

    @classmethod
    def from_file(cls, path):
        """Lit un fichier plat `clé = valeur` ; `#` commence un commentaire."""
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"lecture impossible de {path} : {e}")
        values = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno} : ligne sans '=' : {raw!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            values[key] = value
        return cls().with_text_values(values)

    def with_text_values(self, values):
        """Applique des valeurs texte (fichier de config) clé par clé."""
        changes = {}
        for key, text in values.items():
            if key == "grid":
                changes["n_s"], changes["n_phi"] = parse_grid(text)
            elif key == "kpath":
                changes["kpath_start"], changes["kpath_end"], changes["kpath_count"] = parse_kpath(text)
            elif key == "eps_sweep":
                changes["eps_sweep"] = parse_eps_sweep(text)
            elif key == "units":
                changes["units"] = UnitMode.parse(text)
            elif key == "out":
                changes["out"] = Path(text)
            elif key == "perturbation":
                changes["perturbation"] = text
            elif key in ("harmonics", "n_harmonics"):
                changes["n_harmonics"] = _parse_int(key, text)
            elif key in ("max_dimension", "seed", "threads", "n_s", "n_phi", "kpath_count"):
                changes[key] = _parse_int(key, text)
            elif key in ("kappa", "tau", "rho0", "s0", "transverse_n", "fd_step",
                         "resonance_delta", "period_s", "vkin_offset"):
                changes[key] = _parse_float(key, text)
            else:
                raise ConfigError(f"clé de configuration inconnue : {key!r}")
        return replace(self, **changes)

    def validate(self):
        """Vérifie la configuration et retourne le HelixSpec correspondant."""
        try:
            spec = HelixSpec(kappa=self.kappa, tau=self.tau, rho0=self.rho0, s0=self.s0)
        except ValueError as e:
            raise ConfigError(f"tube invalide : {e}") from e
        if self.n_s < 2 or self.n_phi < 2:
            raise ConfigError(f"grille {self.n_s}x{self.n_phi} : il faut au moins 2x2")
        if self.n_harmonics < 3:
            raise ConfigError("harmonics doit être ≥ 3")
        if self.kpath_count < 1:
            raise ConfigError("le chemin en k doit contenir au moins un point")
        if self.max_dimension < 1:
            raise ConfigError("max_dimension doit être ≥ 1")
        if not (self.fd_step > 0 and self.resonance_delta > 0):
            raise ConfigError("fd_step et resonance_delta doivent être > 0")
        if self.perturbation not in ("published", "consistent"):
            raise ConfigError(f"perturbation inconnue {self.perturbation!r}")
        if self.threads is not None and self.threads < 1:
            raise ConfigError("threads doit être ≥ 1")
        if any(not (0 <= eps < 1) for eps in self.eps_sweep):
            raise ConfigError("les valeurs de eps_sweep doivent être dans [0, 1)")
        if self.tau == 0 and self.period_s is None:
            raise ConfigError("τ = 0 : fournir period_s")
        if self.tau != 0 and self.period_s is not None:
            raise ConfigError(f"period_s n'est permis que pour τ = 0 (la période vaut ici 2π/|τ| = {spec.period_s:.6g})")
        if self.period_s is not None and not self.period_s > 0:
            raise ConfigError("period_s doit être > 0")
        half_zone = abs(self.tau) / 2.0
        for k in (self.kpath_start, self.kpath_end):
            if k is not None and abs(k) > half_zone * (1 + 1e-12):
                raise ConfigError(f"k_s = {k} hors de la première zone [−{half_zone}, {half_zone}]")
        return spec

    def k_path(self):
        """Valeurs de k_s du chemin ; par défaut centre → bord de zone."""
        start = 0.0 if self.kpath_start is None else self.kpath_start
        end = abs(self.tau) / 2.0 if self.kpath_end is None else self.kpath_end
        return np.linspace(start, end, self.kpath_count)

    def worker_count(self):
        return self.threads or SETTINGS.threads()

    def resonance_threshold(self, tau):
        """δ absolu : resonance_delta × τ²."""
        return self.resonance_delta * max(tau * tau, 1e-300)

    def mass_step(self, spec: HelixSpec):
        """Pas des différences finies de la masse effective : fd_step × τ (× 1/ρ₀ si τ = 0)."""
        return self.fd_step * (abs(spec.tau) if spec.tau else 1.0 / spec.rho0)
