"""Géométrie du tube hélicoïdal.

Repère de Frenet de l'hélice canonique, repère tourné (rotation minimale),
paramétrisation de la surface, facteur métrique h, application de Weingarten,
courbures et potentiel géométrique V_curv. Toutes les énergies sont en unités
naturelles 𝓔 = 2μE/ħ² (longueur⁻²).
"""

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Tuple

import numpy as np

from core.errors import DegenerateCurve, DegeneratePeriod, EmbeddingViolation


@dataclass(frozen=True)
class HelixSpec:
    """Paramètres d'un tube : courbure, torsion, rayon du tube, origine de θ."""

    kappa: float
    tau: float
    rho0: float
    s0: float = 0.0

    def __post_init__(self):
        for name in ("kappa", "tau", "rho0", "s0"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} doit être fini")
        if self.rho0 <= 0:
            raise ValueError(f"rho0 doit être > 0 (reçu {self.rho0})")
        if self.kappa < 0:
            raise ValueError(f"kappa doit être ≥ 0 (reçu {self.kappa})")
        if self.epsilon >= 1:
            raise EmbeddingViolation(
                f"ε = ρ₀κ = {self.epsilon:.6g} ≥ 1 : le tube n'est pas plongé")

    @property
    def epsilon(self) -> float:
        return self.rho0 * self.kappa

    @property
    def curvature_norm(self) -> float:
        """κ² + τ²"""
        return self.kappa ** 2 + self.tau ** 2

    @property
    def helix_radius(self) -> float:
        self._require_curve()
        return self.kappa / self.curvature_norm

    @property
    def pitch(self) -> float:
        self._require_curve()
        return self.tau / self.curvature_norm

    @property
    def alpha(self) -> float:
        # α = 1/√(R² + p²) = √(κ² + τ²)
        self._require_curve()
        return math.sqrt(self.curvature_norm)

    @property
    def period_s(self) -> float:
        if self.tau == 0:
            raise DegeneratePeriod("τ = 0 : pas de période en s, fournir period_s")
        return 2.0 * math.pi / abs(self.tau)

    @property
    def period_varphi(self) -> float:
        return 2.0 * math.pi * self.rho0

    def replace(self, **changes) -> "HelixSpec":
        return replace(self, **changes)

    def _require_curve(self):
        if self.curvature_norm == 0:
            raise DegenerateCurve("κ = τ = 0 : la courbe de base n'a pas de repère")


@dataclass(frozen=True)
class FrameSample:
    s: float
    t: np.ndarray
    n: np.ndarray
    b: np.ndarray
    theta: float = 0.0
    N: Optional[np.ndarray] = None
    B: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SurfaceSample:
    s: float
    phi: float
    varphi: float
    point: np.ndarray
    h: float
    kappa1: float
    kappa2: float
    M: float
    K: float
    v_curv: float


@dataclass(frozen=True)
class CellGrid:
    """Grille régulière de la cellule [0, period_s) × [−πρ₀, πρ₀).

    Le nœud (i, j) est (s_i, varphi_j) = (i·period_s/n_s, −πρ₀ + j·2πρ₀/n_phi).
    """

    n_s: int
    n_phi: int
    period_s: float
    rho0: float

    def __post_init__(self):
        if self.n_s < 2 or self.n_phi < 2:
            raise ValueError(f"grille {self.n_s}x{self.n_phi} : il faut n_s, n_phi ≥ 2")
        if not self.period_s > 0:
            raise ValueError("period_s doit être > 0")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n_s, self.n_phi)

    @property
    def period_varphi(self) -> float:
        return 2.0 * math.pi * self.rho0

    @property
    def ds(self) -> float:
        return self.period_s / self.n_s

    @property
    def dvarphi(self) -> float:
        return self.period_varphi / self.n_phi

    @property
    def dphi(self) -> float:
        return 2.0 * math.pi / self.n_phi

    @property
    def cell_area(self) -> float:
        return self.ds * self.dvarphi

    @property
    def s_nodes(self) -> np.ndarray:
        return np.arange(self.n_s) * self.ds

    @property
    def phi_nodes(self) -> np.ndarray:
        return -math.pi + np.arange(self.n_phi) * self.dphi

    @property
    def varphi_nodes(self) -> np.ndarray:
        return self.rho0 * self.phi_nodes

    def mesh(self) -> Tuple[np.ndarray, np.ndarray]:
        """(S, PHI) de forme (n_s, n_phi), lignes = s."""
        return np.meshgrid(self.s_nodes, self.phi_nodes, indexing="ij")

    def reflect(self, values: np.ndarray) -> np.ndarray:
        """Valeurs aux nœuds images par (s, φ) → (−s, −φ)."""
        i = (-np.arange(self.n_s)) % self.n_s
        j = (-np.arange(self.n_phi)) % self.n_phi
        return values[np.ix_(i, j)]


@dataclass(frozen=True)
class ScalarField2D:
    grid: CellGrid
    values: np.ndarray
    quantity: str = ""

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError(f"forme {self.values.shape} ≠ grille {self.grid.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError(f"champ {self.quantity!r} non fini")

    @property
    def n_s(self) -> int:
        return self.grid.n_s

    @property
    def n_phi(self) -> int:
        return self.grid.n_phi

    @property
    def period_s(self) -> float:
        return self.grid.period_s

    @property
    def period_varphi(self) -> float:
        return self.grid.period_varphi


class Quantity(Enum):
    H = "h"
    V_CURV = "v_curv"
    V_KIN = "v_kin"
    V_EFF = "v_eff"
    V1 = "v1"


def rotation_angle(spec: HelixSpec, s):
    """θ(s) = −∫_{s0}^{s} τ ds′, fermé pour une torsion constante."""
    return -spec.tau * (s - spec.s0)


def rim_angle(spec: HelixSpec, s, phi):
    """χ = θ(s) + φ ; χ = 0 sur le bord extérieur."""
    return rotation_angle(spec, s) + phi


def helix_point(spec: HelixSpec, s) -> np.ndarray:
    R, p, a = spec.helix_radius, spec.pitch, spec.alpha
    s = np.asarray(s, dtype=float)
    return np.stack([R * np.cos(a * s), R * np.sin(a * s), p * a * s], axis=-1)


def _frenet_vectors(spec: HelixSpec, s):
    R, p, a = spec.helix_radius, spec.pitch, spec.alpha
    s = np.asarray(s, dtype=float)
    c, sn = np.cos(a * s), np.sin(a * s)
    zero = np.zeros_like(s)
    t = np.stack([-R * a * sn, R * a * c, p * a + zero], axis=-1)
    n = np.stack([-c, -sn, zero], axis=-1)
    b = np.stack([p * a * sn, -p * a * c, R * a + zero], axis=-1)
    return t, n, b


def _rotated_vectors(spec: HelixSpec, s):
    t, n, b = _frenet_vectors(spec, s)
    theta = np.asarray(rotation_angle(spec, s))[..., None]
    N = np.cos(theta) * n + np.sin(theta) * b
    B = -np.sin(theta) * n + np.cos(theta) * b
    return t, N, B


def frenet_frame(spec: HelixSpec, s: float) -> FrameSample:
    t, n, b = _frenet_vectors(spec, s)
    return FrameSample(s=float(s), t=t, n=n, b=b, theta=float(rotation_angle(spec, s)))


def rotated_frame(spec: HelixSpec, s: float) -> FrameSample:
    frame = frenet_frame(spec, s)
    theta = frame.theta
    N = math.cos(theta) * frame.n + math.sin(theta) * frame.b
    B = -math.sin(theta) * frame.n + math.cos(theta) * frame.b
    return replace(frame, N=N, B=B)


def surface_point(spec: HelixSpec, s, phi) -> np.ndarray:
    """X = x(s) − ρ₀(sin φ·B + cos φ·N)."""
    phi = np.asarray(phi, dtype=float)
    if np.any(np.abs(phi) > math.pi + 1e-12):
        raise ValueError("|φ| doit être ≤ π")
    s, phi = np.broadcast_arrays(np.asarray(s, dtype=float), phi)
    _, N, B = _rotated_vectors(spec, s)
    return helix_point(spec, s) - spec.rho0 * (np.sin(phi)[..., None] * B + np.cos(phi)[..., None] * N)


def metric_h(spec: HelixSpec, s, phi):
    return 1.0 + spec.epsilon * np.cos(rim_angle(spec, s, phi))


def weingarten(spec: HelixSpec, s, phi) -> np.ndarray:
    """diag(1/ρ₀, κ cos(θ+φ)/h) ; les termes hors diagonale sont exactement nuls."""
    kappa1, kappa2, _, _ = principal_curvatures(spec, s, phi)
    kappa2 = np.asarray(kappa2)
    W = np.zeros(kappa2.shape + (2, 2))
    W[..., 0, 0] = kappa1
    W[..., 1, 1] = kappa2
    return W


def principal_curvatures(spec: HelixSpec, s, phi):
    """(κ₁, κ₂, M, K) avec M = (κ₁+κ₂)/2.

    Le signe de M n'a pas d'effet sur V_curv, qui ne dépend que de (κ₁−κ₂)².
    """
    h = metric_h(spec, s, phi)
    kappa1 = 1.0 / spec.rho0
    kappa2 = spec.kappa * np.cos(rim_angle(spec, s, phi)) / h
    return kappa1, kappa2, 0.5 * (kappa1 + kappa2), kappa1 * kappa2


def v_curv(spec: HelixSpec, s, phi):
    h = metric_h(spec, s, phi)
    return -1.0 / (4.0 * spec.rho0 ** 2 * h ** 2)


def surface_sample(spec: HelixSpec, s: float, phi: float) -> SurfaceSample:
    kappa1, kappa2, M, K = principal_curvatures(spec, s, phi)
    return SurfaceSample(
        s=float(s), phi=float(phi), varphi=spec.rho0 * float(phi),
        point=surface_point(spec, s, phi), h=float(metric_h(spec, s, phi)),
        kappa1=float(kappa1), kappa2=float(kappa2), M=float(M), K=float(K),
        v_curv=float(v_curv(spec, s, phi)))


def cell_grid(spec: HelixSpec, n_s: int, n_phi: int, period_s: Optional[float] = None) -> CellGrid:
    if period_s is None:
        period_s = spec.period_s
    return CellGrid(n_s=n_s, n_phi=n_phi, period_s=period_s, rho0=spec.rho0)


def total_curvature(spec: HelixSpec, n_s: int, n_phi: int, period_s: Optional[float] = None) -> float:
    """∮∮ K dS sur la cellule (somme de Riemann de K·h·ρ₀ ds dφ).

    Pour τ = 0 la cellule par défaut est le tore complet, s ∈ [0, 2π/κ).
    """
    if period_s is None and spec.tau == 0 and spec.kappa > 0:
        period_s = 2.0 * math.pi / spec.kappa
    grid = cell_grid(spec, n_s, n_phi, period_s)
    S, PHI = grid.mesh()
    _, _, _, K = principal_curvatures(spec, S, PHI)
    integrand = K * metric_h(spec, S, PHI) * spec.rho0
    return float(np.sum(integrand) * grid.ds * grid.dphi)


def sample_field(spec: HelixSpec, quantity, n_s: int, n_phi: int,
                 period_s: Optional[float] = None, model=None) -> ScalarField2D:
    """Échantillonne une grandeur sur la cellule (cartes de densité)."""
    quantity = Quantity(quantity)
    grid = cell_grid(spec, n_s, n_phi, period_s)
    S, PHI = grid.mesh()
    if quantity is Quantity.H:
        values = metric_h(spec, S, PHI)
    elif quantity is Quantity.V_CURV:
        values = v_curv(spec, S, PHI)
    else:
        # import tardif : operators dépend de geometry
        from core import operators
        if quantity is Quantity.V_KIN:
            values = operators.v_kin(spec, S, PHI)
        elif quantity is Quantity.V_EFF:
            values = operators.v_eff(spec, S, PHI)
        else:
            values = operators.v1_multiplicative(
                spec, S, PHI, model or operators.PerturbationModel.PUBLISHED)
    return ScalarField2D(grid=grid, values=np.asarray(values, dtype=float), quantity=quantity.value)
