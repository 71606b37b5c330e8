"""Traitement de Bloch : réseau réciproque, équation centrale, énergies à deux
bandes, gap au bord de zone, loi d'échelle du gap, masse effective et limite
cylindrique.

Conventions : 𝓔 = k_eff² − a, vecteurs d'onde en composantes (k_s, k_varphi)
avec k_varphi = n/ρ₀. Le rayon couplant est K₁ = (τ, −1/ρ₀) ; l'harmonique j
de V⁽¹⁾ décale le vecteur d'onde de j·K₁.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import Polynomial

from config.settings import HelitubeSettings
from core.errors import NearResonance, OutOfValidity, SingularMass
from core.geometry import HelixSpec
from core.operators import PerturbationModel, effective_params

logger = logging.getLogger(__name__)

SETTINGS = HelitubeSettings()

MAX_HARMONIC = 3


class BandSource(Enum):
    TWO_BAND = "two_band"
    FIRST_ORDER = "first_order"
    ORACLE_PERTURBED = "oracle_perturbed"
    ORACLE_FULL = "oracle_full"


@dataclass(frozen=True)
class ReciprocalVector:
    m_s: int
    m_phi: int

    def components(self, spec: HelixSpec) -> np.ndarray:
        return np.array([self.m_s * spec.tau, self.m_phi / spec.rho0])

    def __neg__(self) -> "ReciprocalVector":
        return ReciprocalVector(-self.m_s, -self.m_phi)

    @property
    def ray_multiple(self) -> Optional[int]:
        """j tel que K = j·K₁, None hors du rayon."""
        return self.m_s if self.m_phi == -self.m_s else None


K1 = ReciprocalVector(1, -1)


@dataclass(frozen=True)
class BlochVector:
    """Vecteur de Bloch (k_s, n) ; k_varphi = n/ρ₀.

    n entier : état univalué. n demi-entier : bord de zone −K₁/2 (couture
    antipériodique en varphi). Le constructeur ne replie pas k_s.
    """

    k_s: float
    n_transverse: float = 0.0

    def components(self, spec: HelixSpec) -> np.ndarray:
        return np.array([self.k_s, self.n_transverse / spec.rho0])

    def shifted(self, m: ReciprocalVector, tau: float) -> "BlochVector":
        return BlochVector(self.k_s + m.m_s * tau, self.n_transverse + m.m_phi)

    def reduced(self, tau: float) -> "BlochVector":
        if tau == 0:
            return self
        period = abs(tau)
        k_s = (self.k_s + period / 2.0) % period - period / 2.0
        return BlochVector(k_s, self.n_transverse)

    def in_first_zone(self, tau: float) -> bool:
        return abs(self.k_s) <= abs(tau) / 2.0 * (1 + 1e-12)


def zone_boundary(spec: HelixSpec, m: ReciprocalVector = K1) -> BlochVector:
    """k = −K_m/2, où k et k + K_m sont dégénérés."""
    return BlochVector(-0.5 * m.m_s * spec.tau, -0.5 * m.m_phi)


@dataclass(frozen=True)
class CouplingTable:
    q_s: float
    diagonal: float
    entries: Dict[int, complex] = field(default_factory=dict)

    def __getitem__(self, j: int) -> complex:
        if j == 0:
            return self.diagonal
        return self.entries.get(j, 0.0)


@dataclass(frozen=True)
class BandStructure:
    path: Tuple[BlochVector, ...]
    energies: np.ndarray
    source: BandSource

    def __post_init__(self):
        energies = np.asarray(self.energies, dtype=float)
        if energies.ndim != 2 or energies.shape[0] != len(self.path):
            raise ValueError("une ligne d'énergies par point du chemin")
        if not np.all(np.isfinite(energies)):
            raise ValueError(f"énergies non finies ({self.source.value})")
        if np.any(np.diff(energies, axis=1) < 0):
            raise ValueError("énergies non triées")
        object.__setattr__(self, "energies", energies)

    @property
    def n_bands(self) -> int:
        return self.energies.shape[1]

    def band(self, index: int) -> np.ndarray:
        return self.energies[:, index]


@dataclass(frozen=True)
class EffectiveMass:
    tensor: np.ndarray
    hessian: np.ndarray
    band: int
    k: BlochVector

    @property
    def off_diagonal(self) -> float:
        return float(abs(self.tensor[0, 1]))


@dataclass(frozen=True)
class GapScaling:
    slope: float
    intercept: float
    r_squared: float
    residual: float
    epsilons: Tuple[float, ...]
    gaps: Tuple[float, ...]


def coupling_polynomial(spec: HelixSpec, j: int, model=PerturbationModel.PUBLISHED) -> Polynomial:
    """Ṽ(j·K₁; q) comme polynôme en q, nombre d'onde longitudinal de la source.

    PUBLISHED : ½κ²[c + c² − c³] donne (κ²/4, κ²/16, κ²/8, −κ²/16) pour |j| = 0..3,
    et c∂²_s − τ sin x ∂_s donne −q(q ± τ)/2 sur j = ±1.
    CONSISTENT : seulement j = ±1, (κ² − τ²)/4 − q(q ± τ).
    """
    eps, k2, tau = spec.epsilon, spec.kappa ** 2, spec.tau
    sign = 1 if j > 0 else -1
    if PerturbationModel(model) is PerturbationModel.PUBLISHED:
        constant = {0: k2 / 4.0, 1: k2 / 16.0, 2: k2 / 8.0, 3: -k2 / 16.0}.get(abs(j), 0.0)
        if abs(j) == 1:
            return eps * Polynomial([constant, -0.5 * sign * tau, -0.5])
        return eps * Polynomial([constant])
    if abs(j) == 1:
        return eps * Polynomial([(k2 - tau ** 2) / 4.0, -sign * tau, -1.0])
    return Polynomial([0.0])


def _ray_phase(spec: HelixSpec, j: int) -> complex:
    # x = τ(s − s0) − φ : l'harmonique j porte la phase e^{−ijτs0}
    return complex(np.exp(-1j * j * spec.tau * spec.s0)) if spec.s0 else 1.0


def coupling_coefficients(spec: HelixSpec, q_s: float, model=PerturbationModel.PUBLISHED) -> CouplingTable:
    """Action de V⁽¹⁾ sur e^{i q_s s} résolue en harmoniques du rayon K₁."""
    entries = {}
    for j in range(-MAX_HARMONIC, MAX_HARMONIC + 1):
        if j == 0:
            continue
        entries[j] = complex(coupling_polynomial(spec, j, model)(q_s)) * _ray_phase(spec, j)
    diagonal = float(coupling_polynomial(spec, 0, model)(q_s))
    return CouplingTable(q_s=float(q_s), diagonal=diagonal, entries=entries)


def coupling_amplitude(spec: HelixSpec, m: ReciprocalVector, q_s: float,
                       model=PerturbationModel.PUBLISHED) -> complex:
    """Ṽ(K_m; q_s) ; nul hors du rayon K₁ et pour |j| > 3."""
    j = m.ray_multiple
    if j is None or abs(j) > MAX_HARMONIC:
        return 0.0
    if j == 0:
        return float(coupling_polynomial(spec, 0, model)(q_s))
    return complex(coupling_polynomial(spec, j, model)(q_s)) * _ray_phase(spec, j)


def _require_ray(m: ReciprocalVector) -> int:
    j = m.ray_multiple
    if j is None or j == 0:
        raise ValueError(f"{m} n'est pas un multiple non nul de K₁")
    return j


def _u_squared_polynomial(spec: HelixSpec, m: ReciprocalVector, model) -> Polynomial:
    """U²(k_s) = Ṽ(K_m; k_s)·Ṽ(−K_m; k_s + m_s τ), réel."""
    j = _require_ray(m)
    forward = coupling_polynomial(spec, j, model)
    backward = coupling_polynomial(spec, -j, model)
    return forward * backward(Polynomial([m.m_s * spec.tau, 1.0]))


def coupling_product(spec: HelixSpec, k: BlochVector, m: ReciprocalVector = K1,
                     model=PerturbationModel.PUBLISHED) -> float:
    return float(_u_squared_polynomial(spec, m, model)(k.k_s))


def _free_pair(spec, k, m):
    kvec = k.components(spec)
    kshift = kvec + m.components(spec)
    return float(kvec @ kvec), float(kshift @ kshift)


def nearest_partner(spec: HelixSpec, k: BlochVector) -> ReciprocalVector:
    """±K₁ dont l'énergie libre |k ± K₁|² est la plus proche de |k|² ; K₁ en cas d'égalité."""
    A, B_plus = _free_pair(spec, k, K1)
    _, B_minus = _free_pair(spec, k, -K1)
    if abs(B_minus - A) < abs(B_plus - A) * (1 - 1e-12):
        return -K1
    return K1


def two_band_energies(spec: HelixSpec, k: BlochVector, m: ReciprocalVector = K1,
                      model=PerturbationModel.PUBLISHED) -> Tuple[float, float]:
    """Racines du déterminant 2×2 (𝓔₁ ≤ 𝓔₂)."""
    params = effective_params(spec)
    shift = float(coupling_polynomial(spec, 0, model)(k.k_s)) - params.a
    A, B = _free_pair(spec, k, m)
    u_sq = coupling_product(spec, k, m, model)
    if u_sq == 0.0:
        low, high = sorted((A + shift, B + shift))
        return low, high
    disc = 0.25 * (A - B) ** 2 + u_sq
    if disc < 0:
        logger.warning(f"U² = {u_sq:.3e} < 0 et discriminant négatif en k = {k} ; tronqué à 0")
        disc = 0.0
    center = 0.5 * (A + B) + shift
    root = math.sqrt(disc)
    return center - root, center + root


def gap_at_boundary(spec: HelixSpec, m: ReciprocalVector = K1,
                    model=PerturbationModel.PUBLISHED) -> Tuple[float, float]:
    """(gap, U²) en k = −K_m/2 ; gap = 2√|U²|."""
    k = zone_boundary(spec, m)
    u_sq = coupling_product(spec, k, m, model)
    return 2.0 * math.sqrt(abs(u_sq)), u_sq


def near_boundary_expansion(spec: HelixSpec, G: float, m: ReciprocalVector = K1,
                            model=PerturbationModel.PUBLISHED) -> Tuple[float, float]:
    """Développement des deux racines à la distance G (le long de K̂_m) de −K_m/2.

    𝓔₁,₂ = (G² − a + V₀) + (K_m/2)²[1 ∓ 2G²/|U|] ∓ |U|, valable pour K_m²G² < 0.1·U².
    """
    K = m.components(spec)
    K_sq = float(K @ K)
    kvec = -0.5 * K + G * K / math.sqrt(K_sq)
    k = BlochVector(float(kvec[0]), float(kvec[1] * spec.rho0))
    u_sq = coupling_product(spec, k, m, model)
    if not K_sq * G * G < 0.1 * abs(u_sq):
        raise OutOfValidity(f"K²G² = {K_sq * G * G:.3e} ≥ 0.1·U² = {0.1 * abs(u_sq):.3e}")
    u_abs = math.sqrt(abs(u_sq))
    base = G * G - effective_params(spec).a + float(coupling_polynomial(spec, 0, model)(k.k_s))
    quarter = 0.25 * K_sq
    return (base + quarter * (1 - 2 * G * G / u_abs) - u_abs,
            base + quarter * (1 + 2 * G * G / u_abs) + u_abs)


def first_order_u(spec: HelixSpec, k: BlochVector, m: ReciprocalVector, energy: float,
                  model=PerturbationModel.PUBLISHED, delta: Optional[float] = None) -> complex:
    """u(K_m) = Ṽ(K_m; k_s) / (k_eff² − (k + K_m)²)."""
    if delta is None:
        delta = SETTINGS.resonance_delta(spec.tau)
    shifted = k.components(spec) + m.components(spec)
    denominator = effective_params(spec).k_eff_sq(energy) - float(shifted @ shifted)
    if abs(denominator) <= delta:
        raise NearResonance(f"dénominateur {denominator:.3e} ≤ δ = {delta:.1e} en k = {k}", denominator)
    return coupling_amplitude(spec, m, k.k_s, model) / denominator


def first_order_energies(spec: HelixSpec, k: BlochVector, m: ReciprocalVector = K1,
                         model=PerturbationModel.PUBLISHED,
                         delta: Optional[float] = None) -> Tuple[float, float]:
    """Énergies libres + V₀ + correction U²/(dénominateur libre), hors résonance."""
    if delta is None:
        delta = SETTINGS.resonance_delta(spec.tau)
    shift = float(coupling_polynomial(spec, 0, model)(k.k_s)) - effective_params(spec).a
    A, B = _free_pair(spec, k, m)
    gap = A - B
    if abs(gap) <= delta:
        raise NearResonance(f"bandes libres dégénérées en k = {k}", gap)
    u_sq = coupling_product(spec, k, m, model)
    low, high = sorted((A + shift + u_sq / gap, B + shift - u_sq / gap))
    return low, high


def two_band_hessian(spec: HelixSpec, k: BlochVector, band: int = 0, m: ReciprocalVector = K1,
                     model=PerturbationModel.PUBLISHED) -> np.ndarray:
    """Dérivées secondes analytiques de la racine `band` en (k_s, k_varphi)."""
    K = m.components(spec)
    kvec = k.components(spec)
    P = _u_squared_polynomial(spec, m, model)
    d = -float(kvec @ K) - 0.5 * float(K @ K)
    D = d * d + float(P(k.k_s))
    if D <= 0:
        raise NearResonance(f"racines dégénérées en k = {k}", D)
    e_s = np.array([1.0, 0.0])
    grad_D = -2.0 * d * K + float(P.deriv()(k.k_s)) * e_s
    hess_D = 2.0 * np.outer(K, K) + float(P.deriv(2)(k.k_s)) * np.outer(e_s, e_s)
    hess_root = hess_D / (2.0 * math.sqrt(D)) - np.outer(grad_D, grad_D) / (4.0 * D ** 1.5)
    sign = -1.0 if band == 0 else 1.0
    return 2.0 * np.eye(2) + sign * hess_root


def _fd_hessian(energy, k_s, k_v, step):
    f0 = energy(k_s, k_v)
    fxx = (energy(k_s + step, k_v) - 2 * f0 + energy(k_s - step, k_v)) / step ** 2
    fyy = (energy(k_s, k_v + step) - 2 * f0 + energy(k_s, k_v - step)) / step ** 2
    fxy = (energy(k_s + step, k_v + step) - energy(k_s + step, k_v - step)
           - energy(k_s - step, k_v + step) + energy(k_s - step, k_v - step)) / (4 * step ** 2)
    return np.array([[fxx, fxy], [fxy, fyy]])


def effective_mass(spec: HelixSpec, k: BlochVector, band: int = 0, m: ReciprocalVector = K1,
                   model=PerturbationModel.PUBLISHED, step: Optional[float] = None) -> EffectiveMass:
    """m*/μ = 2·[∂²𝓔/∂k_i∂k_j]⁻¹ par différences centrées, extrapolées une fois (Richardson)."""
    scale = abs(spec.tau) if spec.tau else 1.0 / spec.rho0
    if step is None:
        step = SETTINGS.FD_STEP * scale

    def energy(k_s, k_v):
        return two_band_energies(spec, BlochVector(k_s, k_v * spec.rho0), m, model)[band]

    k_s, k_v = k.components(spec)
    hessian = (4.0 * _fd_hessian(energy, k_s, k_v, step) - _fd_hessian(energy, k_s, k_v, 2 * step)) / 3.0
    det = float(np.linalg.det(hessian))
    if abs(det) < SETTINGS.SINGULAR_MASS * scale ** 4:
        raise SingularMass(f"det(∂²𝓔) = {det:.3e} en k = {k}")
    tensor = 2.0 * np.linalg.inv(hessian)
    logger.debug(f"masse effective bande {band} en {k} : hors-diagonale {abs(tensor[0, 1]):.3e}")
    return EffectiveMass(tensor=tensor, hessian=hessian, band=band, k=k)


def epsilon_family(base: HelixSpec, eps_values: Sequence[float]):
    """Tubes à (κ, τ) fixés avec ρ₀ = ε/κ ; ε = 0 donne le tube droit de rayon ρ₀."""
    family = []
    for eps in eps_values:
        if eps == 0:
            family.append(base.replace(kappa=0.0))
        elif base.kappa == 0:
            raise ValueError("κ = 0 : impossible de varier ε par ρ₀ = ε/κ")
        else:
            family.append(base.replace(rho0=eps / base.kappa))
    return family


def gap_scaling(family: Sequence[HelixSpec], m: ReciprocalVector = K1,
                model=PerturbationModel.PUBLISHED) -> GapScaling:
    """Pente (moindres carrés) du gap en fonction de ε·κ²/4 sur une famille de tubes."""
    if len(family) < 4:
        raise ValueError(f"au moins 4 tubes requis, reçu {len(family)}")
    x = np.array([spec.epsilon * spec.kappa ** 2 / 4.0 for spec in family])
    gaps = np.array([gap_at_boundary(spec, m, model)[0] for spec in family])
    if np.ptp(x) == 0:
        slope, intercept = 0.0, float(np.mean(gaps))
    else:
        slope, intercept = (float(c) for c in np.polyfit(x, gaps, 1))
    residuals = gaps - (slope * x + intercept)
    ss_res = float(residuals @ residuals)
    ss_tot = float(np.sum((gaps - gaps.mean()) ** 2))
    if ss_tot == 0:
        r_squared = 1.0 if ss_res == 0 else 0.0
    else:
        r_squared = 1.0 - ss_res / ss_tot
    return GapScaling(slope=slope, intercept=intercept, r_squared=r_squared,
                      residual=math.sqrt(ss_res / len(family)),
                      epsilons=tuple(float(spec.epsilon) for spec in family),
                      gaps=tuple(float(g) for g in gaps))


def cylinder_limit_energies(spec: HelixSpec, n: int, l: int = 0, L: float = math.inf) -> float:
    """𝓔_{n,l} = (n² − ¼)/ρ₀² + (lπ/L)² pour le cylindre (κ = 0) ; L infini supprime le terme en l."""
    if spec.kappa != 0:
        raise ValueError("limite cylindrique : κ doit être nul")
    if not L > 0:
        raise ValueError("L doit être > 0")
    longitudinal = 0.0 if math.isinf(L) else (l * math.pi / L) ** 2
    return (n * n - 0.25) / spec.rho0 ** 2 + longitudinal
