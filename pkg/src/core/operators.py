"""Opérateurs sur le tube : Laplace–Beltrami, transformation Φ = √h·Ψ,
potentiels V_kin / V_eff et perturbation du premier ordre V⁽¹⁾.

Les dérivées sont spectrales (FFT) sur la cellule périodique ; les
différences finies restent dans `core.oracle`.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from core.errors import GaugeMismatch
from core.geometry import CellGrid, HelixSpec, metric_h, rim_angle, v_curv
from utils.spectral import band_limited_field, periodic_derivative


class Gauge(Enum):
    PSI = "psi"  # norme de surface ∫|Ψ|² h ds dvarphi
    PHI = "phi"  # norme plate ∫|Φ|² ds dvarphi


class PerturbationModel(Enum):
    """Forme de V⁽¹⁾.

    PUBLISHED : ε{½κ²[cos x + cos²x − cos³x] + cos x ∂²_s − τ sin x ∂_s}.
    CONSISTENT : développement au premier ordre en ε de l'opérateur complet,
    ε{2∂_s(cos x ∂_s) + ½(κ² − τ²) cos x}.
    """

    PUBLISHED = "published"
    CONSISTENT = "consistent"


@dataclass(frozen=True)
class EffectiveParams:
    a: float
    epsilon: float

    def k_eff_sq(self, energy: float) -> float:
        return self.a + energy


def effective_params(spec: HelixSpec) -> EffectiveParams:
    """a = (1/ρ₀² + κ²)/4"""
    return EffectiveParams(a=0.25 * (1.0 / spec.rho0 ** 2 + spec.kappa ** 2), epsilon=spec.epsilon)


@dataclass(frozen=True)
class WaveField:
    grid: CellGrid
    values: np.ndarray
    gauge: Gauge

    def __post_init__(self):
        values = np.asarray(self.values, dtype=complex)
        if values.shape != self.grid.shape:
            raise ValueError(f"forme {values.shape} ≠ grille {self.grid.shape}")
        object.__setattr__(self, "values", values)

    def with_values(self, values) -> "WaveField":
        return replace(self, values=values)

    def l2(self) -> float:
        return float(np.linalg.norm(self.values))


def _require_gauge(field: WaveField, gauge: Gauge):
    if field.gauge is not gauge:
        raise GaugeMismatch(f"jauge {gauge.name} attendue, reçu {field.gauge.name}")


def _d_s(values, grid, order=1):
    return periodic_derivative(values, axis=0, period=grid.period_s, order=order)


def _d_v(values, grid, order=1):
    return periodic_derivative(values, axis=1, period=grid.period_varphi, order=order)


def _mesh_h(spec, grid):
    S, PHI = grid.mesh()
    return S, PHI, metric_h(spec, S, PHI)


def metric_derivatives(spec: HelixSpec, s, phi):
    """(h, ∂_s h, ∂²_s h, ∂_varphi h, ∂²_varphi h), dérivées analytiques de h."""
    chi = rim_angle(spec, s, phi)
    eps = spec.epsilon
    h = 1.0 + eps * np.cos(chi)
    h_s = eps * spec.tau * np.sin(chi)
    h_ss = -eps * spec.tau ** 2 * np.cos(chi)
    h_v = -spec.kappa * np.sin(chi)
    h_vv = -(spec.kappa / spec.rho0) * np.cos(chi)
    return h, h_s, h_ss, h_v, h_vv


def v_kin(spec: HelixSpec, s, phi):
    h, h_s, h_ss, h_v, h_vv = metric_derivatives(spec, s, phi)
    return 0.5 * h_vv / h - 0.25 * h_v ** 2 / h ** 2 + 0.5 * h_ss / h ** 3 - 1.25 * h_s ** 2 / h ** 4


def v_eff(spec: HelixSpec, s, phi):
    return v_kin(spec, s, phi) + v_curv(spec, s, phi)


def v1_multiplicative(spec: HelixSpec, s, phi, model=PerturbationModel.PUBLISHED):
    """Partie ponctuelle de V⁽¹⁾, x = τ(s − s0) − varphi/ρ₀."""
    c = np.cos(rim_angle(spec, s, phi))
    eps, k2 = spec.epsilon, spec.kappa ** 2
    if PerturbationModel(model) is PerturbationModel.PUBLISHED:
        return eps * 0.5 * k2 * (c + c ** 2 - c ** 3)
    return eps * 0.5 * (k2 - spec.tau ** 2) * c


def apply_laplace_beltrami(spec: HelixSpec, psi: WaveField) -> WaveField:
    """−ΔΨ en forme métrique −(1/h)∂_s(h⁻¹∂_sΨ) − (1/h)∂_v(h ∂_vΨ)."""
    _require_gauge(psi, Gauge.PSI)
    grid = psi.grid
    _, _, h = _mesh_h(spec, grid)
    u = psi.values
    term_s = _d_s(_d_s(u, grid) / h, grid) / h
    term_v = _d_v(h * _d_v(u, grid), grid) / h
    return psi.with_values(-(term_s + term_v))


def expanded_laplace_beltrami(spec: HelixSpec, psi: WaveField) -> WaveField:
    """Forme développée : −h⁻²Ψ_ss + (h_s/h³)Ψ_s − Ψ_vv − (h_v/h)Ψ_v."""
    _require_gauge(psi, Gauge.PSI)
    grid = psi.grid
    S, PHI = grid.mesh()
    h, h_s, _, h_v, _ = metric_derivatives(spec, S, PHI)
    u = psi.values
    out = (-_d_s(u, grid, 2) / h ** 2 + (h_s / h ** 3) * _d_s(u, grid)
           - _d_v(u, grid, 2) - (h_v / h) * _d_v(u, grid))
    return psi.with_values(out)


def _flux_kinetic(spec, grid, u):
    _, _, h = _mesh_h(spec, grid)
    return -_d_s(_d_s(u, grid) / h ** 2, grid) - _d_v(u, grid, 2)


def apply_kinetic_flux(spec: HelixSpec, phi_field: WaveField, v_kin_offset: float = 0.0) -> WaveField:
    """−∂_s(h⁻²∂_sΦ) − ∂²_vΦ + (V_kin + offset)Φ.

    `v_kin_offset` ne sert qu'au contrôle négatif de la vérification.
    """
    _require_gauge(phi_field, Gauge.PHI)
    grid = phi_field.grid
    S, PHI = grid.mesh()
    u = phi_field.values
    return phi_field.with_values(_flux_kinetic(spec, grid, u) + (v_kin(spec, S, PHI) + v_kin_offset) * u)


def apply_transformed_operator(spec: HelixSpec, phi_field: WaveField) -> WaveField:
    """−∂_s(h⁻²∂_sΦ) − ∂²_vΦ + V_eff·Φ (forme flux, hermitienne)."""
    _require_gauge(phi_field, Gauge.PHI)
    grid = phi_field.grid
    S, PHI = grid.mesh()
    u = phi_field.values
    return phi_field.with_values(_flux_kinetic(spec, grid, u) + v_eff(spec, S, PHI) * u)


def v1_apply(spec: HelixSpec, phi_field: WaveField, model=PerturbationModel.PUBLISHED) -> WaveField:
    _require_gauge(phi_field, Gauge.PHI)
    grid = phi_field.grid
    S, PHI = grid.mesh()
    chi = rim_angle(spec, S, PHI)
    # x = −χ : cos x = cos χ, sin x = −sin χ
    cos_x, sin_x = np.cos(chi), -np.sin(chi)
    u = phi_field.values
    eps = spec.epsilon
    mult = v1_multiplicative(spec, S, PHI, model) * u
    if PerturbationModel(model) is PerturbationModel.PUBLISHED:
        deriv = eps * (cos_x * _d_s(u, grid, 2) - spec.tau * sin_x * _d_s(u, grid))
    else:
        deriv = 2.0 * eps * _d_s(cos_x * _d_s(u, grid), grid)
    return phi_field.with_values(mult + deriv)


def to_phi_gauge(spec: HelixSpec, psi: WaveField) -> WaveField:
    _require_gauge(psi, Gauge.PSI)
    _, _, h = _mesh_h(spec, psi.grid)
    return WaveField(psi.grid, np.sqrt(h) * psi.values, Gauge.PHI)


def to_psi_gauge(spec: HelixSpec, phi_field: WaveField) -> WaveField:
    _require_gauge(phi_field, Gauge.PHI)
    _, _, h = _mesh_h(spec, phi_field.grid)
    return WaveField(phi_field.grid, phi_field.values / np.sqrt(h), Gauge.PSI)


def field_norm(spec: HelixSpec, field: WaveField) -> float:
    """Norme déclarée par la jauge (somme de Riemann, exacte à l'ordre spectral)."""
    weight = 1.0
    if field.gauge is Gauge.PSI:
        _, _, weight = _mesh_h(spec, field.grid)
    return float(np.sqrt(np.sum(np.abs(field.values) ** 2 * weight) * field.grid.cell_area))


def normalize(spec: HelixSpec, field: WaveField) -> WaveField:
    norm = field_norm(spec, field)
    if norm == 0:
        raise ValueError("champ nul, normalisation impossible")
    return field.with_values(field.values / norm)


def transformed_identity_residual(spec: HelixSpec, phi_field: WaveField, v_kin_offset: float = 0.0) -> float:
    """‖−√h Δ(Φ/√h) − [−∂_s(h⁻²∂_sΦ) − ∂²_vΦ + V_kinΦ]‖ / ‖Φ‖."""
    _, _, h = _mesh_h(spec, phi_field.grid)
    lhs = np.sqrt(h) * apply_laplace_beltrami(spec, to_psi_gauge(spec, phi_field)).values
    rhs = apply_kinetic_flux(spec, phi_field, v_kin_offset).values
    return float(np.linalg.norm(lhs - rhs) / phi_field.l2())


def perturbation_residual(spec: HelixSpec, phi_field: WaveField, model=PerturbationModel.CONSISTENT) -> float:
    """‖(O + Δ_plat + a)Φ − V⁽¹⁾Φ‖ / ‖Φ‖, O l'opérateur transformé complet."""
    grid = phi_field.grid
    u = phi_field.values
    flat_laplacian = _d_s(u, grid, 2) + _d_v(u, grid, 2)
    full = apply_transformed_operator(spec, phi_field).values + flat_laplacian + effective_params(spec).a * u
    return float(np.linalg.norm(full - v1_apply(spec, phi_field, model).values) / phi_field.l2())


def plane_wave(grid: CellGrid, q_s: float, n: int, gauge: Gauge = Gauge.PHI) -> WaveField:
    """exp(i(q_s s + n varphi/ρ₀)) ; q_s doit être un mode de la cellule."""
    winding = q_s * grid.period_s / (2.0 * np.pi)
    if abs(winding - round(winding)) > 1e-9 or n != int(n):
        raise ValueError("onde plane non périodique sur la cellule")
    S, PHI = grid.mesh()
    return WaveField(grid, np.exp(1j * (q_s * S + n * PHI)), gauge)


def random_band_limited(grid: CellGrid, rng, max_mode: int = 4, gauge: Gauge = Gauge.PHI) -> WaveField:
    return WaveField(grid, band_limited_field(grid.shape, rng, max_mode), gauge)
