"""Oracle de force brute : hamiltoniens discrétisés et diagonalisation dense.

Deux bases :
  - GRID_2D : différences finies en forme flux de −∂_s(h⁻²∂_s) − ∂²_varphi + V_eff
    sur la cellule, phases de Bloch sur les coutures ;
  - PLANE_WAVE_RAY : équation centrale tronquée au rayon K₁.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, sparse

from config.settings import HelitubeSettings
from core.bloch import (K1, MAX_HARMONIC, BandSource, BandStructure, BlochVector, ReciprocalVector,
                        coupling_amplitude, cylinder_limit_energies, first_order_energies, gap_at_boundary,
                        nearest_partner, two_band_energies, zone_boundary)
from core.errors import ConvergenceFailure, DimensionLimitExceeded
from core.geometry import HelixSpec, cell_grid, metric_h
from core.operators import PerturbationModel, effective_params, v_eff

logger = logging.getLogger(__name__)

SETTINGS = HelitubeSettings()


class Basis(Enum):
    GRID_2D = "grid_2d"
    PLANE_WAVE_RAY = "plane_wave_ray"


@dataclass(frozen=True)
class DiscretizedHamiltonian:
    entries: np.ndarray
    basis: Basis
    k: BlochVector
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray
    eigenvectors: Optional[np.ndarray] = None
    iterations: Optional[int] = None
    driver: str = "evr"
    metadata: Dict[str, object] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])


@dataclass(frozen=True)
class CylinderReport:
    rho0: float
    n_phi_levels: Tuple[int, ...]
    n_values: Tuple[int, ...]
    exact: Tuple[float, ...]
    raw: Tuple[float, ...]
    extrapolated: Tuple[float, ...]
    raw_errors: Tuple[float, ...]
    extrapolated_errors: Tuple[float, ...]
    tolerance: float

    @property
    def max_relative_error(self) -> float:
        return max(self.extrapolated_errors)

    @property
    def max_raw_error(self) -> float:
        return max(self.raw_errors)

    @property
    def passed(self) -> bool:
        return self.max_relative_error <= self.tolerance


@dataclass(frozen=True)
class ConvergenceReport:
    levels: Tuple[int, ...]
    values: Tuple[float, ...]
    order: float
    k: BlochVector


def _guard_dimension(dimension, max_dimension):
    if max_dimension is None:
        max_dimension = SETTINGS.MAX_DIMENSION
    if dimension > max_dimension:
        raise DimensionLimitExceeded(f"dimension {dimension} > limite {max_dimension}")


def _stencil(spec: HelixSpec, k: BlochVector, n_s: int, n_phi: int, period_s: Optional[float]):
    """Matrice creuse (CSR) du schéma flux à cinq points, coutures de Bloch incluses."""
    grid = cell_grid(spec, n_s, n_phi, period_s)
    S, PHI = grid.mesh()
    ds, dv = grid.ds, grid.dvarphi
    # h⁻² aux milieux (i + ½, j)
    w = metric_h(spec, S + 0.5 * ds, PHI) ** -2
    alpha = k.k_s * grid.period_s
    beta = 2.0 * math.pi * k.n_transverse

    I, J = np.meshgrid(np.arange(n_s), np.arange(n_phi), indexing="ij")
    here = (I * n_phi + J).ravel()
    next_s = (((I + 1) % n_s) * n_phi + J).ravel()
    next_v = (I * n_phi + (J + 1) % n_phi).ravel()
    phase_s = np.where(I == n_s - 1, np.exp(1j * alpha), 1.0).ravel()
    phase_v = np.where(J == n_phi - 1, np.exp(1j * beta), 1.0).ravel()
    link_s = (-w / ds ** 2).ravel() * phase_s
    link_v = np.full(here.size, -1.0 / dv ** 2) * phase_v

    diagonal = (w + np.roll(w, 1, axis=0)) / ds ** 2 + 2.0 / dv ** 2 + v_eff(spec, S, PHI)
    rows = np.concatenate([here, here, next_s, here, next_v])
    cols = np.concatenate([here, next_s, here, next_v, here])
    data = np.concatenate([diagonal.ravel().astype(complex), link_s, link_s.conj(), link_v, link_v.conj()])
    size = n_s * n_phi
    # coo additionne les doublons (n_s = 2 ou n_phi = 2)
    return sparse.coo_matrix((data, (rows, cols)), shape=(size, size)).tocsr(), grid


def screw_projector(spec: HelixSpec, k: BlochVector, n: int) -> np.ndarray:
    """Base orthonormée (n², n) du secteur vis ℓ = 0 d'une grille n × n.

    La translation (i, j) → (i + 1, j + sign τ) laisse le schéma invariant ; le
    secteur retenu contient la chaîne (k + jK₁) de l'équation centrale.
    """
    if spec.tau == 0:
        raise ValueError("secteur vis : τ doit être non nul")
    sigma = 1 if spec.tau > 0 else -1
    alpha = k.k_s * spec.period_s
    beta = 2.0 * math.pi * k.n_transverse
    M, I = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    unwrapped = M + sigma * I
    wraps = np.floor_divide(unwrapped, n)
    J = unwrapped - wraps * n
    values = np.exp(1j * (alpha + sigma * beta) * I / n - 1j * beta * wraps) / math.sqrt(n)
    P = np.zeros((n * n, n), dtype=complex)
    P[(I * n + J).ravel(), M.ravel()] = values.ravel()
    return P


def assemble_full(spec: HelixSpec, k: BlochVector, n_s: int, n_phi: int, screw_sector: bool = False,
                  max_dimension: Optional[int] = None, period_s: Optional[float] = None) -> DiscretizedHamiltonian:
    """Discrétisation de l'équation transformée complète à k fixé."""
    if screw_sector and n_s != n_phi:
        raise ValueError(f"secteur vis : grille carrée requise, reçu {n_s}x{n_phi}")
    if screw_sector and period_s is not None:
        raise ValueError("secteur vis : la période en s est fixée par τ")
    dense_dim = n_phi if screw_sector else n_s * n_phi
    _guard_dimension(dense_dim, max_dimension)
    H, grid = _stencil(spec, k, n_s, n_phi, period_s)
    if screw_sector:
        P = screw_projector(spec, k, n_phi)
        entries = P.conj().T @ (H @ P)
    else:
        entries = H.toarray()
    logger.debug(f"assemble_full k = {k} : {n_s}x{n_phi}, dimension {dense_dim}, secteur vis = {screw_sector}")
    metadata = {"n_s": n_s, "n_phi": n_phi, "screw_sector": screw_sector,
                "period_s": grid.period_s, "nnz": int(H.nnz)}
    return DiscretizedHamiltonian(entries=entries, basis=Basis.GRID_2D, k=k, metadata=metadata)


def assemble_perturbed(spec: HelixSpec, k: BlochVector, n_harmonics: int = SETTINGS.N_HARMONICS,
                       model=PerturbationModel.PUBLISHED) -> DiscretizedHamiltonian:
    """Équation centrale en base d'ondes planes k + jK₁, j ∈ [−N, N].

    Diagonale |k + jK₁|² − a + V₀ ; H[i, j] = Ṽ((i − j)K₁ ; q_s de la composante j).
    """
    if n_harmonics < 3:
        raise ValueError("n_harmonics doit être ≥ 3")
    js = np.arange(-n_harmonics, n_harmonics + 1)
    K = K1.components(spec)
    q = k.components(spec)[None, :] + js[:, None] * K[None, :]
    q_s = q[:, 0]
    a = effective_params(spec).a
    entries = np.zeros((js.size, js.size), dtype=complex)
    for shift in range(-MAX_HARMONIC, MAX_HARMONIC + 1):
        m = ReciprocalVector(shift, -shift)
        for col in range(js.size):
            row = col + shift
            if 0 <= row < js.size:
                entries[row, col] += coupling_amplitude(spec, m, q_s[col], model)
    entries[np.diag_indices(js.size)] += np.sum(q * q, axis=1) - a
    return DiscretizedHamiltonian(entries=entries, basis=Basis.PLANE_WAVE_RAY, k=k,
                                  metadata={"n_harmonics": n_harmonics, "model": PerturbationModel(model).value})


def hermiticity_defect(H) -> float:
    """max |H − Hᴴ| / ‖H‖₁"""
    entries = H.entries if isinstance(H, DiscretizedHamiltonian) else np.asarray(H)
    norm = np.linalg.norm(entries, 1)
    if norm == 0:
        return 0.0
    return float(np.max(np.abs(entries - entries.conj().T)) / norm)


def eigensolve(H, n_lowest: Optional[int] = None, vectors: bool = False,
               tolerance: Optional[float] = None) -> SpectrumResult:
    """Plus petites valeurs propres (LAPACK, sous-ensemble par indices) avec contrôle du résidu."""
    entries = H.entries if isinstance(H, DiscretizedHamiltonian) else np.asarray(H)
    dimension = entries.shape[0]
    n_lowest = dimension if n_lowest is None else n_lowest
    if not 1 <= n_lowest <= dimension:
        raise ValueError(f"n_lowest = {n_lowest} hors de [1, {dimension}]")
    tolerance = SETTINGS.RESIDUAL_TOL if tolerance is None else tolerance
    try:
        values, vecs = linalg.eigh(entries, subset_by_index=[0, n_lowest - 1], driver="evr")
    except (linalg.LinAlgError, ValueError) as e:
        raise ConvergenceFailure(f"échec de eigh : {e}", {"dimension": dimension}) from e
    residuals = np.linalg.norm(entries @ vecs - vecs * values[None, :], axis=0)
    scale = max(np.linalg.norm(entries, 1), 1e-300)
    worst = float(residuals.max())
    if worst > tolerance * scale:
        raise ConvergenceFailure(
            f"résidu {worst:.3e} > {tolerance:.1e}·‖H‖",
            {"dimension": dimension, "residual": worst, "norm": float(scale)})
    return SpectrumResult(eigenvalues=values, residuals=residuals,
                          eigenvectors=vecs if vectors else None,
                          metadata={"dimension": dimension})


def _oracle_full(spec, k, n_s, n_phi, max_dimension, period_s=None):
    screw = n_s == n_phi and spec.tau != 0 and period_s is None
    return assemble_full(spec, k, n_s, n_phi, screw_sector=screw, max_dimension=max_dimension, period_s=period_s)


def band_energies(spec: HelixSpec, k: BlochVector, source: BandSource, n_bands: int = 2,
                  n_s: int = SETTINGS.N_S, n_phi: int = SETTINGS.N_PHI,
                  n_harmonics: int = SETTINGS.N_HARMONICS, model=PerturbationModel.PUBLISHED,
                  max_dimension: Optional[int] = None, period_s: Optional[float] = None,
                  delta: Optional[float] = None) -> np.ndarray:
    """Énergies triées en un point k pour une source donnée.

    TWO_BAND et FIRST_ORDER couplent k à k ± K₁, le plus proche en énergie libre,
    comme le second niveau de l'oracle.
    """
    source = BandSource(source)
    if source is BandSource.TWO_BAND:
        return np.array(two_band_energies(spec, k, nearest_partner(spec, k), model))
    if source is BandSource.FIRST_ORDER:
        return np.array(first_order_energies(spec, k, nearest_partner(spec, k), model, delta))
    if source is BandSource.ORACLE_PERTURBED:
        H = assemble_perturbed(spec, k, n_harmonics, model)
    else:
        H = _oracle_full(spec, k, n_s, n_phi, max_dimension, period_s)
    return eigensolve(H, n_bands).eigenvalues


def band_sweep(spec: HelixSpec, path: Sequence[BlochVector], source: BandSource, n_bands: int = 2,
               sweeper=None, **options) -> BandStructure:
    """Bandes le long d'un chemin ; l'ordre du chemin est conservé."""
    source = BandSource(source)
    if source in (BandSource.TWO_BAND, BandSource.FIRST_ORDER) and n_bands != 2:
        raise ValueError(f"{source.value} ne fournit que deux bandes")

    def evaluate(k):
        return band_energies(spec, k, source, n_bands, **options)

    if sweeper is None:
        rows = [evaluate(k) for k in path]
    else:
        rows = sweeper.map(evaluate, path, desc=source.value)
    return BandStructure(path=tuple(path), energies=np.array(rows), source=source)


def zone_boundary_gap(spec: HelixSpec, source: BandSource, n_s: int = SETTINGS.N_S,
                      n_phi: int = SETTINGS.N_PHI, n_harmonics: int = SETTINGS.N_HARMONICS,
                      model=PerturbationModel.PUBLISHED, max_dimension: Optional[int] = None,
                      period_s: Optional[float] = None) -> float:
    """e₁ − e₀ en k = −K₁/2 ; FIRST_ORDER y est résonant et lève NearResonance."""
    source = BandSource(source)
    if source is BandSource.TWO_BAND:
        return gap_at_boundary(spec, K1, model)[0]
    k = zone_boundary(spec, K1)
    energies = band_energies(spec, k, source, 2, n_s=n_s, n_phi=n_phi, n_harmonics=n_harmonics,
                             model=model, max_dimension=max_dimension, period_s=period_s)
    return float(energies[1] - energies[0])


def richardson(values: Sequence[float], order: float = 2.0) -> np.ndarray:
    """Extrapolation à deux niveaux pour des raffinements de rapport 2 (grossier → fin)."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] < 2:
        raise ValueError("au moins deux niveaux requis")
    factor = 2.0 ** order
    return (factor * values[1:] - values[:-1]) / (factor - 1.0)


def cylinder_check(rho0: float = 1.0, n_phi: int = SETTINGS.N_PHI, n_max: int = SETTINGS.CYLINDER_N_MAX,
                   tolerance: float = SETTINGS.CYLINDER_TOL, max_dimension: Optional[int] = None) -> CylinderReport:
    """Cylindre (κ = 0, k_s = 0) contre (n² − ¼)/ρ₀², avec double extrapolation de Richardson.

    La cellule en s est courte (τ_c = 2(n_max + 1)/ρ₀, 4 nœuds) pour que les 2n_max + 1
    premiers niveaux soient ceux indépendants de s.
    """
    n_s = 4
    spec = HelixSpec(kappa=0.0, tau=2.0 * (n_max + 1) / rho0, rho0=rho0)
    levels = (n_phi, 2 * n_phi, 4 * n_phi)
    count = 2 * n_max + 1
    indices = [0] + [2 * n - 1 for n in range(1, n_max + 1)]
    per_level = []
    for level in levels:
        H = assemble_full(spec, BlochVector(0.0, 0), n_s, level,
                          max_dimension=max_dimension or max(SETTINGS.MAX_DIMENSION, n_s * levels[-1]))
        values = eigensolve(H, count).eigenvalues
        per_level.append(values[indices])
    per_level = np.array(per_level)
    first = richardson(per_level, order=2.0)
    extrapolated = richardson(first, order=4.0)[0]
    raw = per_level[0]
    exact = np.array([cylinder_limit_energies(spec, n) for n in range(n_max + 1)])
    raw_errors = np.abs(raw - exact) / np.abs(exact)
    extrapolated_errors = np.abs(extrapolated - exact) / np.abs(exact)
    logger.info(f"cylindre ρ₀ = {rho0} : erreur extrapolée max {extrapolated_errors.max():.3e}, "
                f"brute {raw_errors.max():.3e}")
    return CylinderReport(rho0=rho0, n_phi_levels=levels, n_values=tuple(range(n_max + 1)),
                          exact=tuple(exact), raw=tuple(raw), extrapolated=tuple(extrapolated),
                          raw_errors=tuple(raw_errors), extrapolated_errors=tuple(extrapolated_errors),
                          tolerance=tolerance)


def grid_convergence(spec: HelixSpec, n_phi: int = SETTINGS.N_PHI, k: Optional[BlochVector] = None,
                     n_s: Optional[int] = None, max_dimension: Optional[int] = None) -> ConvergenceReport:
    """Ordre observé de la plus basse valeur propre sur les niveaux N/2, N, 2N.

    Grille carrée (secteur vis) si n_s est omis ou égal à n_phi, matrice complète sinon.
    """
    if k is None:
        k = BlochVector(0.25 * spec.tau, 0)
    square = n_s is None or n_s == n_phi
    levels = (n_phi // 2, n_phi, 2 * n_phi)
    values = []
    for level in levels:
        level_s = level if square else max(2, (n_s * level) // n_phi)
        H = assemble_full(spec, k, level_s, level, screw_sector=square and spec.tau != 0,
                          max_dimension=max_dimension)
        values.append(float(eigensolve(H, 1).eigenvalues[0]))
    coarse, fine = abs(values[0] - values[1]), abs(values[1] - values[2])
    if fine == 0:
        order = math.inf
    elif coarse == 0:
        order = 0.0
    else:
        order = math.log2(coarse / fine)
    logger.debug(f"convergence en grille {levels} : ordre {order:.3f}")
    return ConvergenceReport(levels=levels, values=tuple(values), order=order, k=k)


def reflection_defect(spec: HelixSpec, k: BlochVector, n_s: int, n_phi: int, n_lowest: int = 6,
                      max_dimension: Optional[int] = None) -> float:
    """max |spectre(k_s, n) − spectre(−k_s, −n)| sur les n_lowest premiers niveaux."""
    mirrored = BlochVector(-k.k_s, -k.n_transverse)
    forward = eigensolve(assemble_full(spec, k, n_s, n_phi, max_dimension=max_dimension), n_lowest)
    backward = eigensolve(assemble_full(spec, mirrored, n_s, n_phi, max_dimension=max_dimension), n_lowest)
    return float(np.max(np.abs(forward.eigenvalues - backward.eigenvalues)))


def ground_state_energy(spec: HelixSpec, n: int = SETTINGS.N_PHI, max_dimension: Optional[int] = None) -> float:
    """Plus basse valeur propre de l'équation complète (k = 0, n = 0)."""
    if spec.tau == 0:
        H = assemble_full(spec, BlochVector(0.0, 0), n, n, max_dimension=max_dimension, period_s=2 * math.pi)
    else:
        H = assemble_full(spec, BlochVector(0.0, 0), n, n, screw_sector=True, max_dimension=max_dimension)
    return float(eigensolve(H, 1).eigenvalues[0])
