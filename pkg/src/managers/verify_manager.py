import logging
import math
import sys
from dataclasses import asdict, dataclass
from typing import Callable, List, Optional

import numpy as np
from colorama import Fore, Style

from config.run_config import RunConfig
from config.settings import HelitubeSettings
from core import geometry, oracle
from core.bloch import (K1, BandSource, BlochVector, coupling_product, first_order_energies, gap_at_boundary,
                        nearest_partner, two_band_energies)
from core.errors import HelitubeError
from core.geometry import HelixSpec
from core.operators import Gauge, PerturbationModel, random_band_limited, transformed_identity_residual, v_eff

SETTINGS = HelitubeSettings()


@dataclass
class CheckRecord:
    name: str
    tolerance: float
    measured: Optional[float]
    passed: bool
    status: str
    grid: str
    detail: str = ""


class VerificationManager:
    """Suite de contrôles lancée par `verify`."""

    STRICT_EPSILON = 0.5  # au-delà, les contrôles numériques deviennent informatifs
    RELAXABLE = ("operator_identity", "grid_convergence", "gap_agreement", "first_order_consistency")
    # κ = τ = 1, ε = 0.05·j
    INEQUALITY_EPSILONS = tuple(0.05 * j for j in range(1, 19))

    def __init__(self, config: RunConfig, spec: HelixSpec):
        self.config = config
        self.spec = spec
        self.model = PerturbationModel(config.perturbation)
        self.records: List[CheckRecord] = []
        self.relaxed = spec.epsilon > self.STRICT_EPSILON
        self.logger = logging.getLogger(__name__)

    @property
    def grid_label(self):
        return f"{self.config.n_s}x{self.config.n_phi}"

    @property
    def passed(self):
        return all(r.passed for r in self.records)

    def _record(self, name, tolerance, measured, passed, grid=None, status=None, detail=""):
        if not passed and self.relaxed and name in self.RELAXABLE:
            self.logger.warning(f"ε = {self.spec.epsilon:.3g} > {self.STRICT_EPSILON} : {name} informatif")
            passed, status = True, "relaxed"
            detail = f"{detail} (ε > {self.STRICT_EPSILON}, informatif)".strip()
        status = status or ("pass" if passed else "fail")
        record = CheckRecord(name=name, tolerance=float(tolerance),
                             measured=None if measured is None else float(measured),
                             passed=bool(passed), status=status, grid=grid or self.grid_label, detail=detail)
        self.records.append(record)
        log = self.logger.info if record.passed else self.logger.error
        log(f"contrôle {name} : {status} (mesuré {measured}, tolérance {tolerance})")
        return record

    def _skip(self, name, tolerance, reason, grid=None):
        return self._record(name, tolerance, None, True, grid=grid, status="skipped", detail=reason)

    def _guarded(self, name, tolerance, check: Callable):
        try:
            check()
        except (HelitubeError, ValueError, ArithmeticError) as e:
            self._record(name, tolerance, None, False, status="error", detail=str(e))

    def check_operator_identity(self, n_fields=20):
        tol = SETTINGS.IDENTITY_TOL
        grid = geometry.cell_grid(self.spec, self.config.n_s, self.config.n_phi, self.config.period_s)
        rng = np.random.default_rng(self.config.seed)
        worst = 0.0
        for _ in range(n_fields):
            phi = random_band_limited(grid, rng, max_mode=min(4, (min(grid.shape) - 1) // 2), gauge=Gauge.PHI)
            worst = max(worst, transformed_identity_residual(self.spec, phi, self.config.vkin_offset))
        self._record("operator_identity", tol, worst, worst <= tol)

    def check_hermiticity(self):
        tol = SETTINGS.HERMITICITY_TOL
        n_s, n_phi = min(self.config.n_s, 16), min(self.config.n_phi, 16)
        k = BlochVector(0.3 * self.spec.tau, 0.5)
        H = oracle.assemble_full(self.spec, k, n_s, n_phi, period_s=self.config.period_s,
                                 max_dimension=self.config.max_dimension)
        defect = oracle.hermiticity_defect(H)
        self._record("hermiticity", tol, defect, defect <= tol, grid=f"{n_s}x{n_phi}")

    def check_h_reflection(self):
        tol = 1e-14
        spec = self.spec.replace(s0=0.0)
        field = geometry.sample_field(spec, geometry.Quantity.H, self.config.n_s, self.config.n_phi,
                                      self.config.period_s)
        defect = float(np.max(np.abs(field.values - field.grid.reflect(field.values))))
        self._record("h_reflection", tol, defect, defect <= tol)

    def check_potential_inequality(self):
        """V_eff(0, 0) < V_eff(0, π) sur κ = τ = 1, indépendamment du tube configuré.

        Pour κ ≠ τ le terme ½ε(κ² − τ²)cos χ peut inverser l'inégalité.
        """
        differences = []
        for eps in self.INEQUALITY_EPSILONS:
            spec = HelixSpec(kappa=1.0, tau=1.0, rho0=eps)
            differences.append(float(v_eff(spec, 0.0, math.pi) - v_eff(spec, 0.0, 0.0)))
        worst = min(differences)
        self._record("potential_inequality", 0.0, worst, worst > 0, grid="point",
                     detail=f"κ = τ = 1, ε ∈ [{self.INEQUALITY_EPSILONS[0]:.2f}, {self.INEQUALITY_EPSILONS[-1]:.2f}]")

    def check_ray_selection(self):
        tol = 1e-12 * max(self.spec.epsilon * self.spec.kappa ** 2, 0.0)
        if self.spec.tau == 0:
            return self._skip("ray_selection", tol, "τ = 0 : pas de réseau en s")
        field = geometry.sample_field(self.spec, geometry.Quantity.V1, self.config.n_s, self.config.n_phi,
                                      model=self.model)
        coeffs = np.fft.fft2(field.values) / field.values.size
        p = np.fft.fftfreq(field.n_s, 1.0 / field.n_s)[:, None]
        q = np.fft.fftfreq(field.n_phi, 1.0 / field.n_phi)[None, :]
        on_ray = q == -np.sign(self.spec.tau) * p
        off = float(np.max(np.abs(np.where(on_ray, 0.0, coeffs))))
        self._record("ray_selection", tol, off, off <= tol)

    def check_cylinder_limit(self):
        tol = SETTINGS.CYLINDER_TOL
        report = oracle.cylinder_check(rho0=self.spec.rho0, n_phi=self.config.n_phi, tolerance=tol)
        self._record("cylinder_limit", tol, report.max_relative_error, report.passed,
                     grid=f"4x{self.config.n_phi}", detail=f"erreur brute {report.max_raw_error:.3e}")

    def check_grid_convergence(self):
        min_order = SETTINGS.MIN_ORDER
        if self.spec.tau == 0:
            return self._skip("grid_convergence", min_order, "τ = 0 : pas de secteur vis")
        n_s = None if self.config.n_s == self.config.n_phi else self.config.n_s
        report = oracle.grid_convergence(self.spec, self.config.n_phi, n_s=n_s,
                                         max_dimension=self.config.max_dimension)
        passed = report.order >= min_order
        grid = "/".join(str(level) for level in report.levels)
        self._record("grid_convergence", min_order, report.order if math.isfinite(report.order) else None,
                     passed, grid=grid)

    def check_geometry(self, samples=7):
        if self.spec.curvature_norm == 0:
            self._skip("weingarten", 1e-12, "κ = τ = 0", grid="point")
            return self._skip("first_fundamental_form", 1e-8, "κ = τ = 0", grid="point")
        rng = np.random.default_rng(self.config.seed)
        s_values = rng.uniform(0.0, 2.0 * math.pi, samples)
        phi_values = rng.uniform(-math.pi + 0.1, math.pi - 0.1, samples)
        weingarten_defect, form_defect = 0.0, 0.0
        step = 1e-5
        for s, phi in zip(s_values, phi_values):
            sample = geometry.surface_sample(self.spec, s, phi)
            W = geometry.weingarten(self.spec, s, phi)
            eig = np.sort(np.linalg.eigvalsh(W))
            expected = np.sort([sample.kappa1, sample.kappa2])
            scale = max(1.0, float(np.max(np.abs(expected))))
            weingarten_defect = max(weingarten_defect, float(np.max(np.abs(eig - expected))) / scale)
            X_s = (geometry.surface_point(self.spec, s + step, phi)
                   - geometry.surface_point(self.spec, s - step, phi)) / (2 * step)
            X_v = (geometry.surface_point(self.spec, s, phi + step)
                   - geometry.surface_point(self.spec, s, phi - step)) / (2 * step * self.spec.rho0)
            form_defect = max(form_defect, abs(X_v @ X_v - 1.0), abs(X_s @ X_s - sample.h ** 2), abs(X_s @ X_v))
        self._record("weingarten", 1e-12, weingarten_defect, weingarten_defect <= 1e-12, grid="point")
        self._record("first_fundamental_form", 1e-8, form_defect, form_defect <= 1e-8, grid="point")

    def check_first_order_consistency(self):
        """Loin du bord de zone, la racine basse à deux bandes vaut la racine libre + U²/(A − B)."""
        tol = 0.05
        k = BlochVector(0.0, 0.0)
        m = nearest_partner(self.spec, k)
        delta = self.config.resonance_threshold(self.spec.tau)
        low_first, _ = first_order_energies(self.spec, k, m, self.model, delta)
        low_two, _ = two_band_energies(self.spec, k, m, self.model)
        kvec = k.components(self.spec)
        shifted = kvec + m.components(self.spec)
        correction = abs(coupling_product(self.spec, k, m, self.model) / float(kvec @ kvec - shifted @ shifted))
        relative = abs(low_two - low_first) / (correction + 1e-12 * (1.0 + abs(low_first)))
        self._record("first_order_consistency", tol, relative, relative <= tol, grid="point",
                     detail=f"δ = {delta:.1e}")

    def check_gap_agreement(self):
        tol = SETTINGS.GAP_AGREEMENT
        two_band, _ = gap_at_boundary(self.spec, K1, self.model)
        if two_band == 0:
            return self._skip("gap_agreement", tol, "pas de gap (U = 0)")
        perturbed = oracle.zone_boundary_gap(self.spec, BandSource.ORACLE_PERTURBED,
                                             n_harmonics=self.config.n_harmonics, model=self.model)
        relative = abs(two_band - perturbed) / abs(perturbed)
        self._record("gap_agreement", tol, relative, relative <= tol, grid=f"harmonics={self.config.n_harmonics}")

    def run(self):
        self.records = []
        checks = [
            ("operator_identity", SETTINGS.IDENTITY_TOL, self.check_operator_identity),
            ("hermiticity", SETTINGS.HERMITICITY_TOL, self.check_hermiticity),
            ("h_reflection", 1e-14, self.check_h_reflection),
            ("potential_inequality", 0.0, self.check_potential_inequality),
            ("ray_selection", 0.0, self.check_ray_selection),
            ("cylinder_limit", SETTINGS.CYLINDER_TOL, self.check_cylinder_limit),
            ("grid_convergence", SETTINGS.MIN_ORDER, self.check_grid_convergence),
            ("geometry", 1e-8, self.check_geometry),
            ("first_order_consistency", 0.05, self.check_first_order_consistency),
            ("gap_agreement", SETTINGS.GAP_AGREEMENT, self.check_gap_agreement),
        ]
        for name, tolerance, check in checks:
            self._guarded(name, tolerance, check)
        return self.records

    def report(self):
        return {
            "passed": self.passed,
            "grid": self.grid_label,
            "epsilon": self.spec.epsilon,
            "perturbation": self.model.value,
            "checks": [asdict(r) for r in self.records],
        }

    def print_summary(self, stream=None):
        stream = stream or sys.stdout
        color = stream.isatty()
        for r in self.records:
            label = r.status.upper()
            if color:
                tint = Fore.GREEN if r.passed else Fore.RED
                label = f"{tint}{label}{Style.RESET_ALL}"
            print(f"{label:>8} {r.name} measured={r.measured} tolerance={r.tolerance} grid={r.grid}", file=stream)
        print(f"verify: {'PASS' if self.passed else 'FAIL'}", file=stream)
