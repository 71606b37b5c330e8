import argparse
import logging
import math
import os
import sys

import numpy as np

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from config.run_config import RunConfig
from config.settings import HelitubeSettings
from core import geometry
from core.bloch import (K1, BandSource, BlochVector, effective_mass, epsilon_family, gap_at_boundary,
                        gap_scaling, nearest_partner, zone_boundary)
from core.errors import ConfigError, ConvergenceFailure, SingularMass
from core.oracle import band_sweep, cylinder_check, zone_boundary_gap
from core.operators import PerturbationModel, effective_params
from managers.output_manager import OutputManager
from managers.sweep_manager import SweepManager
from managers.verify_manager import VerificationManager

SETTINGS = HelitubeSettings()

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

# option CLI → clé du fichier de configuration
TEXT_OPTIONS = {
    "kappa": "kappa", "tau": "tau", "rho0": "rho0", "s0": "s0", "grid": "grid",
    "harmonics": "harmonics", "kpath": "kpath", "transverse_n": "transverse_n",
    "eps_sweep": "eps_sweep", "out": "out", "units": "units", "perturbation": "perturbation",
    "threads": "threads", "max_dimension": "max_dimension", "period_s": "period_s",
    "seed": "seed", "vkin_offset": "vkin_offset", "fd_step": "fd_step", "resonance_delta": "resonance_delta",
}


def build_parser():
    parser = argparse.ArgumentParser(prog="helitube", description="Tube hélicoïdal : géométrie, potentiels et bandes")
    parser.add_argument("command", choices=["geometry", "potential", "bands", "gap-scan", "cylinder-check", "verify"])
    parser.add_argument("--config", help="Fichier clé = valeur")
    parser.add_argument("--kappa", help="Courbure κ")
    parser.add_argument("--tau", help="Torsion τ")
    parser.add_argument("--rho0", help="Rayon du tube ρ₀")
    parser.add_argument("--s0", help="Origine de θ")
    parser.add_argument("--grid", help="Grille NxM (n_s x n_phi)")
    parser.add_argument("--harmonics", help="Harmoniques de la base d'ondes planes")
    parser.add_argument("--kpath", help="Chemin en k_s a:b:n")
    parser.add_argument("--transverse-n", dest="transverse_n", help="Nombre transverse n")
    parser.add_argument("--eps-sweep", dest="eps_sweep", help="Valeurs de ε séparées par des virgules")
    parser.add_argument("--out", help="Dossier de sortie")
    parser.add_argument("--units", help="natural | physical:<mu_kg>")
    parser.add_argument("--perturbation", help="published | consistent")
    parser.add_argument("--threads", help="Threads pour les balayages en k")
    parser.add_argument("--max-dimension", dest="max_dimension", help="Dimension dense maximale")
    parser.add_argument("--period-s", dest="period_s", help="Période en s (obligatoire si τ = 0)")
    parser.add_argument("--seed", help="Graine des champs aléatoires")
    parser.add_argument("--fd-step", dest="fd_step", help="Pas relatif (× τ) des différences finies de la masse effective")
    parser.add_argument("--resonance-delta", dest="resonance_delta", help="Seuil relatif (× τ²) de résonance du premier ordre")
    parser.add_argument("--vkin-offset", dest="vkin_offset", help=argparse.SUPPRESS)
    parser.add_argument("--debug", action="store_true", help="Logs en DEBUG")
    parser.add_argument("--no-progress", dest="no_progress", action="store_true", help="Sans barre de progression")
    return parser


def load_config(args):
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    texts = {key: getattr(args, option) for option, key in TEXT_OPTIONS.items()
             if getattr(args, option) is not None}
    config = config.with_text_values(texts)
    return config, config.validate()


def cmd_geometry(config, spec, output):
    grid = geometry.cell_grid(spec, config.n_s, config.n_phi, config.period_s)
    S, PHI = grid.mesh()
    points = geometry.surface_point(spec, S, PHI)
    kappa1, kappa2, M, K = (np.broadcast_to(v, S.shape) for v in geometry.principal_curvatures(spec, S, PHI))
    output.write_csv("geometry.csv", {
        "s": S.ravel(), "phi": PHI.ravel(),
        "x": points[..., 0].ravel(), "y": points[..., 1].ravel(), "z": points[..., 2].ravel(),
        "h": geometry.metric_h(spec, S, PHI).ravel(),
        "kappa1": kappa1.ravel(), "kappa2": kappa2.ravel(), "M": M.ravel(), "K": K.ravel(),
    })
    return EXIT_OK


def cmd_potential(config, spec, output):
    fields = {q: geometry.sample_field(spec, q, config.n_s, config.n_phi, config.period_s)
              for q in (geometry.Quantity.V_CURV, geometry.Quantity.V_KIN, geometry.Quantity.V_EFF)}
    S, PHI = fields[geometry.Quantity.V_EFF].grid.mesh()
    output.write_csv("potential.csv", {
        "s": S.ravel(), "phi": PHI.ravel(),
        "v_curv": output.energy(fields[geometry.Quantity.V_CURV].values.ravel()),
        "v_kin": output.energy(fields[geometry.Quantity.V_KIN].values.ravel()),
        "v_eff": output.energy(fields[geometry.Quantity.V_EFF].values.ravel()),
    })
    return EXIT_OK


def _relative(a, b):
    return abs(a - b) / abs(b) if b else None


def _band_bottom_mass(config, spec, model):
    k = BlochVector(0.0, config.transverse_n)
    step = config.mass_step(spec)
    report = {"k_s": k.k_s, "n": k.n_transverse, "band": 0, "step": step}
    try:
        mass = effective_mass(spec, k, 0, nearest_partner(spec, k), model, step=step)
    except SingularMass as e:
        logging.warning(f"masse effective non calculée : {e}")
        return {**report, "tensor": None, "off_diagonal": None}
    return {**report, "tensor": mass.tensor.tolist(), "off_diagonal": mass.off_diagonal}


def cmd_bands(config, spec, output, sweeper):
    model = PerturbationModel(config.perturbation)
    path = [BlochVector(float(k), config.transverse_n) for k in config.k_path()]
    two = band_sweep(spec, path, BandSource.TWO_BAND, model=model)
    perturbed = band_sweep(spec, path, BandSource.ORACLE_PERTURBED, sweeper=sweeper,
                           n_harmonics=config.n_harmonics, model=model)
    full = band_sweep(spec, path, BandSource.ORACLE_FULL, sweeper=sweeper, n_s=config.n_s, n_phi=config.n_phi,
                      max_dimension=config.max_dimension, period_s=config.period_s)
    output.write_csv("bands.csv", {
        "k_s": [k.k_s for k in path], "n": [float(k.n_transverse) for k in path],
        "E_twoband_1": output.energy(two.band(0)), "E_twoband_2": output.energy(two.band(1)),
        "E_oracle_pert_1": output.energy(perturbed.band(0)), "E_oracle_pert_2": output.energy(perturbed.band(1)),
        "E_oracle_full_1": output.energy(full.band(0)), "E_oracle_full_2": output.energy(full.band(1)),
    })

    gap_two, u_squared = gap_at_boundary(spec, K1, model)
    gap_pert = zone_boundary_gap(spec, BandSource.ORACLE_PERTURBED, n_harmonics=config.n_harmonics, model=model)
    gap_full = zone_boundary_gap(spec, BandSource.ORACLE_FULL, n_s=config.n_s, n_phi=config.n_phi,
                                 max_dimension=config.max_dimension, period_s=config.period_s)
    lower_difference = float(np.max(np.abs(full.band(0) - perturbed.band(0))))
    boundary = zone_boundary(spec, K1)
    eps = spec.epsilon
    summary = {
        "a": effective_params(spec).a,
        "epsilon": eps, "kappa": spec.kappa, "tau": spec.tau, "rho0": spec.rho0,
        "units": config.units.label(), "perturbation": model.value,
        "zone_boundary": {"k_s": boundary.k_s, "n": boundary.n_transverse},
        "gap": {"two_band": output.energy(gap_two), "oracle_perturbed": output.energy(gap_pert),
                "oracle_full": output.energy(gap_full)},
        "u_squared": u_squared,
        "u_squared_negative": u_squared < 0,
        "effective_mass": _band_bottom_mass(config, spec, model),
        "agreement": {
            "two_band_vs_oracle_perturbed_rel": _relative(gap_two, gap_pert),
            "max_abs_full_vs_perturbed_lower": output.energy(lower_difference),
            "full_vs_perturbed_over_eps2": lower_difference / eps ** 2 if eps else None,
        },
    }
    output.write_json("summary.json", summary)
    return EXIT_OK


def cmd_gap_scan(config, spec, output):
    if not config.eps_sweep:
        raise ConfigError("eps_sweep vide")
    model = PerturbationModel(config.perturbation)
    family = epsilon_family(spec, config.eps_sweep)
    gap_two = [gap_at_boundary(member, K1, model)[0] for member in family]
    gap_oracle = [zone_boundary_gap(member, BandSource.ORACLE_PERTURBED, n_harmonics=config.n_harmonics,
                                    model=model) for member in family]
    gap_full = [zone_boundary_gap(member, BandSource.ORACLE_FULL, n_s=config.n_s, n_phi=config.n_phi,
                                  max_dimension=config.max_dimension) if member.tau else None
                for member in family]
    ratio = [g / (m.epsilon * m.kappa ** 2 / 4.0) if m.epsilon * m.kappa else math.nan
             for g, m in zip(gap_two, family)]
    output.write_csv("gapscan.csv", {
        "epsilon": [m.epsilon for m in family],
        "gap_twoband": output.energy(np.array(gap_two)),
        "gap_oracle": output.energy(np.array(gap_oracle)),
        "ratio_to_eps_kappa2_over_4": ratio,
    })
    fit = None
    if len(family) >= 4:
        scaling = gap_scaling(family, K1, model)
        fit = {"slope": scaling.slope, "intercept": output.energy(scaling.intercept),
               "r_squared": scaling.r_squared, "residual": output.energy(scaling.residual)}
    else:
        logging.warning(f"{len(family)} valeur(s) de ε : ajustement omis (4 requises)")
    output.write_json("gapscan.json", {
        "fit": fit, "model": model.value, "units": config.units.label(),
        "oracle_full_gaps": [None if g is None else output.energy(g) for g in gap_full],
    })
    return EXIT_OK


def cmd_cylinder_check(config, spec, output):
    report = cylinder_check(rho0=spec.rho0, n_phi=config.n_phi)
    output.write_json("cylinder.json", {
        "rho0": report.rho0, "n_phi_levels": report.n_phi_levels, "n": report.n_values,
        "exact": report.exact, "raw": report.raw, "extrapolated": report.extrapolated,
        "raw_relative_errors": report.raw_errors, "relative_errors": report.extrapolated_errors,
        "max_relative_error": report.max_relative_error, "max_raw_relative_error": report.max_raw_error,
        "tolerance": report.tolerance, "passed": report.passed,
    })
    print(f"max relative error: {report.max_relative_error:.6e} (raw {report.max_raw_error:.6e})")
    return EXIT_OK if report.passed else EXIT_VERIFY_FAILED


def cmd_verify(config, spec, output):
    manager = VerificationManager(config, spec)
    manager.run()
    output.write_json("verify.json", manager.report())
    manager.print_summary()
    return EXIT_OK if manager.passed else EXIT_VERIFY_FAILED


def run(args):
    try:
        config, spec = load_config(args)
    except (ConfigError, ValueError) as e:
        print(f"erreur de configuration : {e}", file=sys.stderr)
        return EXIT_CONFIG

    SETTINGS.configure_logging(log_dir=config.out / SETTINGS.LOG_SUBDIR, debug=args.debug)
    logging.info(f"helitube {args.command} : κ = {spec.kappa}, τ = {spec.tau}, ρ₀ = {spec.rho0}, ε = {spec.epsilon}")
    output = OutputManager(config.out, config.units)
    sweeper = SweepManager(workers=config.worker_count(), progress=not args.no_progress)
    commands = {
        "geometry": lambda: cmd_geometry(config, spec, output),
        "potential": lambda: cmd_potential(config, spec, output),
        "bands": lambda: cmd_bands(config, spec, output, sweeper),
        "gap-scan": lambda: cmd_gap_scan(config, spec, output),
        "cylinder-check": lambda: cmd_cylinder_check(config, spec, output),
        "verify": lambda: cmd_verify(config, spec, output),
    }
    try:
        return commands[args.command]()
    except ConvergenceFailure as e:
        logging.error(f"échec du solveur : {e} {e.diagnostic}")
        print(f"échec du solveur : {e}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, ValueError) as e:
        logging.error(f"paramètres invalides : {e}")
        print(f"erreur : {e}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None):
    args = build_parser().parse_args(argv)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
