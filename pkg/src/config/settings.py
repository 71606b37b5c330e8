import logging
import os
import sys
from datetime import datetime
from pathlib import Path

from dotenv import load_dotenv


class HelitubeSettings:
    # Chemins
    BASE_DIR = Path(__file__).resolve().parent.parent.parent
    DEFAULT_OUT_DIR = Path('out')
    LOG_SUBDIR = 'logs'

    # Tube par défaut (κ = τ = 1, ε = 0.1)
    KAPPA = 1.0
    TAU = 1.0
    RHO0 = 0.1
    S0 = 0.0

    # Discrétisation
    N_S = 64
    N_PHI = 64
    N_HARMONICS = 7
    KPATH_POINTS = 101
    MAX_DIMENSION = 4096
    EPS_SWEEP = (0.01, 0.02, 0.03, 0.04, 0.05)
    SEED = 20240917

    # Tolérances et pas numériques
    RESONANCE_DELTA = 1e-6   # × τ²
    FD_STEP = 1e-4           # × τ
    SINGULAR_MASS = 1e-12    # × τ⁴
    RESIDUAL_TOL = 1e-9      # × ‖H‖
    HERMITICITY_TOL = 1e-12
    IDENTITY_TOL = 1e-8
    CYLINDER_TOL = 1e-6
    MIN_ORDER = 1.9
    GAP_AGREEMENT = 0.10
    CYLINDER_N_MAX = 3

    # Sortie
    FLOAT_FORMAT = '%.16e'

    # Mode debug
    DEBUG_MODE = False

    @staticmethod
    def threads():
        """Nombre de threads pour les balayages en k (HELITUBE_THREADS, sinon ≤ 4)."""
        load_dotenv()
        value = os.getenv('HELITUBE_THREADS')
        if value:
            try:
                return max(1, int(value))
            except ValueError:
                logging.getLogger(__name__).warning(f"HELITUBE_THREADS invalide : {value!r}")
        return min(4, os.cpu_count() or 1)

    @classmethod
    def resonance_delta(cls, tau):
        return cls.RESONANCE_DELTA * max(tau * tau, 1e-300)

    @classmethod
    def configure_logging(cls, log_dir=None, debug=None):
        """Log fichier daté + stderr ; stdout reste réservé aux résultats."""
        debug = cls.DEBUG_MODE if debug is None else debug
        log_dir = Path(log_dir) if log_dir else cls.BASE_DIR / cls.LOG_SUBDIR
        log_dir.mkdir(parents=True, exist_ok=True)
        log_file = log_dir / f"helitube_{datetime.now().strftime('%Y%m%d')}.log"

        logging.basicConfig(
            level=logging.DEBUG if debug else logging.INFO,
            format='%(asctime)s - %(levelname)s - %(message)s',
            handlers=[
                logging.FileHandler(log_file, encoding='utf-8'),
                logging.StreamHandler(sys.stderr)
            ],
            force=True
        )
        return log_file
