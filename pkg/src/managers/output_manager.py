import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np
import pandas as pd

from config.run_config import UnitMode
from config.settings import HelitubeSettings

SETTINGS = HelitubeSettings()


def _to_builtin(value):
    """Convertit les scalaires/tableaux numpy pour json."""
    if isinstance(value, dict):
        return {str(k): _to_builtin(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_to_builtin(v) for v in value.tolist()]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, Path):
        return str(value)
    return value


class OutputManager:
    """Écrit les artefacts d'une exécution dans un dossier, atomiquement.

    Toutes les écritures passent par un fichier temporaire du dossier cible puis `os.replace`.
    """

    def __init__(self, out_dir, units: Optional[UnitMode] = None):
        self.out_dir = Path(out_dir)
        self.units = units or UnitMode()
        self.logger = logging.getLogger(__name__)
        self.out_dir.mkdir(parents=True, exist_ok=True)

    def energy(self, values):
        """𝓔 (naturel) → unités de sortie ; ne touche ni a ni ε ni les longueurs."""
        factor = self.units.energy_factor
        if isinstance(values, (list, tuple)):
            return type(values)(v * factor for v in values)
        return values * factor

    def _atomic_write(self, name: str, text: str) -> Path:
        target = self.out_dir / name
        fd, tmp = tempfile.mkstemp(prefix=f".{name}.", dir=self.out_dir)
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.logger.info(f"écrit {target}")
        return target

    def write_csv(self, name: str, columns: Dict[str, Iterable], order=None) -> Path:
        frame = pd.DataFrame({key: np.asarray(values) for key, values in columns.items()})
        if order is not None:
            frame = frame[list(order)]
        text = frame.to_csv(index=False, float_format=SETTINGS.FLOAT_FORMAT,
                             lineterminator="\n", na_rep="nan")
        return self._atomic_write(name, text)

    def write_json(self, name: str, payload: Dict) -> Path:
        text = json.dumps(_to_builtin(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"
        return self._atomic_write(name, text)
