import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional

from tqdm import tqdm

from config.settings import HelitubeSettings

SETTINGS = HelitubeSettings()


class SweepManager:
    """Évalue une fonction pure sur une liste de points, en parallèle.

    Les résultats reviennent dans l'ordre des points quel que soit l'ordonnancement.
    """

    def __init__(self, workers: Optional[int] = None, progress: bool = True):
        self.workers = workers or SETTINGS.threads()
        self.progress = progress and sys.stderr.isatty()
        self.logger = logging.getLogger(__name__)

    def map(self, func: Callable, items: Iterable, desc: str = "") -> List:
        items = list(items)
        self.logger.info(f"balayage {desc or func.__name__} : {len(items)} points, {self.workers} thread(s)")
        bar = tqdm(total=len(items), desc=desc, file=sys.stderr, disable=not self.progress, leave=False)

        def run(item):
            result = func(item)
            bar.update(1)
            return result

        try:
            if self.workers == 1:
                return [run(item) for item in items]
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                return list(executor.map(run, items))
        finally:
            bar.close()
