import logging
import threading
from typing import Any, Callable, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

# Fans independent work items (samples, grid chunks, sweep instances) out to a
# small pool of worker threads.
# Every item gets its own generator seeded from (master seed, item index), so a
# result never depends on which worker ran it or in what order items finished.
# Observers receive each finished (index, result) pair, one at a time, under the
# pool lock; the collected results come back ordered by index.


def item_rng(seed: int, index: int) -> np.random.Generator:
    """Deterministic per-item generator derived from the master seed."""
    return np.random.default_rng([int(seed), int(index)])


class SamplePool:
    """
    Runs `work(index, rng)` for index in range(count) on `workers` threads and
    hands the results to observers as they complete.
    """

    def __init__(self, workers: int = 1, label: str = "sweep"):
        self.workers = max(1, int(workers))
        self.label = label
        self.lock = threading.Lock()
        self.on_result: List[Callable[[int, Any], None]] = []
        self._next = 0
        self._results: Dict[int, Any] = {}
        self._errors: List[BaseException] = []

    def add_observer(self, callback: Callable[[int, Any], None]):
        """Add an observer called with (index, result) for every finished item."""
        self.on_result.append(callback)

    def remove_observer(self, callback: Callable[[int, Any], None]):
        if callback in self.on_result:
            self.on_result.remove(callback)

    def map(self, work: Callable[[int, np.random.Generator], Any], count: int, seed: int = 0) -> List[Any]:
        self._next = 0
        self._results = {}
        self._errors = []

        if self.workers == 1 or count <= 1:
            for index in range(count):
                self._finish(index, work(index, item_rng(seed, index)))
        else:
            threads = [
                threading.Thread(target=self._worker_loop, args=(work, count, seed), daemon=True)
                for _ in range(min(self.workers, count))
            ]
            for thread in threads:
                thread.start()
            for thread in threads:
                thread.join()

        if self._errors:
            raise self._errors[0]

        logger.debug("Processed %s items: %d", self.label, count)
        return [self._results[index] for index in range(count)]

    def _claim(self, count: int) -> Optional[int]:
        with self.lock:
            if self._next >= count or self._errors:
                return None
            index = self._next
            self._next += 1
            return index

    def _worker_loop(self, work, count: int, seed: int):
        while True:
            index = self._claim(count)
            if index is None:
                return
            try:
                result = work(index, item_rng(seed, index))
            except Exception as e:
                logger.error("Error in %s item %d: %s", self.label, index, e)
                with self.lock:
                    self._errors.append(e)
                return
            self._finish(index, result)

    def _finish(self, index: int, result: Any):
        with self.lock:
            self._results[index] = result
            for callback in self.on_result:
                try:
                    callback(index, result)
                except Exception as e:
                    logger.error("Error notifying observer: %s", e)
