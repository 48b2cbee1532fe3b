import logging
import os
import threading
from concurrent.futures import ProcessPoolExecutor

from nashseek.config import NUM_WORKERS, WORKERS_ENV_VAR

logger = logging.getLogger(__name__)


def resolve_workers(requested=None):
    """Worker budget: NASHSEEK_WORKERS wins over --workers, which wins over the default."""
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning(f"Ignoring {WORKERS_ENV_VAR}={env!r}: not an integer")
    if requested:
        return max(1, int(requested))
    return NUM_WORKERS


def init_worker():
    """Configure logging in each worker process."""
    logging.basicConfig(
        level=logging.WARNING,
        format='%(asctime)s - [WORKER] - %(message)s',
        datefmt='%H:%M:%S'
    )


class WorkerPool:
    """
    Runs independent replications (seeds, sweep points) in parallel processes.
    With a single worker everything runs inline in the calling process.
    """

    def __init__(self, num_workers=NUM_WORKERS, initializer=init_worker):
        self.num_workers = max(1, int(num_workers))
        self.executor = None
        if self.num_workers > 1:
            self.executor = ProcessPoolExecutor(max_workers=self.num_workers, initializer=initializer)

        self.stats = {
            'submitted': 0,
            'completed': 0,
            'failed': 0,
        }
        self.stats_lock = threading.Lock()

        logger.info(f"Initialized worker pool with {self.num_workers} workers")

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()
        return False

    def submit_work(self, func, *args, **kwargs):
        """
        Submit one task.

        Returns:
            Future (pool) or the result itself (inline mode).
        """
        with self.stats_lock:
            self.stats['submitted'] += 1

        if self.executor is None:
            try:
                result = func(*args, **kwargs)
            except Exception:
                with self.stats_lock:
                    self.stats['failed'] += 1
                raise
            with self.stats_lock:
                self.stats['completed'] += 1
            return result

        future = self.executor.submit(func, *args, **kwargs)
        future.add_done_callback(self._on_complete)
        return future

    def _on_complete(self, future):
        """Callback when a future completes."""
        with self.stats_lock:
            if future.exception() is not None:
                self.stats['failed'] += 1
                logger.error(f"Worker task failed: {future.exception()}")
            else:
                self.stats['completed'] += 1

    def map_ordered(self, func, arg_tuples):
        """
        Runs func(*args) for every tuple and returns results in submission order,
        so reductions over them are deterministic whatever the finishing order.
        """
        handles = [self.submit_work(func, *args) for args in arg_tuples]
        if self.executor is None:
            return handles
        return [h.result() for h in handles]

    def get_stats(self):
        with self.stats_lock:
            return self.stats.copy()

    def shutdown(self, wait=True):
        if self.executor is not None:
            logger.info("Shutting down worker pool...")
            self.executor.shutdown(wait=wait)
            self.executor = None
