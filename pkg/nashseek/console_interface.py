import time
import logging

logger = logging.getLogger(__name__)


class ConsoleInterface:
    """
    Console progress reporting for experiment runs.
    """

    def __init__(self, quiet=False):
        self.quiet = quiet
        self.stats = {
            'runs_completed': 0,
            'seeds_completed': 0,
            'cost_evaluations': 0,
        }
        self.current_run = "Waiting..."
        self.start_time = time.time()

    def send_update(self, update_type, value=None, **kwargs):
        """Handle updates in console mode."""
        if update_type == 'run':
            self.current_run = value
            self._print(f"\n{'='*70}")
            self._print(f"RUN: {value}")
        elif update_type == 'stats':
            self.stats.update(value)
            self._print_stats()
        elif update_type == 'log':
            self._print(f"  {value}")
        elif update_type == 'results':
            # Results are always shown, even in quiet mode
            print("\nRESULTS:")
            print(f"{value}")

    def _print(self, text):
        if not self.quiet:
            print(text)

    def _print_stats(self):
        elapsed = time.time() - self.start_time
        minutes = int(elapsed // 60)
        seconds = int(elapsed % 60)

        self._print(f"\n--- PROGRESS (Runtime: {minutes}m {seconds}s) ---")
        self._print(f"  Runs completed: {self.stats['runs_completed']}")
        self._print(f"  Seeds completed: {self.stats['seeds_completed']}")
        self._print(f"  Cost evaluations per player: {self.stats['cost_evaluations']}")
        self._print("-" * 50)
