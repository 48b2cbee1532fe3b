import logging

import numpy as np

from nashseek.config import PROX_BOUND_SLACK
from nashseek.game_core import StrategySet

logger = logging.getLogger(__name__)

FULL_SET = "full"
HYPERPLANE_ONLY = "hyperplane"


class Regularizer:
    """
    A sigma-strongly convex function h on a strategy set.

    Subclasses provide value/grad and the prox step
        argmin_{x'} { <y, x - x'> + D(x', x) : x' in X }.
    """

    sigma = 1.0
    name = "abstract"

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def divergence(self, x, x_ref):
        # h(x) - h(x') - <grad h(x'), x - x'>
        return float(self.value(x) - self.value(x_ref) - np.dot(self.grad(x_ref), x - x_ref))

    def prox(self, strategy_set, x, y):
        raise NotImplementedError(f"{self.name} regularizer has no prox step")


class EuclideanRegularizer(Regularizer):
    """h(x) = 1/2 ||x||^2, sigma = 1; the prox step is a Euclidean projection."""

    sigma = 1.0
    name = "euclidean"

    def value(self, x):
        return 0.5 * float(np.dot(x, x))

    def grad(self, x):
        return np.asarray(x, dtype=float)

    def divergence(self, x, x_ref):
        diff = np.asarray(x, dtype=float) - np.asarray(x_ref, dtype=float)
        return 0.5 * float(np.dot(diff, diff))

    def prox(self, strategy_set, x, y):
        return project_onto(strategy_set, np.asarray(x, dtype=float) + y)


class UpdateRule:
    """How the mirror step maps back: exact projection or the closed-form affine step."""

    def __init__(self, projection_mode=FULL_SET):
        if projection_mode not in (FULL_SET, HYPERPLANE_ONLY):
            raise ValueError(f"Unknown projection mode: {projection_mode}")
        self.projection_mode = projection_mode

    def __str__(self):
        return f"UpdateRule({self.projection_mode})"


def bregman_divergence(reg, x, x_ref):
    x = np.asarray(x, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    if x.shape != x_ref.shape:
        raise ValueError(f"Dimension mismatch: {x.shape} vs {x_ref.shape}")
    return reg.divergence(x, x_ref)


def project_simplex(y, total=1.0):
    """
    Euclidean projection onto {x >= 0, 1'x = total} by sort-and-threshold.

    Sort y decreasingly, find the largest k with u_k > (sum_{i<=k} u_i - total)/k,
    and shift-clamp by that threshold.
    """
    if total <= 0:
        raise ValueError(f"Simplex sum must be positive, got {total}")
    y = np.asarray(y, dtype=float)
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, y.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(y - tau, 0.0)


def project_box(y, lo, hi):
    return np.clip(np.asarray(y, dtype=float), lo, hi)


def project_hyperplane(y, total=1.0):
    """Projection onto the affine set 1'x = total."""
    y = np.asarray(y, dtype=float)
    return y - (y.sum() - total) / y.size


def project_onto(strategy_set, y):
    if strategy_set.kind == StrategySet.BOX:
        return project_box(y, strategy_set.lo, strategy_set.hi)
    if strategy_set.kind == StrategySet.SIMPLEX:
        return project_simplex(y, strategy_set.total)
    return project_hyperplane(y, strategy_set.total)


def mirror_step(reg, strategy_set, rule, x_i, grad_i, gamma):
    """
    One mirror-descent update of a single player.

    Args:
        reg (Regularizer): Mirror map (Euclidean in practice).
        strategy_set (StrategySet): The player's set.
        rule (UpdateRule): FullSet projection or the closed-form hyperplane step.
        x_i (array): Current strategy.
        grad_i (array): Estimated own gradient.
        gamma (float): Step size (> 0).

    Returns:
        ndarray, the next strategy.
    """
    if not gamma > 0:
        raise ValueError(f"Step size must be positive, got {gamma}")
    x_i = np.asarray(x_i, dtype=float)
    grad_i = np.asarray(grad_i, dtype=float)

    if rule.projection_mode == HYPERPLANE_ONLY:
        step = gamma * grad_i
        return x_i - step + step.sum() / x_i.size

    if not strategy_set.contains(x_i):
        raise ValueError(f"Strategy {x_i} is not in {strategy_set}")
    return reg.prox(strategy_set, x_i, -gamma * grad_i)


class ProxBoundsReport:
    def __init__(self, trials, violations, max_violation):
        self.trials = trials
        self.violations = violations
        self.max_violation = max_violation

    @property
    def passed(self):
        return self.violations == 0

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return (f"[{status}] {self.violations}/{self.trials} trials violated, "
                f"max violation {self.max_violation:.3e}")


def check_prox_bounds(reg, strategy_set, trials, rng, slack=PROX_BOUND_SLACK):
    """
    Property check of the Bregman prox bounds on random (p, x, y):

        D(p, x) >= sigma/2 ||p - x||^2
        D(p, x+) <= D(p, x) - D(x+, x) + <y, x+ - p>
                 <= D(p, x) + <y, x - p> + ||y||^2 / (2 sigma)

    with x+ = prox_x(y).

    Returns:
        ProxBoundsReport
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")

    sigma = reg.sigma
    violations = 0
    worst = 0.0
    for _ in range(trials):
        p = strategy_set.sample_point(rng)
        x = strategy_set.sample_point(rng)
        y = rng.normal(size=strategy_set.dimension) * rng.exponential(1.0)
        x_plus = reg.prox(strategy_set, x, y)

        d_px = reg.divergence(p, x)
        middle = d_px - reg.divergence(x_plus, x) + float(np.dot(y, x_plus - p))
        upper = d_px + float(np.dot(y, x - p)) + float(np.dot(y, y)) / (2.0 * sigma)

        gaps = (
            0.5 * sigma * float(np.dot(p - x, p - x)) - d_px,
            reg.divergence(p, x_plus) - middle,
            middle - upper,
        )
        trial_worst = max(gaps)
        worst = max(worst, trial_worst)
        if trial_worst > slack:
            violations += 1

    report = ProxBoundsReport(trials, violations, worst)
    logger.info(f"Prox bound check on {strategy_set}: {report}")
    return report
