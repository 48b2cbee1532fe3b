import logging

import numpy as np
from scipy.linalg import eigvalsh
from scipy.stats import linregress

from nashseek.config import (
    REFERENCE_TOL,
    REFERENCE_MAX_ITER,
    BEST_RESPONSE_TOL,
    BEST_RESPONSE_MAX_ITER,
    SLOPE_WINDOW_FRACTION,
    MIN_WINDOW_POINTS,
)
from nashseek.mirror_descent import project_onto

logger = logging.getLogger(__name__)


class SolverDidNotConverge(RuntimeError):
    """The reference solver ran out of iterations."""

    def __init__(self, residual, iterations):
        super().__init__(f"Reference solver did not converge in {iterations} iterations "
                         f"(last residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


class NEReference:
    """Certified Nash equilibrium of the expected game."""

    def __init__(self, x_star, vi_residual, per_player_improvement, solver_iterations, tau,
                 residual_history=None):
        self.x_star = np.asarray(x_star, dtype=float)
        self.vi_residual = float(vi_residual)
        self.per_player_improvement = per_player_improvement
        self.solver_iterations = int(solver_iterations)
        self.tau = float(tau)
        self.residual_history = residual_history

    @property
    def max_improvement(self):
        if self.per_player_improvement is None:
            return None
        return float(np.max(self.per_player_improvement))

    def __str__(self):
        br = "n/a" if self.per_player_improvement is None else f"{self.max_improvement:.2e}"
        return (f"NEReference(d={self.x_star.size}, residual={self.vi_residual:.2e}, "
                f"max improvement={br}, iterations={self.solver_iterations})")


def _slices(sets):
    offsets = np.concatenate([[0], np.cumsum([s.dimension for s in sets])])
    return [slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(sets))]


def project_joint(sets, y):
    """Per-player projections of a joint point."""
    y = np.asarray(y, dtype=float)
    out = np.empty_like(y)
    for s, sl in zip(sets, _slices(sets)):
        out[sl] = project_onto(s, y[sl])
    return out


def vi_residual(x, phi, sets, tau):
    """Natural-map residual ||x - P(x - tau phi(x))||; zero exactly at the equilibrium."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - project_joint(sets, x - tau * phi(x))))


def reference_step_size(jacobian):
    """
    Fixed step for projected-gradient on a strongly monotone affine map.

    Symmetric Jacobian: tau = 1/L with L the largest |eigenvalue|, which is a
    contraction. Otherwise tau = mu / L^2 with L the spectral norm.
    """
    J = np.asarray(jacobian, dtype=float)
    sym = 0.5 * (J + J.T)
    eig = eigvalsh(sym)
    if np.allclose(J, J.T):
        return 1.0 / float(np.max(np.abs(eig)))
    L = float(np.linalg.norm(J, 2))
    return float(eig[0]) / L ** 2


def best_response_improvement(game, x, i, tol=1e-14, max_iter=BEST_RESPONSE_MAX_ITER):
    """
    How much player i could lower its expected cost by deviating from x alone.

    Minimizes f_i(., x_{-i}) over X_i by projected gradient on the player's own
    gradient block, then returns f_i(x) - f_i(best response).
    """
    sl = game.slices[i]
    s = game.sets[i]
    if game.jacobian is not None:
        block = np.asarray(game.jacobian)[sl, sl]
        step = 1.0 / float(np.max(np.abs(eigvalsh(0.5 * (block + block.T)))))
    else:
        step = 0.1

    y = np.asarray(x, dtype=float).copy()
    for _ in range(max_iter):
        own = game.exact_gradient(y)[sl]
        new = project_onto(s, y[sl] - step * own)
        moved = np.linalg.norm(new - y[sl])
        y[sl] = new
        if moved <= tol:
            break
    return game.expected_cost(i, x) - game.expected_cost(i, y)


def solve_ne_reference(game, tol=REFERENCE_TOL, max_iter=REFERENCE_MAX_ITER, x0=None, tau=None,
                       certify=True):
    """
    Reference Nash equilibrium of the expected game.

    Solves the variational inequality by projected-gradient iteration with the
    exact map phi, then certifies the point twice: by its natural-map residual
    and by every player's best-response improvement.

    Args:
        game (GameInstance): Must carry exact_gradient.
        tol (float): Natural-map residual to reach.
        max_iter (int): Iteration cap.
        x0 (array, optional): Start; defaults to the uniform point.
        tau (float, optional): Step; defaults to reference_step_size(game.jacobian).
        certify (bool): Run the best-response check.

    Returns:
        NEReference
    """
    if game.exact_gradient is None:
        raise ValueError(f"{game.name} has no exact gradient; cannot solve for a reference")
    if tau is None:
        if game.jacobian is None:
            raise ValueError("Pass tau explicitly for games without a constant Jacobian")
        tau = reference_step_size(game.jacobian)

    x = game.uniform_start() if x0 is None else project_joint(game.sets, x0)
    residual = np.inf
    iterations = 0
    history = []
    for iterations in range(1, max_iter + 1):
        x_next = project_joint(game.sets, x - tau * game.exact_gradient(x))
        residual = float(np.linalg.norm(x - x_next))
        history.append(residual)
        x = x_next
        if residual <= tol:
            break
    else:
        raise SolverDidNotConverge(residual, max_iter)

    residual = vi_residual(x, game.exact_gradient, game.sets, tau)

    improvements = None
    if certify and game.expected_cost is not None:
        improvements = np.array([best_response_improvement(game, x, i) for i in range(game.num_players)])
        if np.max(improvements) > BEST_RESPONSE_TOL or np.min(improvements) < -1e-8:
            raise SolverDidNotConverge(float(np.max(np.abs(improvements))), iterations)

    ref = NEReference(x, residual, improvements, iterations, tau, residual_history=np.asarray(history))
    logger.info(f"Reference equilibrium for {game.name}: {ref}")
    return ref


class RateFit:
    """Least-squares line through (log n, log mean squared error)."""

    def __init__(self, slope, intercept, window, r_squared, points):
        self.slope = slope
        self.intercept = intercept
        self.window = window
        self.r_squared = r_squared
        self.points = points

    def __str__(self):
        return (f"slope={self.slope:.4f} (r2={self.r_squared:.4f}) "
                f"on n in [{self.window[0]}, {self.window[1]}], {self.points} points")


def fit_rate_slope(mean_sq_error, iters=None, window_fraction=SLOPE_WINDOW_FRACTION, window=None,
                   min_points=MIN_WINDOW_POINTS):
    """
    Empirical convergence rate of a mean squared-error curve.

    Args:
        mean_sq_error (array): Curve indexed by iteration.
        iters (array, optional): Iteration numbers; defaults to 1..len.
        window_fraction (float): Default window is n in [fraction * T, T].
        window (tuple, optional): Explicit (n_lo, n_hi).
        min_points (int): Minimum number of points inside the window.

    Returns:
        RateFit
    """
    y = np.asarray(mean_sq_error, dtype=float)
    n = np.arange(1, y.size + 1) if iters is None else np.asarray(iters, dtype=float)
    if n.shape != y.shape:
        raise ValueError(f"iters and curve lengths differ: {n.size} vs {y.size}")

    if window is None:
        T = n[-1]
        window = (max(1, int(np.ceil(window_fraction * T))), int(T))
    mask = (n >= window[0]) & (n <= window[1])
    if mask.sum() < min_points:
        raise ValueError(f"Only {int(mask.sum())} points in window {window}, need {min_points}")
    if np.any(y[mask] <= 0):
        raise ValueError(f"Non-positive squared errors in window {window}: exact convergence, slope skipped")

    fit = linregress(np.log(n[mask]), np.log(y[mask]))
    return RateFit(float(fit.slope), float(fit.intercept), tuple(window), float(fit.rvalue ** 2),
                   int(mask.sum()))
