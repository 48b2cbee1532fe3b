import logging

import numpy as np

logger = logging.getLogger(__name__)

SPSA = "spsa"
SINGLE_SHOT = "single_shot"
CENTRAL_FD = "central_fd"
ESTIMATOR_KINDS = (SPSA, SINGLE_SHOT, CENTRAL_FD)


class PerturbationVector:
    """Rademacher perturbation: every entry is exactly -1 or +1."""

    def __init__(self, entries):
        entries = np.asarray(entries, dtype=float)
        if entries.ndim != 1 or not np.all(np.abs(entries) == 1.0):
            raise ValueError("Perturbation entries must all be +1 or -1")
        self.entries = entries

    @property
    def d(self):
        return self.entries.size

    def psi(self):
        # 1/delta == delta for +-1 entries
        return self.entries


class GradientEstimate:
    """A gradient estimate plus how it was sampled."""

    def __init__(self, vector, h_used, ell_used, eval_count, play_point=None):
        self.vector = np.asarray(vector, dtype=float)
        self.h_used = float(h_used)
        self.ell_used = int(ell_used)
        self.eval_count = int(eval_count)
        self.play_point = play_point

    def __str__(self):
        return (f"GradientEstimate(|g|={np.linalg.norm(self.vector):.4g}, h={self.h_used:.3g}, "
                f"ell={self.ell_used}, evals={self.eval_count})")


class BiasVarianceReport:
    """Monte Carlo summary of an estimator at one (x, h, ell)."""

    def __init__(self, mean_estimate, empirical_bias_norm, empirical_variance, mse, replications,
                 bias_vector=None, standard_errors=None):
        self.mean_estimate = mean_estimate
        self.empirical_bias_norm = empirical_bias_norm
        self.empirical_variance = empirical_variance
        self.mse = mse
        self.replications = replications
        self.bias_vector = bias_vector
        self.standard_errors = standard_errors

    def decomposition_gap(self):
        """|mse - (bias^2 + variance)|, zero up to rounding."""
        return abs(self.mse - (self.empirical_bias_norm ** 2 + self.empirical_variance))

    def __str__(self):
        return (f"bias={self.empirical_bias_norm:.4e} var={self.empirical_variance:.4e} "
                f"mse={self.mse:.4e} (R={self.replications})")


def _check_h(h):
    if not h > 0:
        raise ValueError(f"Smoothing radius h must be positive, got {h}")


def sample_perturbation(d, rng):
    """Draws one i.i.d. Rademacher vector of length d."""
    if d < 1:
        raise ValueError(f"Perturbation dimension must be >= 1, got {d}")
    return PerturbationVector(2.0 * rng.integers(0, 2, size=d) - 1.0)


def sample_perturbations(ell, d, rng):
    """ell independent Rademacher vectors as an (ell, d) array."""
    return 2.0 * rng.integers(0, 2, size=(ell, d)) - 1.0


def spsa_from_observations(plus, minus, deltas, h):
    """
    Combines paired observations into the simultaneous perturbation estimate.

    Only the caller's own observations and its own perturbation coordinates
    are needed, which is what lets each player estimate its partial gradient
    locally.

    Args:
        plus (array, shape (ell,)): f(x + h Delta_j) draws.
        minus (array, shape (ell,)): f(x - h Delta_j) draws.
        deltas (array, shape (ell, k)): The matching perturbation coordinates.
        h (float): Smoothing radius.

    Returns:
        ndarray of shape (k,)
    """
    plus = np.asarray(plus, dtype=float)
    minus = np.asarray(minus, dtype=float)
    ratio = (plus - minus) / (2.0 * h)
    # pairs summed in index order
    return (ratio[:, None] * deltas).mean(axis=0)


def spsa_gradient(evaluate, x, h, ell, rng):
    """
    Simultaneous perturbation gradient estimate averaged over ell pairs.

    Args:
        evaluate (callable): (point, rng) -> one unbiased noisy value of f.
        x (array): Point of interest.
        h (float): Smoothing radius (> 0).
        ell (int): Number of perturbation pairs (>= 1).
        rng (numpy.random.Generator): Stream for perturbations and noise.

    Returns:
        GradientEstimate with eval_count = 2 * ell
    """
    _check_h(h)
    if ell < 1:
        raise ValueError(f"Number of perturbation pairs must be >= 1, got {ell}")

    x = np.asarray(x, dtype=float)
    deltas = sample_perturbations(ell, x.size, rng)
    plus = np.empty(ell)
    minus = np.empty(ell)
    for j in range(ell):
        plus[j] = evaluate(x + h * deltas[j], rng)
        minus[j] = evaluate(x - h * deltas[j], rng)

    g = spsa_from_observations(plus, minus, deltas, h)
    return GradientEstimate(g, h, ell, 2 * ell)


def sample_unit_sphere(m, rng):
    """Uniform direction on the unit sphere in R^m (m = 1 gives +-1)."""
    z = rng.normal(size=m)
    norm = np.linalg.norm(z)
    while norm == 0.0:
        z = rng.normal(size=m)
        norm = np.linalg.norm(z)
    return z / norm


def single_shot_from_observation(cost, z, h):
    """(m/h) * f(x + h z) * z from one observed cost."""
    return (z.size / h) * cost * z


def single_shot_gradient(evaluate_i, x_i, x_joint_builder, h, rng):
    """
    One-evaluation sphere-sampling estimate of a player's own gradient.

    The player plays the perturbed point x_i + h z, observes a single cost
    and scales it along z.

    Args:
        evaluate_i (callable): (joint point, rng) -> the player's noisy cost.
        x_i (array): The player's current strategy.
        x_joint_builder (callable): Embeds a player strategy into the joint point.
        h (float): Sphere radius (> 0).
        rng (numpy.random.Generator)

    Returns:
        GradientEstimate with eval_count = 1 and play_point = x_i + h z
    """
    _check_h(h)
    x_i = np.asarray(x_i, dtype=float)
    z = sample_unit_sphere(x_i.size, rng)
    x_tilde = x_i + h * z
    cost = evaluate_i(x_joint_builder(x_tilde), rng)
    return GradientEstimate(single_shot_from_observation(cost, z, h), h, 1, 1, play_point=x_tilde)


def central_fd_gradient(evaluate, x, h, reps, rng):
    """Coordinate-wise central differences averaged over reps noise draws."""
    _check_h(h)
    if reps < 1:
        raise ValueError(f"reps must be >= 1, got {reps}")

    x = np.asarray(x, dtype=float)
    d = x.size
    g = np.zeros(d)
    for _ in range(reps):
        for k in range(d):
            e = np.zeros(d)
            e[k] = h
            g[k] += (evaluate(x + e, rng) - evaluate(x - e, rng)) / (2.0 * h)
    return GradientEstimate(g / reps, h, reps, 2 * d * reps)


def mse_optimal_h(ell, scale=1.0):
    """
    Radius minimizing the estimate's mean squared error, of order ell^(-1/6).

    Only meant for annotating bias/variance studies: the learning schedules
    use h_n = h0 n^(-(p+1)/4) instead.
    """
    if ell < 1:
        raise ValueError(f"ell must be >= 1, got {ell}")
    return scale * float(ell) ** (-1.0 / 6.0)


def estimate_once(estimator_kind, evaluate, x, h, ell, rng):
    """Dispatches one estimate of the requested kind."""
    if estimator_kind == SPSA:
        return spsa_gradient(evaluate, x, h, ell, rng)
    if estimator_kind == SINGLE_SHOT:
        return single_shot_gradient(evaluate, x, lambda p: p, h, rng)
    if estimator_kind == CENTRAL_FD:
        return central_fd_gradient(evaluate, x, h, ell, rng)
    raise ValueError(f"Unknown estimator kind: {estimator_kind}")


def empirical_bias_variance(estimator_kind, evaluate, x, true_grad, h, ell, replications, rng):
    """
    Monte Carlo bias, variance and MSE of an estimator at x.

    Variance is the trace of the (population) covariance of the samples, so
    mse = bias^2 + variance holds exactly on the same sample.

    Returns:
        BiasVarianceReport
    """
    if replications < 100:
        raise ValueError(f"Need at least 100 replications, got {replications}")

    true_grad = np.asarray(true_grad, dtype=float)
    samples = np.empty((replications, true_grad.size))
    for r in range(replications):
        samples[r] = estimate_once(estimator_kind, evaluate, x, h, ell, rng).vector

    mean = samples.mean(axis=0)
    bias = mean - true_grad
    centred = samples - mean
    variance = float(np.mean(np.sum(centred ** 2, axis=1)))
    mse = float(np.mean(np.sum((samples - true_grad) ** 2, axis=1)))
    se = samples.std(axis=0, ddof=1) / np.sqrt(replications)

    report = BiasVarianceReport(mean, float(np.linalg.norm(bias)), variance, mse, replications,
                                bias_vector=bias, standard_errors=se)
    logger.debug(f"{estimator_kind} h={h} ell={ell}: {report}")
    return report


# =============================================================================
# Test targets with known gradients
# =============================================================================

def quadratic_target(weights, noise_halfwidth=0.0):
    """
    f(x) = sum_k w_k x_k^2 with optional additive U[-w, w] noise.

    Returns:
        (evaluate, gradient)
    """
    weights = np.asarray(weights, dtype=float)

    def evaluate(x, rng):
        value = float(np.sum(weights * np.asarray(x) ** 2))
        if noise_halfwidth > 0:
            value += rng.uniform(-noise_halfwidth, noise_halfwidth)
        return value

    return evaluate, lambda x: 2.0 * weights * np.asarray(x, dtype=float)


def cubic_target(noise_halfwidth=0.0):
    """f(x) = x^3 in one dimension; the SPSA bias at any x is exactly h^2."""

    def evaluate(x, rng):
        value = float(np.asarray(x)[0] ** 3)
        if noise_halfwidth > 0:
            value += rng.uniform(-noise_halfwidth, noise_halfwidth)
        return value

    return evaluate, lambda x: np.array([3.0 * float(np.asarray(x)[0]) ** 2])
