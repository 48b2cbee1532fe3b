import logging

import numpy as np
from scipy.linalg import eigvalsh

from nashseek.config import (
    MEMBERSHIP_TOL,
    BOX_TOL,
    COST_RANGE,
    INTERCEPT_RANGE,
    SLOPE_RANGE,
    NOISE_DIVISOR,
    DEFAULT_CAPACITY,
)

logger = logging.getLogger(__name__)


class NotStronglyMonotoneError(ValueError):
    """Raised when the symmetric part of the game Jacobian is not positive definite."""


class StrategySet:
    """
    Closed convex strategy set of one player.

    Three kinds are supported:
        box         lo <= x <= hi componentwise
        simplex     x >= 0 and 1'x = total
        hyperplane  1'x = 1 with no sign constraint
    """

    BOX = "box"
    SIMPLEX = "simplex"
    HYPERPLANE = "hyperplane"

    def __init__(self, kind, dimension, lo=None, hi=None, total=1.0):
        if dimension < 1:
            raise ValueError(f"Strategy set dimension must be >= 1, got {dimension}")
        self.kind = kind
        self.dimension = int(dimension)
        self.total = float(total)
        self.lo = None
        self.hi = None

        if kind == self.BOX:
            self.lo = np.broadcast_to(np.asarray(lo, dtype=float), (self.dimension,)).copy()
            self.hi = np.broadcast_to(np.asarray(hi, dtype=float), (self.dimension,)).copy()
            if np.any(self.lo > self.hi):
                raise ValueError(f"Box bounds must satisfy lo <= hi, got lo={self.lo}, hi={self.hi}")
        elif kind == self.SIMPLEX:
            if self.total <= 0:
                raise ValueError(f"Simplex sum must be positive, got {self.total}")
        elif kind == self.HYPERPLANE:
            self.total = 1.0
        else:
            raise ValueError(f"Unknown strategy set kind: {kind}")

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        return cls(cls.BOX, lo.size, lo=lo, hi=hi)

    @classmethod
    def simplex(cls, dimension, total=1.0):
        return cls(cls.SIMPLEX, dimension, total=total)

    @classmethod
    def hyperplane(cls, dimension):
        return cls(cls.HYPERPLANE, dimension)

    def contains(self, x, tol=MEMBERSHIP_TOL):
        """Membership test with the tolerances of the set kind."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dimension,) or not np.all(np.isfinite(x)):
            return False
        if self.kind == self.BOX:
            return bool(np.all(x >= self.lo - BOX_TOL) and np.all(x <= self.hi + BOX_TOL))
        if self.kind == self.SIMPLEX:
            return bool(np.all(x >= 0.0) and abs(x.sum() - self.total) <= tol)
        return abs(x.sum() - 1.0) <= tol

    def sample_point(self, rng):
        """Draws a random feasible point (used by property checks)."""
        if self.kind == self.BOX:
            return rng.uniform(self.lo, self.hi)
        if self.kind == self.SIMPLEX:
            return self.total * rng.dirichlet(np.ones(self.dimension))
        y = rng.normal(size=self.dimension)
        return y - (y.sum() - 1.0) / self.dimension

    def uniform_point(self):
        """Centre-like starting point: 1/m per coordinate (box: midpoint)."""
        if self.kind == self.BOX:
            return 0.5 * (self.lo + self.hi)
        return np.full(self.dimension, self.total / self.dimension)

    def __str__(self):
        if self.kind == self.BOX:
            return f"Box(dim={self.dimension})"
        if self.kind == self.SIMPLEX:
            return f"Simplex(sum={self.total}, dim={self.dimension})"
        return f"HyperplaneSumOne(dim={self.dimension})"


class GameInstance:
    """
    A stochastic N-player game seen only through noisy cost draws.

    Args:
        name (str): Short label used in logs and summaries.
        dims (list[int]): m_i per player.
        sets (list[StrategySet]): Strategy set per player.
        noisy_cost (callable): (i, x, rng) -> one draw of F_i(x; xi_i).
        sample_game (callable, optional): (x, rng) -> all N costs of one shared
            game realization. Falls back to independent noisy_cost calls.
        sample_batch (callable, optional): (points, rng) -> (K, N) costs for a
            (K, d) stack of points, one realization per row, drawn in row order.
            Falls back to sample_game row by row.
        expected_cost (callable, optional): (i, x) -> f_i(x).
        exact_gradient (callable, optional): x -> phi(x), own partials stacked in player order.
        jacobian (ndarray, optional): Constant Jacobian of phi when phi is affine.
    """

    def __init__(self, name, dims, sets, noisy_cost, sample_game=None,
                 expected_cost=None, exact_gradient=None, jacobian=None, sample_batch=None):
        if len(dims) < 2:
            raise ValueError(f"A game needs at least 2 players, got {len(dims)}")
        if len(sets) != len(dims):
            raise ValueError(f"Got {len(sets)} strategy sets for {len(dims)} players")
        for i, (m_i, s) in enumerate(zip(dims, sets)):
            if s.dimension != m_i:
                raise ValueError(f"Player {i}: set dimension {s.dimension} != m_i {m_i}")

        self.name = name
        self.dims = [int(m) for m in dims]
        self.sets = list(sets)
        self.noisy_cost = noisy_cost
        self._sample_game = sample_game
        self._sample_batch = sample_batch
        self.expected_cost = expected_cost
        self.exact_gradient = exact_gradient
        self.jacobian = jacobian

        offsets = np.concatenate([[0], np.cumsum(self.dims)])
        self.slices = [slice(int(offsets[i]), int(offsets[i + 1])) for i in range(len(self.dims))]

    @property
    def num_players(self):
        return len(self.dims)

    @property
    def d(self):
        return int(sum(self.dims))

    def split(self, x):
        """Per-player views of a joint point."""
        return [x[s] for s in self.slices]

    def is_feasible(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            return False
        return all(s.contains(x[sl]) for s, sl in zip(self.sets, self.slices))

    def sample_costs(self, x, rng):
        """One game played at x: every player's noisy cost from the same realization."""
        if self._sample_game is not None:
            return np.asarray(self._sample_game(x, rng), dtype=float)
        return np.array([self.noisy_cost(i, x, rng) for i in range(self.num_players)], dtype=float)

    def sample_costs_batch(self, points, rng):
        """One game realization per row of a (K, d) stack; returns (K, N) costs."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self._sample_batch is not None:
            return np.asarray(self._sample_batch(points, rng), dtype=float).reshape(points.shape[0], self.num_players)
        return np.vstack([self.sample_costs(p, rng) for p in points])

    def uniform_start(self):
        return np.concatenate([s.uniform_point() for s in self.sets])

    def with_sets(self, sets):
        """Same costs, different strategy sets."""
        return GameInstance(self.name, self.dims, sets, self.noisy_cost,
                            sample_game=self._sample_game,
                            sample_batch=self._sample_batch,
                            expected_cost=self.expected_cost,
                            exact_gradient=self.exact_gradient,
                            jacobian=self.jacobian)

    def __str__(self):
        return f"{self.name}: N={self.num_players}, d={self.d}, sets={self.sets[0]}"


class CournotParams:
    """Parameters of the multi-market Cournot game."""

    def __init__(self, a, b, c, capacity=None, price_noise_halfwidth=None, cost_noise_halfwidth=None):
        self.a = np.atleast_1d(np.asarray(a, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        self.c = np.atleast_2d(np.asarray(c, dtype=float))
        self.N, self.m = self.c.shape

        if self.a.shape != (self.m,) or self.b.shape != (self.m,):
            raise ValueError(f"a and b must have length m={self.m}")
        if self.N < 2 or self.m < 1:
            raise ValueError(f"Cournot game needs N >= 2 and m >= 1, got N={self.N}, m={self.m}")
        if np.any(self.a <= 0) or np.any(self.b <= 0) or np.any(self.c <= 0):
            raise ValueError("Cournot parameters a, b, c must be strictly positive")

        if capacity is None:
            capacity = DEFAULT_CAPACITY
        self.capacity = np.broadcast_to(np.asarray(capacity, dtype=float), (self.N, self.m)).copy()
        if price_noise_halfwidth is None:
            price_noise_halfwidth = self.a / NOISE_DIVISOR
        if cost_noise_halfwidth is None:
            cost_noise_halfwidth = self.c / NOISE_DIVISOR
        self.price_noise_halfwidth = np.broadcast_to(
            np.asarray(price_noise_halfwidth, dtype=float), (self.m,)).copy()
        self.cost_noise_halfwidth = np.broadcast_to(
            np.asarray(cost_noise_halfwidth, dtype=float), (self.N, self.m)).copy()

    @property
    def d(self):
        return self.N * self.m

    def without_noise(self):
        return CournotParams(self.a, self.b, self.c, capacity=self.capacity,
                             price_noise_halfwidth=0.0, cost_noise_halfwidth=0.0)

    def __str__(self):
        return (f"Cournot(N={self.N}, m={self.m}, a in [{self.a.min():.3f}, {self.a.max():.3f}], "
                f"b in [{self.b.min():.3f}, {self.b.max():.3f}], c in [{self.c.min():.3f}, {self.c.max():.3f}])")


def generate_cournot_instance(N, m, seed):
    """
    Draws a random Cournot instance from the experiment distributions.

    Args:
        N (int): Number of firms (>= 2).
        m (int): Number of markets (>= 1).
        seed (int): Instance seed; the same (N, m, seed) always gives the same instance.

    Returns:
        CournotParams
    """
    if N < 2:
        raise ValueError(f"A game needs at least 2 players, got N={N}")
    if m < 1:
        raise ValueError(f"Need at least one market, got m={m}")

    rng = np.random.default_rng(seed)
    c = rng.uniform(*COST_RANGE, size=(N, m))
    a = rng.uniform(*INTERCEPT_RANGE, size=m)
    b = rng.uniform(*SLOPE_RANGE, size=m)

    params = CournotParams(a, b, c)
    logger.info(f"Generated instance (seed={seed}): {params}")
    return params


def _quantities(params, x):
    X = np.asarray(x, dtype=float)
    X = X.reshape(params.N, params.m) if X.ndim == 1 else X
    assert np.all(np.isfinite(X)), "Cournot quantities must be finite"
    return X


def cournot_noisy_cost(params, i, x, rng):
    """One draw of F_i = sum_j (c_ij + eta_ij - p_j(x; zeta_j)) x_ij with fresh noise."""
    X = _quantities(params, x)
    zeta = rng.uniform(-params.price_noise_halfwidth, params.price_noise_halfwidth)
    eta = rng.uniform(-params.cost_noise_halfwidth[i], params.cost_noise_halfwidth[i])
    price = params.a + zeta - params.b * X.sum(axis=0)
    return float(np.sum((params.c[i] + eta - price) * X[i]))


def cournot_sample_batch(params, points, rng):
    """
    One realization per row of a (K, d) stack of joint points.

    Row k consumes m zeta draws and then N*m eta draws, so a batch uses the
    stream exactly as K calls of cournot_sample_game in row order would.

    Returns:
        (K, N) array of costs.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    K, N, m = points.shape[0], params.N, params.m
    X = _quantities(params, points).reshape(K, N, m)

    halfwidth = np.concatenate([params.price_noise_halfwidth, params.cost_noise_halfwidth.ravel()])
    draws = rng.uniform(-halfwidth, halfwidth, size=(K, halfwidth.size))
    zeta = draws[:, :m]
    eta = draws[:, m:].reshape(K, N, m)

    price = params.a + zeta - params.b * X.sum(axis=1)
    return np.sum((params.c + eta - price[:, None, :]) * X, axis=2)


def cournot_sample_game(params, x, rng):
    """All firms' costs from one realization: zeta shared, eta private per firm."""
    return cournot_sample_batch(params, np.asarray(x, dtype=float)[None, :], rng)[0]


def cournot_expected_cost(params, i, x):
    X = _quantities(params, x)
    return float(np.sum((params.c[i] - params.a + params.b * X.sum(axis=0)) * X[i]))


def cournot_exact_gradient(params, x):
    """phi(x): component (i, j) = c_ij - a_j + b_j sum_k x_kj + b_j x_ij."""
    X = _quantities(params, x)
    G = params.c - params.a + params.b * X.sum(axis=0) + params.b * X
    return G.ravel()


def cournot_jacobian(params):
    """Constant d x d Jacobian of phi (player-major ordering)."""
    N, m = params.N, params.m
    J = np.zeros((N * m, N * m))
    for j in range(m):
        idx = np.arange(N) * m + j
        J[np.ix_(idx, idx)] = params.b[j] * (np.eye(N) + np.ones((N, N)))
    return J


def monotonicity_constant(jacobian):
    """
    beta = 2 * lambda_min of the symmetric part of the Jacobian, so that
    (phi(x) - phi(x'))'(x - x') >= (beta/2) ||x - x'||^2.
    """
    J = np.asarray(jacobian, dtype=float)
    lam_min = eigvalsh(0.5 * (J + J.T))[0]
    if lam_min <= 0:
        raise NotStronglyMonotoneError(f"Game is not strongly monotone (lambda_min={lam_min:.3e})")
    return 2.0 * float(lam_min)


def compute_beta(params):
    """
    Strong-monotonicity constant of the Cournot map.

    The Jacobian splits per market into b_j (I + 11'), so only N x N
    eigenproblems are solved.
    """
    N = params.N
    lam_min = np.inf
    for j in range(params.m):
        block = params.b[j] * (np.eye(N) + np.ones((N, N)))
        lam_min = min(lam_min, eigvalsh(block)[0])
    if lam_min <= 0:
        raise NotStronglyMonotoneError(f"Game is not strongly monotone (lambda_min={lam_min:.3e})")
    return 2.0 * float(lam_min)


def cournot_game(params, set_kind=StrategySet.SIMPLEX):
    """
    Wraps Cournot parameters as a GameInstance.

    Args:
        params (CournotParams): Instance parameters.
        set_kind (str): 'simplex' (x_i >= 0, 1'x_i = 1), 'hyperplane' (1'x_i = 1)
            or 'box' ([0, C_i]).
    """
    if set_kind == StrategySet.SIMPLEX:
        sets = [StrategySet.simplex(params.m) for _ in range(params.N)]
    elif set_kind == StrategySet.HYPERPLANE:
        sets = [StrategySet.hyperplane(params.m) for _ in range(params.N)]
    elif set_kind == StrategySet.BOX:
        sets = [StrategySet.box(np.zeros(params.m), params.capacity[i]) for i in range(params.N)]
    else:
        raise ValueError(f"Unknown strategy set kind: {set_kind}")

    return GameInstance(
        name=f"cournot-N{params.N}-m{params.m}",
        dims=[params.m] * params.N,
        sets=sets,
        noisy_cost=lambda i, x, rng: cournot_noisy_cost(params, i, x, rng),
        sample_game=lambda x, rng: cournot_sample_game(params, x, rng),
        sample_batch=lambda points, rng: cournot_sample_batch(params, points, rng),
        expected_cost=lambda i, x: cournot_expected_cost(params, i, x),
        exact_gradient=lambda x: cournot_exact_gradient(params, x),
        jacobian=cournot_jacobian(params),
    )


def duopoly_params(a=5.0, b=1.0, c=3.0, noise=False, capacity=10.0):
    """Single-market duopoly with symmetric unit costs; x* = (a - c) / (3b) per firm."""
    halfwidth_a = a / NOISE_DIVISOR if noise else 0.0
    halfwidth_c = c / NOISE_DIVISOR if noise else 0.0
    return CournotParams([a], [b], [[c], [c]], capacity=capacity,
                         price_noise_halfwidth=halfwidth_a, cost_noise_halfwidth=halfwidth_c)


def separable_game(N, m, seed, noise_halfwidth=0.5, bound=10.0):
    """
    Rival-independent game: f_i(x) = (k_i/2) ||x_i - t_i||^2, observed with
    additive U[-w, w] noise. Each player's cost ignores x_{-i}.
    """
    if N < 2:
        raise ValueError(f"A game needs at least 2 players, got N={N}")
    rng = np.random.default_rng(seed)
    targets = rng.uniform(-1.0, 1.0, size=(N, m))
    weights = rng.uniform(1.0, 2.0, size=N)

    def expected(i, x):
        X = np.asarray(x, dtype=float).reshape(N, m)
        return float(0.5 * weights[i] * np.sum((X[i] - targets[i]) ** 2))

    def noisy(i, x, rng_):
        return expected(i, x) + rng_.uniform(-noise_halfwidth, noise_halfwidth)

    def gradient(x):
        X = np.asarray(x, dtype=float).reshape(N, m)
        return (weights[:, None] * (X - targets)).ravel()

    return GameInstance(
        name=f"separable-N{N}-m{m}",
        dims=[m] * N,
        sets=[StrategySet.box(-bound * np.ones(m), bound * np.ones(m)) for _ in range(N)],
        noisy_cost=noisy,
        expected_cost=expected,
        exact_gradient=gradient,
        jacobian=np.kron(np.diag(weights), np.eye(m)),
    )
