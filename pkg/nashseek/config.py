"""
NashSeek Configuration Module
Centralizes all tolerances, schedule defaults, instance ranges and paths.
"""

import os

# =============================================================================
# 🔬 NUMERICAL TOLERANCES
# =============================================================================

MEMBERSHIP_TOL = 1e-12         # |1'x - sum| allowed for simplex / hyperplane membership
BOX_TOL = 1e-12                # Slack on box bounds
PROX_BOUND_SLACK = 1e-9       # Slack for the Bregman prox inequality checks
REFERENCE_TOL = 1e-10          # Natural-map residual accepted for the reference NE
REFERENCE_MAX_ITER = 200000    # Projected-gradient iterations before giving up
REFERENCE_ACCEPT_RESIDUAL = 1e-8  # Loaded reference files must re-check below this
BEST_RESPONSE_TOL = 1e-6       # Max unilateral improvement accepted at x*
BEST_RESPONSE_MAX_ITER = 20000 # Inner iterations of the per-player best response
H_UNDERFLOW = 1e-12            # SDL stops early once h_n drops below this

# =============================================================================
# 📈 SCHEDULE DEFAULTS (gamma_n = gamma/n, ell_n = ceil(ell0 n^p), h_n = h0 n^-(p+1)/4)
# =============================================================================

DEFAULT_GAMMA = 0.5            # gamma_n = 1/(2n)
DEFAULT_ELL0 = 1
DEFAULT_P = 0.0
DEFAULT_H0 = 0.1
SINGLE_SHOT_H_EXPONENT = 1.0 / 3.0  # h_n = h0 n^(-1/3) for the single-shot baseline

# =============================================================================
# 🏭 COURNOT INSTANCE GENERATION
# =============================================================================

COST_RANGE = (3.0, 4.0)        # c_ij ~ U[3, 4]
INTERCEPT_RANGE = (4.0, 5.0)   # a_j ~ U[4, 5]
SLOPE_RANGE = (0.5, 0.55)      # b_j ~ U[0.5, 0.55]
NOISE_DIVISOR = 8.0            # zeta_j ~ U[-a_j/8, a_j/8], eta_ij ~ U[-c_ij/8, c_ij/8]
DEFAULT_CAPACITY = 1.0         # C_ij, only read by Box strategy sets

# =============================================================================
# 🧪 HARNESS DEFAULTS
# =============================================================================

DEFAULT_ITERS = 100000
DEFAULT_SEEDS = 20
DEFAULT_RECORD_EVERY = 100     # Thinning of persisted iterates (sq_error is kept every iteration)
BAND_QUANTILES = (10.0, 90.0)  # Central 80% band across seeds
SLOPE_WINDOW_FRACTION = 0.1    # Fit on n in [T/10, T]
MIN_WINDOW_POINTS = 50
BIAS_VARIANCE_REPLICATIONS = 2000

# =============================================================================
# 📂 FILE PATHS
# =============================================================================

BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
OUTPUT_DIR = os.path.join(BASE_DIR, "output")
PRESETS_DIR = os.path.join(BASE_DIR, "presets")

TRACE_HEADER = ["run_id", "seed", "iter", "sq_error", "gamma_n", "ell_n", "h_n", "cum_evals"]
MEAN_HEADER = ["iter", "mean_sq_error", "band_lo", "band_hi", "n_seeds"]
BIAS_VARIANCE_HEADER = ["estimator", "h", "ell", "bias_norm", "variance", "mse", "replications", "h_mse_optimal"]

# =============================================================================
# ⚙️ SYSTEM SETTINGS
# =============================================================================

CURRENT_VERSION = "1.0.0"
NUM_WORKERS = 4                # Parallel seed workers; --workers overrides, NASHSEEK_WORKERS overrides both
WORKERS_ENV_VAR = "NASHSEEK_WORKERS"
