"""
Constants Module

Centralized location for the numerical defaults and tolerances used throughout
the ZISS package. User-facing defaults can be overridden in config.yaml; the
rest are fixed properties of the numerics.
"""

# ============================================================================
# Dropout Curve (B-spline) Configuration
# ============================================================================

# Default number of B-spline basis functions for the dropout curve
DEFAULT_BASIS_M = 6

# Default B-spline degree (cubic)
DEFAULT_BASIS_DEGREE = 3

# ============================================================================
# Smoothing Spline Configuration
# ============================================================================

# Use every distinct point as a representer knot up to this many points
MAX_REPRESENTER_KNOTS = 200

# Knot count above MAX_REPRESENTER_KNOTS is ceil(KNOT_SUBSAMPLE_SCALE * N^(2/9))
KNOT_SUBSAMPLE_SCALE = 10.0

# Gram eigenvalues below this fraction of the largest one are discarded
GRAM_EIGEN_RTOL = 1e-12

# Diagonal entries of the QR factor below this fraction of the largest one
# mark a singular working problem
QR_RANK_RTOL = 1e-10

# Slack when checking that rescaled pseudotime lies in [0, 1]
UNIT_INTERVAL_SLACK = 1e-12

# ============================================================================
# Smoothing Parameter Selection
# ============================================================================

# Initial smoothing parameter is LAMBDA_INIT_SCALE * n^(LAMBDA_INIT_EXPONENT)
LAMBDA_INIT_SCALE = 10.0
LAMBDA_INIT_EXPONENT = -2.0 / 9.0

# Number of log-spaced values in the GCV grid
DEFAULT_LAMBDA_GRID_SIZE = 31

# GCV grid spans lambda_init * 10^(+/- span)
DEFAULT_LAMBDA_GRID_SPAN = 3.0

# Times the grid may grow past an edge that holds the GCV minimizer; each
# step adds half a grid (span decades) at the same spacing
DEFAULT_LAMBDA_GRID_EXTENSIONS = 2

# ============================================================================
# Newton Solvers
# ============================================================================

# Penalized Poisson Newton iteration (problem P2)
POISSON_MAX_ITER = 50
POISSON_TOL = 1e-8

# Damped Newton ascent for the dropout coefficients (problem P1)
DROPOUT_MAX_ITER = 100
DROPOUT_TOL = 1e-8

# Ridge added to the negated Hessian when its Cholesky factorization fails
HESSIAN_RIDGE = 1e-8

# Maximum number of step halvings before a Newton step is abandoned
MAX_STEP_HALVINGS = 20

# Relative slack when comparing objective values across accepted steps
OBJECTIVE_SLACK = 1e-12

# Floor on the mean when forming Poisson working weights and responses
MIN_WORKING_MEAN = 1e-12

# ============================================================================
# EM Driver
# ============================================================================

# Relative l2 change of the fitted mean that stops the EM loop
DEFAULT_EPSILON = 1e-4

# Maximum number of EM iterations
DEFAULT_EM_MAX_ITER = 200

# Initial mean when the data hold no positive count
FALLBACK_INITIAL_MEAN = 1e-2

# Initial responsibility assigned to zero counts
INITIAL_ZERO_RESPONSIBILITY = 0.5

# Initial Poisson-component probability is kept inside [clip, 1 - clip]
INITIAL_PROB_CLIP = 1e-6

# ============================================================================
# Simulation Configuration
# ============================================================================

# Number of design points on [0, 1]
DEFAULT_N_POINTS = 41

# Samples drawn at each design point
DEFAULT_N_PER_POINT = 80

# Number of replicates in an MSE table
DEFAULT_REPLICATES = 100

# Design points are mapped onto [DESIGN_EDGE, 1 - DESIGN_EDGE]
DESIGN_EDGE = 1e-6

# How the second curve of a built-in truth is read: as the dropout probability
# or as the probability of the Poisson component
TRUTH_CONVENTIONS = ("dropout", "poisson")
DEFAULT_TRUTH_CONVENTION = "dropout"

# Default over-dispersion and up-moving grids for sweeps
DEFAULT_OVERDISPERSION_GRID = (0.0, 0.1, 0.3)
DEFAULT_SHIFT_GRID = (0.0, 1.0, 2.0, 4.0)

# ============================================================================
# CLI Configuration
# ============================================================================

# Default number of equal-width pseudotime bins
DEFAULT_BINS = 150

# Points in the exported curve grid
DEFAULT_GRID_POINTS = 512

# Seconds to wait for a single replicate response from a worker
WORKER_RESPONSE_TIMEOUT = 1800.0

# Seconds to wait for a worker to exit after shutdown
WORKER_JOIN_TIMEOUT = 10.0

# Seconds to wait for an output file lock
FILE_LOCK_TIMEOUT = 10.0

# ============================================================================
# Logging Configuration
# ============================================================================

# Maximum log file size for rotation (bytes) - 10MB
LOG_MAX_SIZE = 10 * 1024 * 1024

# Number of backup log files to keep
LOG_BACKUP_COUNT = 5

# ============================================================================
# Exit Codes
# ============================================================================

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4
