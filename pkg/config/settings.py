import os

# ==============================================================================
# Exact Linear Algebra Configuration
# ==============================================================================
JACOBI_TOLERANCE = float(os.getenv("JACOBI_TOLERANCE", "1e-15")) # Relative off-diagonal mass at which Jacobi sweeps stop
JACOBI_MAX_SWEEPS = int(os.getenv("JACOBI_MAX_SWEEPS", "60")) # Hard stop for cyclic Jacobi sweeps
SVD_MAX_DIM = 4 # Singular values are only supported for d <= 4

# ==============================================================================
# Flag Geometry Configuration
# ==============================================================================
OPPOSITION_EPS = float(os.getenv("OPPOSITION_EPS", "1e-9")) # |conormal(point)| above this means "not incident"
INCIDENCE_TOLERANCE = float(os.getenv("INCIDENCE_TOLERANCE", "1e-9")) # ProjFlag incidence check
UNIT_NORM_TOLERANCE = 1e-12 # Unit-vector invariant for ProjPoint / ProjHyperplane
GAP_EPS = float(os.getenv("GAP_EPS", "1e-9")) # attracting_flag needs sigma1/sigma2 > 1 + GAP_EPS
CHART_MARGIN = float(os.getenv("CHART_MARGIN", "1e-9")) # Points closer than this to the excluded hyperplane are at infinity

# ==============================================================================
# Regularity Scan Configuration
# ==============================================================================
RADIUS_CAP = int(os.getenv("RADIUS_CAP", "30")) # Hard cap on word-ball radius (override with --cap-override)
DEFAULT_RADIUS = int(os.getenv("DEFAULT_RADIUS", "10")) # Radius used when the CLI gets no --radius
MAX_SPHERE_ELEMENTS = int(os.getenv("MAX_SPHERE_ELEMENTS", "2000000")) # Refuse to build spheres larger than this
DIVERGENCE_THRESHOLD = float(os.getenv("DIVERGENCE_THRESHOLD", "10")) # min sigma1/sigma2 at max radius for DIVERGENT-TREND
BOUNDED_GAP_THRESHOLD = float(os.getenv("BOUNDED_GAP_THRESHOLD", "10")) # Below this gap a sequence counts as non-contracting
TREND_START_FRACTION = float(os.getenv("TREND_START_FRACTION", "0.5")) # Trend is judged on radii >= fraction * radius
TREND_RELATIVE_SLACK = 1e-9 # Allowed relative dip when testing "nondecreasing"
LIMIT_SET_GAP_THRESHOLD = float(os.getenv("LIMIT_SET_GAP_THRESHOLD", "10")) # Default gap threshold for limit-set sampling
LIMIT_SET_RESOLUTION = float(os.getenv("LIMIT_SET_RESOLUTION", "1e-6")) # fs resolution for deduplicating sampled flags
CLUSTER_RESOLUTION = float(os.getenv("CLUSTER_RESOLUTION", "1e-3")) # fs resolution for the three-point check
CONTRACTION_TAIL_TOLERANCE = float(os.getenv("CONTRACTION_TAIL_TOLERANCE", "1e-3")) # Successive attracting points must settle below this
CONTRACTION_TAIL_LENGTH = int(os.getenv("CONTRACTION_TAIL_LENGTH", "3")) # How many tail steps must settle

# ==============================================================================
# Unipotent Z^2 Configuration
# ==============================================================================
WITNESS_BOUND_FACTOR = float(os.getenv("WITNESS_BOUND_FACTOR", "4")) # Reported bound = factor * observed sup
WITNESS_BOUND_FLOOR = float(os.getenv("WITNESS_BOUND_FLOOR", "50")) # ... but never below this
WITNESS_SCAN_RANGE = int(os.getenv("WITNESS_SCAN_RANGE", "64")) # |m| range scanned when estimating the witness bound
DIAGONAL_LINEAR_FORM_BOUND = 1.0 # C0 for the diagonal witness family
CONTINUED_FRACTION_MAX_TERMS = int(os.getenv("CONTINUED_FRACTION_MAX_TERMS", "40")) # Float expansions stop here

# ==============================================================================
# Ping-Pong Configuration
# ==============================================================================
GRID_RESOLUTION = float(os.getenv("GRID_RESOLUTION", "1e-3")) # Covering radius of the sampling grid
GRID_RESOLUTION_D4 = float(os.getenv("GRID_RESOLUTION_D4", "1e-2")) # Search default for d = 4, where grids grow cubically
OPPOSITE_POINT_MIN_MARGIN = float(os.getenv("OPPOSITE_POINT_MIN_MARGIN", "1e-3")) # find_opposite_point returns only above this
OPPOSITE_POINT_GRID = int(os.getenv("OPPOSITE_POINT_GRID", "400")) # Candidate points for the opposite-point search
OPPOSITE_POINT_REFINE_STEPS = int(os.getenv("OPPOSITE_POINT_REFINE_STEPS", "40")) # Pattern-search refinement steps
PROXIMAL_GAP = float(os.getenv("PROXIMAL_GAP", "1e-9")) # top modulus > second * (1 + PROXIMAL_GAP)
POWER_WINDOW = int(os.getenv("POWER_WINDOW", "5")) # choose_power checks |n| in [N, N + POWER_WINDOW]
MAX_POWER = int(os.getenv("MAX_POWER", "30")) # Default maxN for choose_power
DELTA_BALL_RADIUS = int(os.getenv("DELTA_BALL_RADIUS", "3")) # Radius of the Delta ball checked by certificates
GAMMA_SEARCH_RADIUS = int(os.getenv("GAMMA_SEARCH_RADIUS", "6")) # Radius of the proximal-element search
CERTIFICATE_MIN_MARGIN = float(os.getenv("CERTIFICATE_MIN_MARGIN", "1e-3")) # Certificates with smaller margin are rejected
IMAGE_BALL_PADDING = 1.25 * CERTIFICATE_MIN_MARGIN # Added to the certified reach of exceptional images in C1
SET_RADIUS_LADDER = [0.1, 0.05, 0.02, 0.01, 0.005, 0.002, 0.0015, 0.00125] # Radii tried for the neighbourhoods V of gamma's fixed points
GRID_RADIUS_FRACTION = 0.125 # Grid step on a ball is at most this fraction of its radius
LIMIT_SET_PADDING = float(os.getenv("LIMIT_SET_PADDING", "0.05")) # Extra radius around the sampled Delta limit set
W0_MAX_RADIUS = float(os.getenv("W0_MAX_RADIUS", "0.2")) # Cap on the balls around sampled limit-set clusters
W0_CLUSTER_RADIUS = float(os.getenv("W0_CLUSTER_RADIUS", "0.5")) # Sampled points closer than this share a ball of W0
W0_HYPERPLANE_STEPS = int(os.getenv("W0_HYPERPLANE_STEPS", "4")) # W0 balls keep this many grid steps away from gamma's repelling hyperplanes
PINGPONG_SAMPLE_RADIUS = int(os.getenv("PINGPONG_SAMPLE_RADIUS", "8")) # Delta ball radius for the limit-set sample
GAMMA_CANDIDATES_MAX = int(os.getenv("GAMMA_CANDIDATES_MAX", "12")) # Biproximal candidates tried before giving up
WORD_CHECK_MAX_SYLLABLES = int(os.getenv("WORD_CHECK_MAX_SYLLABLES", "12")) # Hard cap on alternating-word length
WORD_CHECK_DEFAULT_SYLLABLES = int(os.getenv("WORD_CHECK_DEFAULT_SYLLABLES", "8")) # Length used by verify
WORD_CHECK_BUDGET = int(os.getenv("WORD_CHECK_BUDGET", "500000")) # Max alternating words before giving up
WORD_CHECK_GAMMA_POWERS = int(os.getenv("WORD_CHECK_GAMMA_POWERS", "2")) # Powers (gamma^N)^k with 1 <= |k| <= this
WORD_CHECK_DELTA_RADIUS = int(os.getenv("WORD_CHECK_DELTA_RADIUS", "1")) # Delta syllables come from this ball

# ==============================================================================
# Runtime Configuration
# ==============================================================================
DEFAULT_JOBS = int(os.getenv("DEFAULT_JOBS", "4")) # Worker threads for sphere statistics and grid checks
PARALLEL_MIN_BATCH = 256 # Below this many items work stays on the calling thread
REGULUS_SEED = os.getenv("REGULUS_SEED") # Reserved; every default path is deterministic and ignores it
FLOAT_FORMAT = "{:.17g}" # 17 significant digits for every float written to disk

# ==============================================================================
# Logging Configuration
# ==============================================================================
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO").upper() # Root log level for the CLI
