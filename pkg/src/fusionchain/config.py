"""Configuration settings for fusionchain."""

# --- System Constants ---
LOG_FILE = "fusionchain.log"
VERSION = "1.0.0"

# --- Tolerances ---
STOCHASTIC_TOL = 1e-12
PIVOT_THRESHOLD = 1e-12
STATIONARY_TOL = 1e-10
SOLVER_AGREEMENT_TOL = 1e-8
BASELINE_AGREEMENT_TOL = 1e-9

# --- Limits ---
DEFAULT_MAX_STATES = 200_000
MONTE_CARLO_STEP_CAP = 10**7
MONTE_CARLO_SIGMA = 3.0

# --- Sweep Defaults ---
DEFAULT_PROBABILITIES = (0.5, 0.66, 0.75, 0.85)
DEFAULT_SWEEP_GRAPHS = 10
DEFAULT_MASTER_SEED = 0
BASELINE_STRATEGY = "baseline"

# --- Strategies ---
# Each strategy toggles the two optimizations applied before enumeration.
STRATEGY_CONFIG = {
    "s1": {
        "label": "Standard protocol",
        "minimize_edges": False,
        "optimize_order": False,
    },
    "s2": {
        "label": "Fusion order optimization",
        "minimize_edges": False,
        "optimize_order": True,
    },
    "s3": {
        "label": "Edge minimization",
        "minimize_edges": True,
        "optimize_order": False,
    },
    "s4": {
        "label": "Edge minimization and fusion order optimization",
        "minimize_edges": True,
        "optimize_order": True,
    },
}

# --- Fusion Types ---
# cluster_size: qubits per linear-cluster resource state.
# discard_below: surviving components smaller than this are rebuilt from scratch.
FUSION_TYPE_CONFIG = {
    "t1": {
        "label": "Type-I",
        "cluster_size": 2,
        "discard_below": 2,
    },
    "t2": {
        "label": "Type-II",
        "cluster_size": 3,
        "discard_below": 3,
    },
}
