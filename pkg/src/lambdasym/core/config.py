import os

SAMPLES = 64
SEED = int(os.environ.get("LAMBDASYM_SEED", "0"))
TOLERANCE = 1e-10
DEFAULT_H = 0.1
INTERVAL = (0.0, 1.0)

# |k| above this aborts shift()
MAX_OFFSET = 16
MAX_REJECTIONS = 1000

MAX_DEGREE = 3
MAX_UNKNOWNS = 12
NEWTON_STARTS = 32
NEWTON_MAXITER = 100
DEDUP_DISTANCE = 1e-8
NEWTON_BOX = (-2.0, 2.0)
# larger polynomial systems skip the exact solver
EXACT_SOLVE_MAX_UNKNOWNS = 6
RATIONAL_MAX_DENOMINATOR = 10**6

DIVERGENCE_BOUND = 1e100
VERIFY_BOUND = 1e3
TRAJECTORY_TOLERANCE = 1e-12

FIT_MAX_DEGREE = 4
FIT_TOLERANCE = 1e-8

NUM_WORKERS_ENV = "LAMBDASYM_NUM_WORKERS"


def num_workers() -> int:
    return int(os.environ.get(NUM_WORKERS_ENV, "0"))
