# =======================================================================
# Project:      SeqPack Solver
# File:         Application-wide constants
# =======================================================================

"""
Constants used throughout the application to avoid magic numbers and strings.
"""

# Benchmark plate (mm) and cuboid protocol
PLATE_WIDTH = 250
PLATE_HEIGHT = 210
CUBOID_MIN_DIM = 8
CUBOID_MAX_DIM = 64
PROTOCOL_K_MAX = 32
PROTOCOL_REPEATS = 10
DESK_K_MAX = 16

# Synthetic complex polygons
COMPLEX_VERTEX_RANGE = (5, 12)
COMPLEX_MIN_DIAMETER = 8
COMPLEX_MAX_DIAMETER = 64
COORDINATE_GRID = 4  # generated coordinates are multiples of 1/4 mm

# CLI exit codes
EXIT_SAT = 0
EXIT_UNSAT = 1
EXIT_TIMEOUT = 2
EXIT_INPUT_ERROR = 3
EXIT_SOLVER_ERROR = 4
EXIT_VERIFY_FAILED = 5

# Bench CSV
CSV_COLUMNS = ["instance_id", "k", "mode", "status", "wall_ms", "refinement_rounds", "sigma_star"]

# SMT-LIB
SMT_LOGIC = "QF_LRA"
