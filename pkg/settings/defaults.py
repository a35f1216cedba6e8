"""
Default constants for the F-SLM simulator.

Defines the reference fiber, launch conditions, ensemble sizes and the
published reference slopes used for annotation.
"""

import math


TOOL_NAME = 'fslm-sim'
TOOL_VERSION = '0.1.0'

# Reference fiber: OM1 62.5/125 graded-index MMF at 1550 nm
REFERENCE_FIBER = {
    'core_radius_um': 31.25,
    'na': 0.275,
    'n1': 1.49,
    'wavelength_um': 1.55,
}

# Launch
DEFAULT_SMF_MFR_UM = 5.2
DEFAULT_OFFSET_UM = 15.0
DEFAULT_GROUP_RANGE = (3, 8)

# Quadrature for the offset-launch overlaps
QUADRATURE_HALF_WIDTH = 6.0   # in units of the mode scale s
QUADRATURE_POINTS = 1024      # per axis

# Model
DEFAULT_DELTA = math.pi / 2
DEFAULT_INPUT_FIELD = (1.0, 0.0)
DEFAULT_TARGET_SPECKLE = 1

# Optimizer
DEFAULT_TERMINATION_FRACTION = 0.01
DEFAULT_MAX_CYCLES = 50
DEFAULT_GRID_POINTS = 720
DEFAULT_REFINE_TOLERANCE = 1e-10

# Ensembles
DEFAULT_REALIZATIONS = 500
DEFAULT_BASELINE_SAMPLES = 120

# Reference slopes (enhancement per control element)
REFERENCE_PADDLE_SLOPE = 0.70
LCSLM_SLOPE = 0.39  # 0.5 * pi/4, phase-only macropixels

# Output file names
STATS_FILE = 'stats.csv'
STATS_JSON_FILE = 'stats.json'
SLOPES_FILE = 'slopes.csv'
RAW_FILE = 'raw.jsonl'
ABLATION_FILE = 'ablation.csv'
LCSLM_FILE = 'lcslm.csv'
MODES_FILE = 'modes.csv'
OFFSET_SCAN_FILE = 'offset_scan.csv'
MODEL_DUMP_FILE = 'realization_0.npz'
PLOT_FILE = 'enhancement.png'
MANIFEST_FILE = 'manifest.json'
