import math
import os
from dotenv import load_dotenv

load_dotenv()

LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")

# Environment overrides for any RunConfig key: SPINNOISE_<SECTION>__<KEY>
ENV_PREFIX = "SPINNOISE_"
ENV_NESTED_DELIMITER = "__"

# ⁸⁷Rb ground state, 7 Hz/nT
RB87_GYROMAGNETIC_RATIO = 2 * math.pi * 7e9

DEFAULT_DC_TILT = math.pi / 4
STEPS_PER_LARMOR_PERIOD = 128
MAX_PHASE_STEP = 0.05
BURN_IN_RELAXATION_TIMES = 5.0
SMALL_ANGLE_LIMIT = 0.1
SOFT_BOUND_SIGMAS = 6.0

# Stop-band attenuation of the lock-in anti-alias filter (dB)
LOCKIN_ATTENUATION_DB = 60.0

MIN_FIT_BINS = 50
MIN_FIT_SEGMENTS = 8
MIN_RECOMMENDED_BOOTSTRAP = 100
MAX_FAILED_BOOTSTRAP_FRACTION = 0.2

CSV_FLOAT_FORMAT = "%.17g"
MANIFEST_FILE_NAME = "manifest.json"
RUN_INFO_FILE_NAME = "run_info.json"
CONFIG_ECHO_FILE_NAME = "config.yaml"
