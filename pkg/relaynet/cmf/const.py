"""
Contains the defaults and experiment presets shared by the library and the
command line front end.
"""
from importlib.resources import files  # type: ignore
from math import sqrt

DATA_PATH = str(files("relaynet.cmf") / "data")
DEFAULT_CONFIG_PATH = "/etc/cmf-relay/cmf.ini"

# -- analysis
TARGET_RATE = 0.5
QUAD_EPSABS = 1e-5
TAIL_MASS = 1e-12
COMPOSITION_CAP = 1_000_000
# a candidate selected with probability below this is reported as degenerate
DEGENERATE_PROB = 1e-12

# -- ecv search
TABLE_CAP = 2200.0
GMIN_DIRECTIONS = 2048
GMIN_REFINE_ROUNDS = 8
GMIN_REFINE_POINTS = 65
GMIN_RTOL = 1e-9
HERMITE_CONSTANT = 2 / sqrt(3)
# the simulator sizes its table to leave at most this much fading mass
# outside the Lemma 4 coverage
TABLE_TAIL_MASS = 1e-9

# -- simulation
TRIALS = 1_000_000
SEED = 2023
BLOCK_SIZE = 8192
WORKERS = 1
CEE_VARIANCES = (0.0, 0.01, 0.05, 0.1)

# -- output
CSV_DIGITS = 6

SNR_GRID = (0.0, 20.0, 2.0)

PRESETS = {
    "table1": {
        "command": "gmin-table",
    },
    "fig2": {
        "command": "selection-prob",
        "relays": [2],
        "ks": [3, 5],
        "optimal": True,
    },
    "fig3": {
        "command": "outage",
        "relays": [2, 6],
        "ks": [3, 5],
        "optimal": True,
    },
    "fig4": {
        "command": "outage",
        "relays": [2, 6],
        "ks": [3, 5],
        "optimal": True,
    },
    "fig5": {
        "command": "outage",
        "relays": [6],
        "ks": [5],
        "optimal": True,
    },
    "fig6": {
        "command": "cee",
        "relays": [6],
        "ks": [5],
        "optimal": True,
        "cee_vars": list(CEE_VARIANCES),
    },
}
