"""
Unit conversions shared by the channel, beamforming and doa modules.
All powers are entered in dBm and converted here exactly once.
"""

import numpy as np

SPEED_OF_LIGHT = 2.99792458e8  # m/s


def dbm_to_mw(dbm: float) -> float:
    """Convert dBm to linear milliwatts (20 dBm -> 100 mW, -inf dBm -> 0)."""
    if dbm == -np.inf:
        return 0.0
    return float(10.0 ** (dbm / 10.0))


def mw_to_dbm(mw: float) -> float:
    """Convert linear milliwatts to dBm."""
    if mw <= 0:
        return -np.inf
    return float(10.0 * np.log10(mw))

