"""Small shared helpers."""

import math


def round_half_up(x: float) -> int:
    """Round to the nearest integer with ties going up (never banker's)."""
    return int(math.floor(x + 0.5))


def clamp(x, lo, hi):
    return max(lo, min(hi, x))
