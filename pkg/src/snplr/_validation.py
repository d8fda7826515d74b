"""Input validation helpers shared by the estimators and the functional API."""

import math
import numbers

import numpy as np

GENOTYPES = (0, 1, 2)
_SUM_TOL = 1e-12


def check_probability(value, name="probability"):
    """Return ``value`` as float, raising ``ValueError`` outside [0, 1]."""
    if isinstance(value, bool) or not isinstance(value, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    value = float(value)
    if not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return value


def check_error_rate(w):
    """Validate a calling error probability; the model is restricted to [0, 0.5)."""
    if isinstance(w, bool) or not isinstance(w, numbers.Real):
        raise TypeError(f"error rate must be a real number, got {type(w).__name__}")
    w = float(w)
    if math.isnan(w) or not (0.0 <= w < 0.5):
        raise ValueError(f"error rate w must satisfy 0 <= w < 0.5, got {w!r}")
    return w


def check_genotype(g, name="genotype"):
    """Validate an alternative-allele count and return it as ``int``."""
    if isinstance(g, bool) or not isinstance(g, numbers.Integral):
        raise TypeError(f"{name} must be an integer in {{0, 1, 2}}, got {g!r}")
    g = int(g)
    if g not in GENOTYPES:
        raise ValueError(f"{name} must be 0, 1 or 2, got {g!r}")
    return g


def check_frequency_vector(p, name="genotype frequencies"):
    """Return ``p`` as a float triple summing to one within 1e-12."""
    p = tuple(float(v) for v in p)
    if len(p) != 3:
        raise ValueError(f"{name} must have exactly three entries, got {len(p)}")
    for v in p:
        if math.isnan(v) or not (0.0 <= v <= 1.0):
            raise ValueError(f"{name} entries must lie in [0, 1], got {p!r}")
    if abs(sum(p) - 1.0) > _SUM_TOL:
        raise ValueError(f"{name} must sum to 1, got sum {sum(p)!r}")
    return p


def check_confusion_counts(counts):
    """Validate a 3x3 table of non-negative integer counts; returns an int64 array."""
    arr = np.asarray(counts)
    if arr.shape != (3, 3):
        raise ValueError(f"confusion table must be 3x3, got shape {arr.shape}")
    if arr.dtype.kind == "f":
        if not np.all(np.isfinite(arr)) or not np.all(arr == np.round(arr)):
            raise ValueError("confusion table entries must be integers")
    elif arr.dtype.kind not in "iu":
        raise TypeError(f"confusion table must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.int64)
    if np.any(arr < 0):
        raise ValueError("confusion table entries must be non-negative")
    return arr
