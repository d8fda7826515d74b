"""Estimating the calling error probability from replicate confusion tables.

Replicate typings of the same source are tallied in a 3x3 table. The
diagonal, corner and off-diagonal sums follow a trinomial law whose three
probabilities are functions of ``w`` alone (see
:func:`snplr.genotype_model.category_probs`).
"""

import io
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
from scipy.optimize import minimize_scalar
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_confusion_counts, check_probability
from .exceptions import NoDataError, ParseError

__all__ = [
    "ConfusionTable",
    "CategoryCounts",
    "WEstimate",
    "categorize",
    "log_likelihood",
    "estimate_mle",
    "estimate_posterior_mean",
    "aggregate_tables",
    "read_confusion_table",
    "ErrorRateEstimator",
]

_CORNER_CELLS = ((0, 2), (2, 0))
_W_MAX = math.nextafter(0.5, 0.0)

# Posterior quadrature: integrate where the log-likelihood is within
# _SUPPORT_DROP nats of its maximum; the rest carries < e^-60 relative mass.
_SUPPORT_DROP = 60.0
_GL_ORDER = 16
_BASE_PANELS = 256


class CategoryCounts(NamedTuple):
    n_diagonal: int
    n_corner: int
    n_offdiagonal: int

    @property
    def total(self):
        return self.n_diagonal + self.n_corner + self.n_offdiagonal


@dataclass(frozen=True, eq=False)
class ConfusionTable:
    """3x3 counts of paired calls; rows are sample A (0/0, 0/1, 1/1), columns sample B."""

    counts: np.ndarray

    def __post_init__(self):
        arr = check_confusion_counts(self.counts)
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)

    @classmethod
    def zeros(cls):
        return cls(np.zeros((3, 3), dtype=np.int64))

    @property
    def total(self):
        return int(self.counts.sum())

    def transpose(self):
        return ConfusionTable(self.counts.T.copy())

    def categorize(self):
        return categorize(self)

    def __eq__(self, other):
        if not isinstance(other, ConfusionTable):
            return NotImplemented
        return bool(np.array_equal(self.counts, other.counts))

    def __hash__(self):
        return hash(self.counts.tobytes())

    def to_tsv(self):
        return "".join("\t".join(str(int(v)) for v in row) + "\n" for row in self.counts)


@dataclass(frozen=True)
class WEstimate:
    w_hat: float
    method: str
    interval: Optional[Tuple[float, float]] = None


def _as_table(t):
    return t if isinstance(t, ConfusionTable) else ConfusionTable(t)


def categorize(table):
    """Collapse a confusion table into (diagonal, corner, off-diagonal) sums."""
    c = _as_table(table).counts
    diag = int(np.trace(c))
    corner = int(sum(c[i, j] for i, j in _CORNER_CELLS))
    return CategoryCounts(diag, corner, int(c.sum()) - diag - corner)


def _as_counts(c):
    if isinstance(c, CategoryCounts):
        counts = c
    elif isinstance(c, ConfusionTable) or np.shape(c) == (3, 3):
        counts = categorize(c)
    else:
        counts = CategoryCounts(*(int(v) for v in c))
    if min(counts) < 0:
        raise ValueError(f"category counts must be non-negative, got {tuple(counts)}")
    return counts


def _loglik(w, counts):
    """Vectorised log-likelihood for w in [0, 0.5]; no argument checking."""
    w = np.asarray(w, dtype=float)
    a = 1.0 - w
    corner = 2.0 * w**2 * a**2
    off = 4.0 * w * a * (w**2 + a**2)
    # log1p of the complement keeps ln P(diagonal) accurate for tiny w.
    diag_log = np.log1p(-(corner + off))
    n_d, n_c, n_o = counts
    with np.errstate(divide="ignore"):
        out = n_d * diag_log
        if n_c:
            out = out + n_c * np.log(corner)
        if n_o:
            out = out + n_o * np.log(off)
    return out


def log_likelihood(w, counts):
    """Trinomial log-likelihood of ``w`` given category counts.

    The multinomial coefficient is omitted since it does not depend on ``w``.
    The model is symmetric under ``w -> 1 - w`` so any ``w`` in [0, 1] is
    accepted. Returns ``-inf`` at ``w = 0`` when any count falls off the
    diagonal.
    """
    w = check_probability(w, "w")
    counts = _as_counts(counts)
    return float(_loglik(min(w, 1.0 - w), counts))


def estimate_mle(counts, xatol=1e-10):
    """Maximum-likelihood estimate of ``w`` on [0, 0.5).

    Returns exactly 0 when every observation is on the diagonal; otherwise
    runs bounded Brent (golden-section with parabolic steps).
    """
    counts = _as_counts(counts)
    if counts.total == 0:
        raise NoDataError("cannot estimate w from an empty table")
    if counts.n_corner == 0 and counts.n_offdiagonal == 0:
        return WEstimate(0.0, "mle")
    res = minimize_scalar(
        lambda w: -float(_loglik(w, counts)),
        bounds=(0.0, 0.5),
        method="bounded",
        options={"xatol": xatol, "maxiter": 10_000},
    )
    return WEstimate(min(float(res.x), _W_MAX), "mle")


def _level_crossing(f, inside, outside, level, iterations=200):
    """Bisect between ``inside`` (f >= level) and ``outside`` (f < level).

    Returns the point on the outside of the final bracket, so the support is
    never under-estimated. Works for either ordering of the two points.
    """
    for _ in range(iterations):
        mid = 0.5 * (inside + outside)
        if mid in (inside, outside):
            break
        if f(mid) >= level:
            inside = mid
        else:
            outside = mid
    return outside


def _posterior_grid(counts, resolution):
    """Gauss-Legendre nodes and weights covering the posterior's effective support."""
    mode = estimate_mle(counts).w_hat
    lmax = float(_loglik(mode, counts))
    level = lmax - _SUPPORT_DROP
    f = lambda w: float(_loglik(w, counts))  # noqa: E731

    lo = 0.0 if f(0.0) >= level else _level_crossing(f, mode, 0.0, level)
    hi = 0.5 if f(0.5) >= level else _level_crossing(f, mode, 0.5, level)

    n_panels = _BASE_PANELS * resolution
    edges = np.linspace(lo, hi, n_panels + 1)
    x, wts = np.polynomial.legendre.leggauss(_GL_ORDER)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = mid[:, None] + half[:, None] * x[None, :]
    weights = half[:, None] * wts[None, :]
    dens = np.exp(_loglik(nodes, counts) - lmax)
    return edges, nodes, weights, dens, lmax


def _panel_cdf_solve(edges, masses, target, counts, lmax):
    """Posterior quantile: find the panel, then bisect on a partial GL integral."""
    cum = np.cumsum(masses)
    k = int(np.searchsorted(cum, target))
    k = min(k, len(masses) - 1)
    before = cum[k - 1] if k > 0 else 0.0
    a, b = edges[k], edges[k + 1]
    x, wts = np.polynomial.legendre.leggauss(_GL_ORDER)

    def partial(u):
        h = 0.5 * (u - a)
        nodes = a + h + h * x
        return before + h * float(np.dot(wts, np.exp(_loglik(nodes, counts) - lmax)))

    lo, hi = a, b
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if partial(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def estimate_posterior_mean(counts, resolution=1, credible_level=None):
    """Posterior mean of ``w`` under a uniform prior on (0, 0.5).

    The integrand is exp(loglik - max loglik), integrated by composite
    Gauss-Legendre on the interval where the log-likelihood lies within 60
    nats of its maximum. ``resolution`` multiplies the panel count.
    ``credible_level`` (e.g. 0.95) adds an equal-tailed interval.
    """
    counts = _as_counts(counts)
    if counts.total == 0:
        raise NoDataError("cannot estimate w from an empty table")
    if int(resolution) < 1:
        raise ValueError("resolution must be a positive integer")
    edges, nodes, weights, dens, lmax = _posterior_grid(counts, int(resolution))
    masses = (weights * dens).sum(axis=1)
    z = masses.sum()
    mean = float((weights * dens * nodes).sum() / z)
    interval = None
    if credible_level is not None:
        if not (0.0 < credible_level < 1.0):
            raise ValueError("credible_level must lie in (0, 1)")
        tail = 0.5 * (1.0 - credible_level)
        interval = (
            _panel_cdf_solve(edges, masses, tail * z, counts, lmax),
            _panel_cdf_solve(edges, masses, (1.0 - tail) * z, counts, lmax),
        )
    return WEstimate(mean, "posterior_mean", interval)


def aggregate_tables(tables):
    """Cell-wise sum of several confusion tables."""
    tables = [_as_table(t) for t in tables]
    if not tables:
        raise ValueError("aggregate_tables needs at least one table")
    return ConfusionTable(sum(t.counts for t in tables))


def read_confusion_table(stream, source=None):
    """Parse three lines of three tab-separated integers. ``#`` lines are comments."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    rows = []
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(f"expected 3 tab-separated counts, got {len(fields)}", lineno, source)
        try:
            row = [int(v) for v in fields]
        except ValueError:
            raise ParseError(f"non-integer count in {line!r}", lineno, source) from None
        if any(v < 0 for v in row):
            raise ParseError("counts must be non-negative", lineno, source)
        rows.append(row)
        if len(rows) > 3:
            raise ParseError("more than three rows", lineno, source)
    if len(rows) != 3:
        raise ParseError(f"expected 3 rows, got {len(rows)}", None, source)
    return ConfusionTable(np.array(rows, dtype=np.int64))


class ErrorRateEstimator(BaseEstimator):
    """Estimate the calling error probability from replicate confusion tables.

    Parameters
    ----------
    method : {"bayes", "mle"}
        Which estimate is exposed as ``w_``. Both are always computed.
    credible_level : float or None
        Level of the equal-tailed posterior interval stored in ``interval_``.
    resolution : int
        Quadrature refinement factor for the posterior mean.

    ``fit`` accepts a single table (3x3 array-like or :class:`ConfusionTable`)
    or a list of tables, which are summed cell-wise first.
    """

    def __init__(self, method="bayes", credible_level=0.95, resolution=1):
        self.method = method
        self.credible_level = credible_level
        self.resolution = resolution

    def fit(self, X, y=None):
        if self.method not in ("bayes", "mle"):
            raise ValueError(f"method must be 'bayes' or 'mle', got {self.method!r}")
        if isinstance(X, ConfusionTable) or np.shape(X) == (3, 3):
            table = _as_table(X)
        else:
            table = aggregate_tables(X)
        self.table_ = table
        self.counts_ = categorize(table)
        self.w_mle_ = estimate_mle(self.counts_).w_hat
        post = estimate_posterior_mean(self.counts_, self.resolution, self.credible_level)
        self.w_posterior_mean_ = post.w_hat
        self.interval_ = post.interval
        self.w_ = self.w_posterior_mean_ if self.method == "bayes" else self.w_mle_
        return self

    def score(self, X, y=None):
        """Log-likelihood of the fitted ``w_`` on another table."""
        check_is_fitted(self, "w_")
        return log_likelihood(self.w_, _as_counts(X))
