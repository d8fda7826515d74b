"""Monte-Carlo cases under either hypothesis, scored through the error model.

Randomness is keyed by ``(seed, case_index)``: every case owns a Philox
stream and locus ``i`` of that case always consumes row ``i`` of a fixed
``(n_loci, 4)`` block of uniforms. Cases therefore come out the same whether
a study runs serially, in parallel, or only a subset of cases is redrawn.
"""

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import check_error_rate, check_probability
from .exceptions import UndefinedLRError
from .genotype_model import EvidencePair, GenotypeFrequencies, genotype_channel, hwe_genotype_freqs, lr_matrix, lr_profile

__all__ = [
    "HYPOTHESES",
    "SUMMARY_COLUMNS",
    "CASE_COLUMNS",
    "SimConfig",
    "CaseResult",
    "CellSummary",
    "case_rng",
    "simulate_genotype_pair",
    "simulate_genotypes",
    "simulate_case",
    "simulate_cell",
    "simulate_study",
    "summarize",
    "build_grid",
    "write_summary_csv",
    "write_cases_csv",
]

HYPOTHESES = ("Hp", "Hd")
SUMMARY_COLUMNS = (
    "hypothesis", "w_true", "w_analysis", "q", "n_loci", "n_cases", "seed",
    "min", "q1", "median", "q3", "max", "n_neg_infinity",
)
CASE_COLUMNS = ("hypothesis", "w_true", "w_analysis", "q", "n_loci", "seed", "case_index", "log10_lr")
_DRAWS_PER_LOCUS = 4


@dataclass(frozen=True)
class SimConfig:
    """One simulation cell. Give either ``q`` (HWE) or explicit ``freqs``."""

    hypothesis: str
    w_true: float
    n_loci: int
    n_cases: int
    seed: int
    q: Optional[float] = None
    freqs: Optional[GenotypeFrequencies] = None
    w_analysis: Optional[float] = None

    def __post_init__(self):
        if self.hypothesis not in HYPOTHESES:
            raise ValueError(f"hypothesis must be one of {HYPOTHESES}, got {self.hypothesis!r}")
        check_error_rate(self.w_true)
        if self.w_analysis is not None:
            check_error_rate(self.w_analysis)
        for name in ("n_loci", "n_cases"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)) or v < 1:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if (self.q is None) == (self.freqs is None):
            raise ValueError("give exactly one of q or freqs")
        if self.q is not None:
            check_probability(self.q, "q")
        elif not isinstance(self.freqs, GenotypeFrequencies):
            object.__setattr__(self, "freqs", GenotypeFrequencies(*self.freqs))

    @property
    def genotype_freqs(self):
        return self.freqs if self.freqs is not None else hwe_genotype_freqs(self.q)

    @property
    def analysis_w(self):
        return self.w_true if self.w_analysis is None else self.w_analysis


@dataclass(frozen=True)
class CaseResult:
    case_index: int
    log10_lr: float
    pairs: Optional[tuple] = None


@dataclass(frozen=True)
class CellSummary:
    config: SimConfig
    log10_lrs: np.ndarray
    min: float
    q1: float
    median: float
    q3: float
    max: float
    n_neg_infinity: int

    def row(self):
        c = self.config
        stats = [self.min, self.q1, self.median, self.q3, self.max]
        return [
            c.hypothesis, _fmt(c.w_true), _fmt(c.analysis_w), _fmt(c.q), str(c.n_loci), str(c.n_cases),
            str(c.seed), *(_fmt(v) for v in stats), str(self.n_neg_infinity),
        ]


def _fmt(v):
    # Shortest round-trip repr; blank for "not applicable".
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return repr(float(v))


def case_rng(seed, case_index):
    """Independent generator for one case of a cell."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(case_index),))
    return np.random.Generator(np.random.Philox(ss))


def _inverse_cdf(u, cum):
    # Smallest k with u < cum[..., k]; cum[..., 2] is 1 by construction.
    return (u[..., None] >= cum[..., :2]).sum(axis=-1)


def _draw(hypothesis, channel_cum, freq_cum, u):
    """Map a ``(n, 4)`` block of uniforms to donor and PoI genotypes."""
    if hypothesis == "Hp":
        z = _inverse_cdf(u[:, 0], freq_cum)
        x_donor = _inverse_cdf(u[:, 1], channel_cum[z])
        x_poi = _inverse_cdf(u[:, 2], channel_cum[z])
    else:
        z_donor = _inverse_cdf(u[:, 0], freq_cum)
        z_poi = _inverse_cdf(u[:, 1], freq_cum)
        x_donor = _inverse_cdf(u[:, 2], channel_cum[z_donor])
        x_poi = _inverse_cdf(u[:, 3], channel_cum[z_poi])
    return x_donor, x_poi


def _cums(freqs, w):
    channel_cum = np.cumsum(genotype_channel(w), axis=1)
    channel_cum[:, 2] = 1.0
    freq_cum = np.cumsum(freqs.as_tuple())
    freq_cum[2] = 1.0
    return channel_cum, freq_cum


def simulate_genotype_pair(hypothesis, w_true, freqs, rng):
    """Draw one evidence pair. Under Hp both observations share one latent
    genotype; under Hd each has its own."""
    if hypothesis not in HYPOTHESES:
        raise ValueError(f"hypothesis must be one of {HYPOTHESES}, got {hypothesis!r}")
    if not isinstance(freqs, GenotypeFrequencies):
        freqs = GenotypeFrequencies(*freqs)
    channel_cum, freq_cum = _cums(freqs, check_error_rate(w_true))
    x_donor, x_poi = _draw(hypothesis, channel_cum, freq_cum, rng.random((1, _DRAWS_PER_LOCUS)))
    return EvidencePair(int(x_donor[0]), int(x_poi[0]), freqs)


def simulate_genotypes(config, case_index):
    """Donor and PoI genotype arrays (length ``n_loci``) for one case."""
    channel_cum, freq_cum = _cums(config.genotype_freqs, config.w_true)
    u = case_rng(config.seed, case_index).random((config.n_loci, _DRAWS_PER_LOCUS))
    return _draw(config.hypothesis, channel_cum, freq_cum, u)


def simulate_case(config, case_index, keep_pairs=False):
    """Simulate and score one case with the analysis error rate."""
    x_donor, x_poi = simulate_genotypes(config, case_index)
    freqs = config.genotype_freqs
    pairs = tuple(EvidencePair(int(a), int(b), freqs) for a, b in zip(x_donor, x_poi))
    result = lr_profile(pairs, config.analysis_w)
    return CaseResult(case_index, result.log10_combined, pairs if keep_pairs else None)


def _log10_table(config):
    lrs = lr_matrix(config.genotype_freqs, config.analysis_w)
    # math.log10 on the same per-locus values lr_profile sees, so both paths agree bit for bit.
    return [[math.log10(v) if v > 0 else -math.inf for v in row] for row in lrs], np.isnan(lrs)


def simulate_cell(config):
    """All ``n_cases`` log10 LRs of one cell, in case order."""
    table, undefined = _log10_table(config)
    out = np.empty(config.n_cases)
    for i in range(config.n_cases):
        x_donor, x_poi = simulate_genotypes(config, i)
        if undefined[x_donor, x_poi].any():
            locus = int(np.flatnonzero(undefined[x_donor, x_poi])[0])
            raise UndefinedLRError(f"case {i}, locus {locus}: LR undefined", locus=locus)
        values = [table[a][b] for a, b in zip(x_donor.tolist(), x_poi.tolist())]
        out[i] = -math.inf if -math.inf in values else math.fsum(values)
    return out


def summarize(config, log10_lrs):
    """Five-number summary over finite values; -inf is only counted."""
    values = np.asarray(log10_lrs, dtype=float)
    finite = values[np.isfinite(values)]
    n_inf = int(np.count_nonzero(values == -math.inf))
    if finite.size:
        stats = [float(v) for v in np.quantile(finite, [0.0, 0.25, 0.5, 0.75, 1.0])]
    else:
        stats = [math.nan] * 5
    return CellSummary(config, values, *stats, n_inf)


def _run_cell(config):
    return summarize(config, simulate_cell(config))


def simulate_study(grid, n_jobs=1):
    """Summaries for every cell of ``grid`` in grid order.

    ``n_jobs > 1`` spreads cells over processes; results are identical.
    """
    grid = list(grid)
    if n_jobs > 1 and len(grid) > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            return list(pool.map(_run_cell, grid))
    return [_run_cell(c) for c in grid]


def build_grid(hypotheses, w_values, q_values, n_loci_values, n_cases, seed, w_analysis=None):
    """Cartesian product of the grid axes; every cell shares ``seed``."""
    return [
        SimConfig(h, w, n, n_cases, seed, q=q, w_analysis=w_analysis)
        for h in hypotheses
        for w in w_values
        for q in q_values
        for n in n_loci_values
    ]


def write_summary_csv(summaries, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for s in summaries:
        writer.writerow(s.row())


def write_cases_csv(summaries, stream):
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CASE_COLUMNS)
    for s in summaries:
        c = s.config
        for i, v in enumerate(s.log10_lrs):
            writer.writerow([c.hypothesis, _fmt(c.w_true), _fmt(c.analysis_w), _fmt(c.q), c.n_loci, c.seed, i, _fmt(v)])
