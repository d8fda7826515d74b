"""Likelihood ratios for SNP genotypes from shotgun sequencing, allowing for
genotype-calling errors through a single per-allele error rate."""

from .calls import FILTERS, CallFilter, FilterSpec, SiteCall, apply_filter, pair_samples, read_calls
from .estimation import (
    ConfusionTable,
    ErrorRateEstimator,
    aggregate_tables,
    categorize,
    estimate_mle,
    estimate_posterior_mean,
)
from .exceptions import DuplicateSiteError, NoDataError, ParseError, SnplrError, UndefinedLRError
from .genotype_model import (
    EvidencePair,
    GenotypeFrequencies,
    LrResult,
    category_probs,
    hwe_genotype_freqs,
    lr_profile,
    lr_single,
)
from .markers import MarkerSelector, min_lr_profile, select_markers
from .simulation import SimConfig, simulate_case, simulate_study

__version__ = "0.1.0"

__all__ = [
    "FILTERS",
    "CallFilter",
    "FilterSpec",
    "SiteCall",
    "apply_filter",
    "pair_samples",
    "read_calls",
    "ConfusionTable",
    "ErrorRateEstimator",
    "aggregate_tables",
    "categorize",
    "estimate_mle",
    "estimate_posterior_mean",
    "DuplicateSiteError",
    "NoDataError",
    "ParseError",
    "SnplrError",
    "UndefinedLRError",
    "EvidencePair",
    "GenotypeFrequencies",
    "LrResult",
    "category_probs",
    "hwe_genotype_freqs",
    "lr_profile",
    "lr_single",
    "MarkerSelector",
    "min_lr_profile",
    "select_markers",
    "SimConfig",
    "simulate_case",
    "simulate_study",
]
