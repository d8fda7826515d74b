"""Per-site genotype calls: parsing, quality filtering and replicate pairing.

Call files are UTF-8 TSV with the header::

    segment_id  chrom  pos  ref  alt  gt  dp  gq  ad_ref  ad_alt

``gt`` is the alternative-allele count (0, 1, 2) or ``./.`` for no call.
``alt`` is ``.`` at homozygous-reference sites without an observed
alternative allele. Lines starting with ``#`` are comments.
"""

import io
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .estimation import ConfusionTable
from .exceptions import DuplicateSiteError, ParseError

logger = logging.getLogger(__name__)

__all__ = [
    "CALL_HEADER",
    "FILTERS",
    "SiteCall",
    "FilterSpec",
    "FilterOutcome",
    "ParsedCalls",
    "PairedSites",
    "parse_calls",
    "read_calls",
    "write_calls",
    "format_call",
    "allele_balance",
    "allele_balance_deviation",
    "apply_filter",
    "alleles_compatible",
    "index_calls",
    "pair_samples",
    "CallFilter",
]

CALL_HEADER = ("segment_id", "chrom", "pos", "ref", "alt", "gt", "dp", "gq", "ad_ref", "ad_alt")
HEADER_LINE = "\t".join(CALL_HEADER)
MISSING_GT = "./."
NUCLEOTIDES = frozenset("ACGTN")
# Inclusive thresholds; absorbs rounding in e.g. 0.5 - 0.2.
_ABD_SLACK = 1e-12


@dataclass(frozen=True)
class SiteCall:
    segment_id: str
    chrom: str
    pos: int
    ref: str
    alt: str
    genotype: Optional[int]
    dp: int
    gq: int
    ad_ref: int
    ad_alt: int

    @property
    def key(self):
        return (self.segment_id, self.chrom, self.pos)

    @property
    def is_missing(self):
        return self.genotype is None

    @property
    def depth_inconsistent(self):
        """Allele depths exceed DP. Flagged only; callers emit this routinely."""
        return self.ad_ref + self.ad_alt > self.dp


@dataclass(frozen=True)
class FilterSpec:
    name: str
    max_abd: float
    min_dp: int
    min_gq: int

    def __post_init__(self):
        if not (0.0 <= self.max_abd <= 0.5):
            raise ValueError(f"max_abd must lie in [0, 0.5], got {self.max_abd!r}")
        if self.min_dp < 0 or self.min_gq < 0:
            raise ValueError("min_dp and min_gq must be non-negative")

    @classmethod
    def parse(cls, text):
        """``none``, ``loose``, ``strict`` or ``custom:ABD,DP,GQ``."""
        if text in FILTERS:
            return FILTERS[text]
        if text.startswith("custom:"):
            parts = text[len("custom:"):].split(",")
            if len(parts) != 3:
                raise ValueError(f"custom filter needs ABD,DP,GQ, got {text!r}")
            try:
                abd, dp, gq = float(parts[0]), int(parts[1]), int(parts[2])
            except ValueError:
                raise ValueError(f"cannot parse custom filter {text!r}") from None
            return cls(text, abd, dp, gq)
        raise ValueError(f"unknown filter {text!r}; expected none, loose, strict or custom:ABD,DP,GQ")

    def __str__(self):
        return self.name


FILTERS = {
    "none": FilterSpec("none", 0.5, 0, 0),
    "loose": FilterSpec("loose", 0.3, 6, 10),
    "strict": FilterSpec("strict", 0.1, 10, 20),
}


class FilterOutcome(NamedTuple):
    passed: bool
    reason: Optional[str] = None

    def __bool__(self):
        return self.passed


class ParsedCalls(list):
    """List of :class:`SiteCall` that also records skipped malformed lines."""

    def __init__(self, calls=(), skipped=()):
        super().__init__(calls)
        self.skipped = list(skipped)

    @property
    def n_skipped(self):
        return len(self.skipped)


def _parse_int(text, field):
    try:
        value = int(text)
    except ValueError:
        raise ValueError(f"{field} must be an integer, got {text!r}") from None
    if value < 0:
        raise ValueError(f"{field} must be non-negative, got {value}")
    return value


def _parse_line(fields):
    if len(fields) != len(CALL_HEADER):
        raise ValueError(f"expected {len(CALL_HEADER)} fields, got {len(fields)}")
    segment_id, chrom, pos, ref, alt, gt, dp, gq, ad_ref, ad_alt = fields
    if not segment_id or not chrom:
        raise ValueError("segment_id and chrom must be non-empty")
    pos = _parse_int(pos, "pos")
    if pos < 1:
        raise ValueError("pos is 1-based and must be >= 1")
    if ref not in NUCLEOTIDES:
        raise ValueError(f"ref must be a single nucleotide, got {ref!r}")
    if alt != "." and alt not in NUCLEOTIDES:
        raise ValueError(f"alt must be a single nucleotide or '.', got {alt!r}")
    if gt == MISSING_GT:
        genotype = None
    elif gt in ("0", "1", "2"):
        genotype = int(gt)
        if genotype > 0 and alt == ".":
            raise ValueError(f"genotype {gt} requires an alternative allele")
    else:
        raise ValueError(f"gt must be 0, 1, 2 or ./., got {gt!r}")
    return SiteCall(
        segment_id, chrom, pos, ref, alt, genotype,
        _parse_int(dp, "dp"), _parse_int(gq, "gq"),
        _parse_int(ad_ref, "ad_ref"), _parse_int(ad_alt, "ad_alt"),
    )


def parse_calls(stream, strict=True, source=None):
    """Read a call file into a :class:`ParsedCalls` list, preserving input order.

    With ``strict=False`` malformed data lines are skipped and recorded in
    ``.skipped`` as ``(line number, message)``; a bad header always raises.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    calls = ParsedCalls()
    header_seen = False
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if not header_seen:
            if tuple(fields) != CALL_HEADER:
                raise ParseError(f"bad header, expected {HEADER_LINE!r}", lineno, source)
            header_seen = True
            continue
        try:
            calls.append(_parse_line(fields))
        except ValueError as exc:
            if strict:
                raise ParseError(str(exc), lineno, source) from None
            calls.skipped.append((lineno, str(exc)))
    if not header_seen:
        raise ParseError("missing header line", None, source)
    if calls.skipped:
        logger.warning("%s: skipped %d malformed line(s)", source or "<calls>", len(calls.skipped))
    return calls


def read_calls(path, strict=True):
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_calls(fh, strict=strict, source=str(path))


def format_call(call):
    gt = MISSING_GT if call.genotype is None else str(call.genotype)
    return "\t".join(
        [call.segment_id, call.chrom, str(call.pos), call.ref, call.alt, gt,
         str(call.dp), str(call.gq), str(call.ad_ref), str(call.ad_alt)]
    )


def write_calls(calls, stream):
    stream.write(HEADER_LINE + "\n")
    for call in calls:
        stream.write(format_call(call) + "\n")


def allele_balance(ad_ref, ad_alt):
    """Read fraction of the less-supported allele, in [0, 0.5]."""
    total = ad_ref + ad_alt
    if ad_ref < 0 or ad_alt < 0:
        raise ValueError("allele depths must be non-negative")
    if total == 0:
        raise ValueError("allele balance is undefined without covering reads")
    return min(ad_ref, ad_alt) / total


def allele_balance_deviation(genotype, ab):
    """Deviation from the ideal balance: 0 for homozygotes, 0.5 for heterozygotes."""
    if not (0.0 <= ab <= 0.5):
        raise ValueError(f"allele balance must lie in [0, 0.5], got {ab!r}")
    if genotype == 1:
        return 0.5 - ab
    if genotype in (0, 2):
        return ab
    raise ValueError(f"genotype must be 0, 1 or 2, got {genotype!r}")


def apply_filter(call, spec):
    """Check a call against a filter; failures name the first violated criterion."""
    if call.genotype is None:
        return FilterOutcome(False, "missing")
    if call.ad_ref + call.ad_alt == 0:
        return FilterOutcome(False, "allele_balance")
    abd = allele_balance_deviation(call.genotype, allele_balance(call.ad_ref, call.ad_alt))
    if abd > spec.max_abd + _ABD_SLACK:
        return FilterOutcome(False, "allele_balance")
    if call.dp < spec.min_dp:
        return FilterOutcome(False, "depth")
    if call.gq < spec.min_gq:
        return FilterOutcome(False, "genotype_quality")
    return FilterOutcome(True)


def alleles_compatible(call_a, call_b):
    """Same reference base and no conflicting alternative alleles ('.' is unobserved)."""
    if call_a.ref != call_b.ref:
        return False
    return call_a.alt == "." or call_b.alt == "." or call_a.alt == call_b.alt


@dataclass(frozen=True)
class PairedSites:
    confusion: ConfusionTable
    shared_sites: tuple
    n_excluded_missing: int
    n_excluded_filter: int
    n_excluded_alleles: int

    @property
    def n_considered(self):
        return len(self.shared_sites) + self.n_excluded_missing + self.n_excluded_filter + self.n_excluded_alleles

    def exclusion_report(self):
        return {
            "n_shared": len(self.shared_sites),
            "n_excluded_missing": self.n_excluded_missing,
            "n_excluded_filter": self.n_excluded_filter,
            "n_excluded_alleles": self.n_excluded_alleles,
            "n_considered": self.n_considered,
        }


def index_calls(calls):
    """Map site key to call, rejecting duplicate sites."""
    out = {}
    for call in calls:
        if call.key in out:
            seg, chrom, pos = call.key
            raise DuplicateSiteError(f"duplicate site {seg} {chrom}:{pos}")
        out[call.key] = call
    return out


def pair_samples(calls_a, calls_b, spec):
    """Tally two replicate call sets into a confusion table.

    Every site present in either sample is considered exactly once. A site is
    excluded as missing (absent or no-call in either sample), then as
    filtered (fails ``spec`` in either sample), then for inconsistent alleles.
    Rows of the table are sample A.
    """
    index_a, index_b = index_calls(calls_a), index_calls(calls_b)
    counts = np.zeros((3, 3), dtype=np.int64)
    shared = []
    n_missing = n_filter = n_alleles = 0
    for key in sorted(index_a.keys() | index_b.keys()):
        a, b = index_a.get(key), index_b.get(key)
        if a is None or b is None or a.is_missing or b.is_missing:
            n_missing += 1
        elif not (apply_filter(a, spec) and apply_filter(b, spec)):
            n_filter += 1
        elif not alleles_compatible(a, b):
            n_alleles += 1
        else:
            counts[a.genotype, b.genotype] += 1
            shared.append((key[0], key[2], a.genotype, b.genotype))
    return PairedSites(ConfusionTable(counts), tuple(shared), n_missing, n_filter, n_alleles)


class CallFilter(BaseEstimator, TransformerMixin):
    """Keep calls passing allele-balance, depth and genotype-quality thresholds."""

    def __init__(self, max_abd=0.5, min_dp=0, min_gq=0):
        self.max_abd = max_abd
        self.min_dp = min_dp
        self.min_gq = min_gq

    @classmethod
    def from_spec(cls, spec):
        if isinstance(spec, str):
            spec = FilterSpec.parse(spec)
        return cls(spec.max_abd, spec.min_dp, spec.min_gq)

    def to_spec(self):
        return FilterSpec("custom:%r,%d,%d" % (self.max_abd, self.min_dp, self.min_gq),
                          self.max_abd, self.min_dp, self.min_gq)

    def fit(self, X=None, y=None):
        self.to_spec()
        return self

    def transform(self, X):
        spec = self.to_spec()
        return [call for call in X if apply_filter(call, spec)]
