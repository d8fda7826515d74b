"""Choosing one SNP per independent segment from a trace sample's calls.

Selection only ever sees the trace sample: none of the functions here take
the person of interest's genotypes, so the chosen loci cannot depend on
them. The LR is computed afterwards from the selected loci.

Candidate file (TSV)::

    segment_id  chrom  pos  rs  orientation  [ref  alt]  af_AFR  af_EAS  af_NFE ...

``orientation`` is ``alt`` or ``ref`` and states which allele the ``af_*``
columns describe; frequencies are stored internally as alternative-allele
frequencies. Population columns are any columns prefixed ``af_``. The
optional ``ref``/``alt`` columns enable an allele-consistency check against
the trace calls.

Segment file (TSV)::

    segment_id  chrom  start  end
"""

import io
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .calls import FILTERS, FilterSpec, apply_filter
from .exceptions import DuplicateSiteError, ParseError, UndefinedLRError
from .genotype_model import EvidencePair, LrResult, hwe_genotype_freqs, lr_single

__all__ = [
    "CandidateMarker",
    "SegmentSpec",
    "SelectionResult",
    "load_candidates",
    "load_segments",
    "read_candidates",
    "read_segments",
    "load_demo_candidates",
    "load_demo_segments",
    "filter_by_afd",
    "score_marker",
    "rank_key",
    "select_markers",
    "evidence_for",
    "min_lr_profile",
    "MarkerSelector",
]

AFD_PRESETS = (0.1, 0.15, 0.2)
_REQUIRED = ("segment_id", "chrom", "pos", "rs", "orientation")
_SEGMENT_HEADER = ("segment_id", "chrom", "start", "end")
_AFD_SLACK = 1e-12
_SCORE_DECIMALS = 12


@dataclass(frozen=True)
class CandidateMarker:
    segment_id: str
    chrom: str
    pos: int
    rs: str
    # (population, alternative-allele frequency) pairs in file column order.
    alt_freqs: tuple
    ref: Optional[str] = None
    alt: Optional[str] = None

    def __post_init__(self):
        if not self.rs:
            raise ValueError("candidate markers need a non-empty rs label")
        freqs = tuple((str(p), float(f)) for p, f in dict(self.alt_freqs).items())
        for pop, f in freqs:
            if not (0.0 <= f <= 1.0):
                raise ValueError(f"allele frequency for {pop} outside [0, 1]: {f!r}")
        object.__setattr__(self, "alt_freqs", freqs)

    @property
    def populations(self):
        return tuple(p for p, _ in self.alt_freqs)

    def alt_freq(self, population):
        try:
            return dict(self.alt_freqs)[population]
        except KeyError:
            raise KeyError(f"{self.rs} has no frequency for population {population!r}") from None

    def ref_freq(self, population):
        return 1.0 - self.alt_freq(population)

    def maf(self, population):
        f = self.alt_freq(population)
        return min(f, 1.0 - f)


@dataclass(frozen=True)
class SegmentSpec:
    segment_id: str
    chrom: str
    start: int
    end: int

    def __post_init__(self):
        if self.start < 1 or self.end < self.start:
            raise ValueError(f"invalid segment bounds {self.start}-{self.end}")

    @property
    def length(self):
        return self.end - self.start + 1

    def contains(self, chrom, pos):
        return chrom == self.chrom and self.start <= pos <= self.end


@dataclass(frozen=True)
class SelectionResult:
    chosen: dict
    ranked: dict
    skipped: tuple
    afd_threshold: Optional[float]
    filter: FilterSpec
    populations: tuple = field(default=())

    @property
    def n_selected(self):
        return len(self.chosen)

    def to_dict(self):
        def marker(c):
            return {
                "segment_id": c.segment_id, "chrom": c.chrom, "pos": c.pos, "rs": c.rs,
                "score": score_marker(c, self.populations or None),
                "alt_freqs": dict(c.alt_freqs),
            }

        return {
            "afd": self.afd_threshold,
            "filter": {"name": self.filter.name, "max_abd": self.filter.max_abd,
                       "min_dp": self.filter.min_dp, "min_gq": self.filter.min_gq},
            "n_selected": self.n_selected,
            "selected": [marker(c) for c in self.chosen.values()],
            "eligible_per_segment": {seg: len(v) for seg, v in self.ranked.items()},
            "skipped": [{"segment_id": s, "reason": r} for s, r in self.skipped],
        }


def _rows(stream):
    """Yield (line number, fields) for non-blank, non-comment TSV lines."""
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\r\n")
        if line.strip() and not line.startswith("#"):
            yield lineno, line.split("\t")


def load_candidates(stream, source=None):
    """Parse a candidate-marker TSV; frequency errors report the line."""
    rows = _rows(stream)
    try:
        header_line, header = next(rows)
    except StopIteration:
        raise ParseError("empty candidate file", None, source) from None
    missing = [c for c in _REQUIRED if c not in header]
    if missing:
        raise ParseError(f"candidate header lacks {missing}", header_line, source)
    pop_cols = [c for c in header if c.startswith("af_")]
    if not pop_cols:
        raise ParseError("candidate header has no af_<population> columns", header_line, source)
    out = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ParseError(f"expected {len(header)} fields, got {len(row)}", lineno, source)
        rec = dict(zip(header, row))
        try:
            pos = int(rec["pos"])
            orientation = rec["orientation"]
            if orientation not in ("ref", "alt"):
                raise ValueError(f"orientation must be 'ref' or 'alt', got {orientation!r}")
            freqs = []
            for col in pop_cols:
                f = float(rec[col])
                if math.isnan(f) or not (0.0 <= f <= 1.0):
                    raise ValueError(f"{col} frequency outside [0, 1]: {rec[col]!r}")
                freqs.append((col[3:], f if orientation == "alt" else 1.0 - f))
            out.append(CandidateMarker(
                rec["segment_id"], rec["chrom"], pos, rec["rs"], tuple(freqs),
                rec.get("ref") or None, rec.get("alt") or None,
            ))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
    return out


def load_segments(stream, source=None):
    rows = _rows(stream)
    try:
        lineno, header = next(rows)
    except StopIteration:
        raise ParseError("empty segment file", None, source) from None
    if tuple(header) != _SEGMENT_HEADER:
        raise ParseError(f"segment header must be {'/'.join(_SEGMENT_HEADER)}", lineno, source)
    out = []
    seen = set()
    for lineno, row in rows:
        try:
            if len(row) != 4:
                raise ValueError(f"expected 4 fields, got {len(row)}")
            seg = SegmentSpec(row[0], row[1], int(row[2]), int(row[3]))
        except ValueError as exc:
            raise ParseError(str(exc), lineno, source) from None
        if seg.segment_id in seen:
            raise ParseError(f"duplicate segment {seg.segment_id}", lineno, source)
        seen.add(seg.segment_id)
        out.append(seg)
    return out


def read_candidates(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return load_candidates(fh, source=str(path))


def read_segments(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return load_segments(fh, source=str(path))


def load_demo_candidates():
    """Synthetic 43-segment candidate table shipped with the package."""
    text = resources.files("snplr.data").joinpath("demo_candidates.tsv").read_text(encoding="utf-8")
    return load_candidates(text, source="demo_candidates.tsv")


def load_demo_segments():
    text = resources.files("snplr.data").joinpath("demo_segments.tsv").read_text(encoding="utf-8")
    return load_segments(text, source="demo_segments.tsv")


def _populations(candidate, populations):
    return candidate.populations if populations is None else tuple(populations)


def filter_by_afd(candidates, threshold, populations=None):
    """Keep candidates within ``threshold`` of AF 0.5 in every population."""
    if not (0.0 < threshold <= 0.5):
        raise ValueError(f"AFD threshold must lie in (0, 0.5], got {threshold!r}")
    return [
        c for c in candidates
        if all(abs(c.alt_freq(p) - 0.5) <= threshold + _AFD_SLACK for p in _populations(c, populations))
    ]


def score_marker(candidate, populations=None):
    """Sum over populations of |AF - 0.5|; smaller is a better marker."""
    return math.fsum(abs(candidate.alt_freq(p) - 0.5) for p in _populations(candidate, populations))


def rank_key(candidate, populations=None):
    """Sort key: score, then genomic position for deterministic tie-breaks.

    Scores are rounded to 12 decimals so that ties in the (decimal) input
    frequencies are not split by binary rounding noise.
    """
    return (round(score_marker(candidate, populations), _SCORE_DECIMALS), candidate.chrom, candidate.pos)


def _alleles_match(candidate, call):
    if candidate.ref is not None and call.ref != candidate.ref:
        return False
    if candidate.alt is not None and call.alt not in (".", candidate.alt):
        return False
    return True


def select_markers(candidates, segments, trace_calls, spec=FILTERS["none"], afd=None, populations=None):
    """Pick the best-scoring usable candidate in each segment from trace calls only.

    A candidate is eligible when it lies in its segment, passes the AFD
    screen (if ``afd`` is given), and the trace has a call at its position
    that passes ``spec`` with consistent alleles. Segments without an
    eligible candidate are listed in ``skipped`` with the furthest stage
    reached: ``no_candidates``, ``no_call``, ``filter`` or ``alleles``.
    """
    if isinstance(spec, str):
        spec = FilterSpec.parse(spec)
    trace = {}
    for call in trace_calls:
        key = (call.chrom, call.pos)
        if key in trace:
            raise DuplicateSiteError(f"duplicate trace call at {call.chrom}:{call.pos}")
        trace[key] = call
    pool = list(candidates) if afd is None else filter_by_afd(candidates, afd, populations)
    by_segment = {}
    for c in pool:
        by_segment.setdefault(c.segment_id, []).append(c)

    chosen, ranked, skipped = {}, {}, []
    for seg in segments:
        members = [c for c in by_segment.get(seg.segment_id, []) if seg.contains(c.chrom, c.pos)]
        stage = "no_candidates" if not members else "no_call"
        eligible = []
        for c in members:
            call = trace.get((c.chrom, c.pos))
            if call is None:
                continue
            if not apply_filter(call, spec):
                stage = "filter" if stage == "no_call" else stage
                continue
            if not _alleles_match(c, call):
                stage = "alleles"
                continue
            eligible.append(c)
        eligible.sort(key=lambda c: rank_key(c, populations))
        ranked[seg.segment_id] = tuple(eligible)
        if eligible:
            chosen[seg.segment_id] = eligible[0]
        else:
            skipped.append((seg.segment_id, stage))
    pops = tuple(populations) if populations is not None else ()
    return SelectionResult(chosen, ranked, tuple(skipped), afd, spec, pops)


def evidence_for(candidate, x_trace, x_poi, population):
    """Evidence pair at a selected marker with HWE frequencies for ``population``."""
    freqs = hwe_genotype_freqs(candidate.ref_freq(population))
    return EvidencePair(x_trace, x_poi, freqs)


def min_lr_profile(pairs_per_segment, w):
    """Smallest combined LR over all one-candidate-per-segment combinations.

    The combined LR factorises over segments, so its minimum is the product
    of per-segment minima; the combinations are never enumerated.
    ``per_locus_lr`` holds the per-segment minima in mapping order.
    """
    if not pairs_per_segment:
        raise ValueError("min_lr_profile needs at least one segment")
    minima = []
    for seg, pairs in pairs_per_segment.items():
        pairs = list(pairs)
        if not pairs:
            raise ValueError(f"segment {seg} has no candidates")
        values = []
        for i, pair in enumerate(pairs):
            try:
                values.append(lr_single(pair, w))
            except UndefinedLRError as exc:
                raise UndefinedLRError(f"segment {seg}, candidate {i}: {exc}", locus=(seg, i)) from exc
        minima.append(min(values))
    return LrResult.from_per_locus(minima)


class MarkerSelector(BaseEstimator):
    """Estimator wrapper: ``fit`` on reference candidates and segments, then
    ``transform`` a trace sample's calls into a :class:`SelectionResult`.
    """

    def __init__(self, afd=None, filter="none", populations=None):
        self.afd = afd
        self.filter = filter
        self.populations = populations

    def fit(self, candidates, segments):
        self.candidates_ = list(candidates)
        self.segments_ = list(segments)
        self.filter_spec_ = self.filter if isinstance(self.filter, FilterSpec) else FilterSpec.parse(self.filter)
        if self.afd is not None and not (0.0 < self.afd <= 0.5):
            raise ValueError(f"afd must lie in (0, 0.5], got {self.afd!r}")
        return self

    def transform(self, trace_calls):
        check_is_fitted(self, "candidates_")
        return select_markers(
            self.candidates_, self.segments_, trace_calls, self.filter_spec_, self.afd, self.populations
        )
