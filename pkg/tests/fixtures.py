"""Synthetic call-file builders shared by the CLI and acceptance tests."""

import numpy as np

from snplr.calls import SiteCall, write_calls
from snplr.markers import load_demo_candidates

_DEPTHS = {0: (30, 0), 1: (15, 15), 2: (0, 30)}


def site(pos, gt, seg="t1", chrom="1", ref="A", alt="C", dp=30, gq=50, ad=None):
    ad = _DEPTHS[gt] if ad is None else ad
    return SiteCall(seg, chrom, pos, ref, alt if gt else ".", gt, dp, gq, *ad)


def table_call_sets(table):
    """Two call sets whose pairing reproduces ``table`` cell for cell."""
    a, b = [], []
    pos = 0
    for x in range(3):
        for y in range(3):
            for _ in range(int(table[x][y])):
                pos += 1
                a.append(site(pos, x))
                b.append(site(pos, y))
    return a, b


def mixed_quality_sets(n, seed):
    """Replicate calls with random depth, GQ and allele-balance noise."""
    rng = np.random.default_rng(seed)
    a, b = [], []
    for pos in range(1, n + 1):
        z = int(rng.integers(3))
        for out in (a, b):
            gt = z if rng.random() > 0.05 else int(rng.integers(3))
            dp = int(rng.integers(1, 40))
            alt_frac = {0: 0.0, 1: 0.5, 2: 1.0}[gt] + rng.normal(0, 0.15)
            ad_alt = int(np.clip(round(dp * alt_frac), 0, dp))
            out.append(site(pos, gt, dp=dp, gq=int(rng.integers(0, 60)), ad=(dp - ad_alt, ad_alt)))
    return a, b


def demo_profile(seed, population="NFE"):
    """Full-coverage calls at every packaged candidate, genotypes drawn under HWE."""
    rng = np.random.default_rng(seed)
    calls = []
    for c in load_demo_candidates():
        q = c.ref_freq(population)
        gt = int(rng.choice(3, p=[q * q, 2 * q * (1 - q), (1 - q) ** 2]))
        calls.append(site(c.pos, gt, seg=c.segment_id, chrom=c.chrom, ref=c.ref, alt=c.alt))
    return calls


def hair_like(calls, seed):
    """Sparse, shallow version of a profile: most sites missing or low depth."""
    rng = np.random.default_rng(seed)
    out = []
    for c in calls:
        if rng.random() < 0.6:
            continue
        dp = int(rng.integers(1, 12))
        ad = {0: (dp, 0), 1: (dp - dp // 2, dp // 2), 2: (0, dp)}[c.genotype]
        out.append(SiteCall(c.segment_id, c.chrom, c.pos, c.ref, c.alt, c.genotype, dp,
                            int(rng.integers(0, 30)), *ad))
    return out


def write(path, calls):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        write_calls(calls, fh)
    return str(path)
