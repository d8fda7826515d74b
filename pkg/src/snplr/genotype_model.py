"""Genotype-calling error channel and likelihood ratios for diallelic SNPs.

Genotypes are counts of alternative (non-reference) alleles: 0 = hom ref,
1 = het, 2 = hom alt. Each of the two alleles of a latent genotype is
misread independently with probability ``w``. Under Hp the trace donor and
the person of interest share one latent genotype; under Hd they carry two
independent latent genotypes drawn from the population frequencies.

Evidence probabilities are available through two independent routes: the
closed-form polynomials (``joint_prob_hp`` / ``joint_prob_hd``) and a
composition of the 3x3 channel matrix with the genotype frequencies
(``joint_prob_hp_channel`` / ``joint_prob_hd_channel``). The test-suite
checks that both agree.
"""

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from ._validation import (
    check_error_rate,
    check_frequency_vector,
    check_genotype,
    check_probability,
)
from .exceptions import UndefinedLRError

__all__ = [
    "Genotype",
    "GenotypeFrequencies",
    "EvidencePair",
    "LrResult",
    "hwe_genotype_freqs",
    "genotype_channel",
    "category_probs",
    "joint_prob_hp",
    "joint_prob_hd",
    "joint_prob_hp_channel",
    "joint_prob_hd_channel",
    "marginal_prob",
    "lr_single",
    "lr_profile",
    "lr_matrix",
]


class Genotype(IntEnum):
    HOM_REF = 0
    HET = 1
    HOM_ALT = 2

    @property
    def label(self):
        return ("0/0", "0/1", "1/1")[self]


@dataclass(frozen=True)
class GenotypeFrequencies:
    """Population probabilities of genotypes 0, 1 and 2."""

    p0: float
    p1: float
    p2: float

    def __post_init__(self):
        p = check_frequency_vector((self.p0, self.p1, self.p2))
        object.__setattr__(self, "p0", p[0])
        object.__setattr__(self, "p1", p[1])
        object.__setattr__(self, "p2", p[2])

    @classmethod
    def from_ref_allele_freq(cls, q):
        return hwe_genotype_freqs(q)

    def as_tuple(self):
        return (self.p0, self.p1, self.p2)

    def __getitem__(self, genotype):
        return self.as_tuple()[genotype]


@dataclass(frozen=True)
class EvidencePair:
    """Observed trace-donor and PoI genotypes at one locus plus its frequencies."""

    x_donor: int
    x_poi: int
    freqs: GenotypeFrequencies

    def __post_init__(self):
        object.__setattr__(self, "x_donor", Genotype(check_genotype(self.x_donor, "x_donor")))
        object.__setattr__(self, "x_poi", Genotype(check_genotype(self.x_poi, "x_poi")))
        if not isinstance(self.freqs, GenotypeFrequencies):
            object.__setattr__(self, "freqs", GenotypeFrequencies(*self.freqs))

    @property
    def is_match(self):
        return self.x_donor == self.x_poi


@dataclass(frozen=True)
class LrResult:
    """Per-locus likelihood ratios and their combined log10 value."""

    per_locus_lr: tuple
    log10_combined: float

    @classmethod
    def from_per_locus(cls, lrs):
        lrs = tuple(float(v) for v in lrs)
        if not lrs:
            raise ValueError("at least one locus is required")
        if any(v < 0 or math.isnan(v) for v in lrs):
            raise ValueError("per-locus LRs must be non-negative")
        if any(v == 0.0 for v in lrs):
            return cls(lrs, -math.inf)
        # math.fsum keeps the sum independent of summation order.
        return cls(lrs, math.fsum(math.log10(v) for v in lrs))

    @property
    def n_loci(self):
        return len(self.per_locus_lr)

    @property
    def is_zero(self):
        return self.log10_combined == -math.inf


def hwe_genotype_freqs(q):
    """Genotype frequencies under Hardy-Weinberg equilibrium.

    ``q`` is the frequency of the *reference* allele, so genotype 0 (two
    reference alleles) has probability q**2.
    """
    q = check_probability(q, "reference allele frequency q")
    r = 1.0 - q
    return GenotypeFrequencies(q * q, 2.0 * q * r, r * r)


def genotype_channel(w):
    """Row-stochastic matrix ``T[z, x] = P(observed x | latent z)``."""
    w = check_error_rate(w)
    a = 1.0 - w
    return np.array(
        [
            [a * a, 2.0 * w * a, w * w],
            [w * a, w * w + a * a, w * a],
            [w * w, 2.0 * w * a, a * a],
        ]
    )


def category_probs(w):
    """Probabilities that a replicate pair lands on the diagonal, corners, off-diagonal.

    Corners are the (0/0, 1/1) and (1/1, 0/0) cells. The distribution does not
    depend on the latent genotype.
    """
    w = check_error_rate(w)
    a = 1.0 - w
    corner = 2.0 * w**2 * a**2
    off = 4.0 * w**3 * a + 4.0 * w * a**3
    diag = w**4 + 4.0 * w**2 * a**2 + a**4
    return diag, corner, off


# Closed-form evidence probabilities. Each term is
# (coefficient, genotype-frequency indices, power of w, power of 1 - w).
# Only the upper triangle is listed; both tables are symmetric.
_HP_TERMS = {
    (0, 0): [(1, (0,), 0, 4), (1, (1,), 2, 2), (1, (2,), 4, 0)],
    (0, 1): [(2, (0,), 1, 3), (1, (1,), 3, 1), (1, (1,), 1, 3), (2, (2,), 3, 1)],
    (0, 2): [(1, (0,), 2, 2), (1, (1,), 2, 2), (1, (2,), 2, 2)],
    (1, 1): [(4, (0,), 2, 2), (1, (1,), 4, 0), (2, (1,), 2, 2), (1, (1,), 0, 4), (4, (2,), 2, 2)],
    (1, 2): [(2, (0,), 3, 1), (1, (1,), 3, 1), (1, (1,), 1, 3), (2, (2,), 1, 3)],
    (2, 2): [(1, (0,), 4, 0), (1, (1,), 2, 2), (1, (2,), 0, 4)],
}

_HD_TERMS = {
    (0, 0): [
        (1, (0, 0), 0, 4), (2, (0, 1), 1, 3), (2, (0, 2), 2, 2),
        (1, (1, 1), 2, 2), (2, (1, 2), 3, 1), (1, (2, 2), 4, 0),
    ],
    (0, 1): [
        (2, (0, 0), 1, 3), (3, (0, 1), 2, 2), (1, (0, 1), 0, 4),
        (2, (0, 2), 3, 1), (2, (0, 2), 1, 3), (1, (1, 1), 3, 1),
        (1, (1, 1), 1, 3), (1, (1, 2), 4, 0), (3, (1, 2), 2, 2),
        (2, (2, 2), 3, 1),
    ],
    (0, 2): [
        (1, (0, 0), 2, 2), (1, (0, 1), 3, 1), (1, (0, 1), 1, 3),
        (1, (0, 2), 4, 0), (1, (0, 2), 0, 4), (1, (1, 1), 2, 2),
        (1, (1, 2), 3, 1), (1, (1, 2), 1, 3), (1, (2, 2), 2, 2),
    ],
    (1, 1): [
        (4, (0, 0), 2, 2), (4, (0, 1), 3, 1), (4, (0, 1), 1, 3),
        (8, (0, 2), 2, 2), (1, (1, 1), 4, 0), (2, (1, 1), 2, 2),
        (1, (1, 1), 0, 4), (4, (1, 2), 3, 1), (4, (1, 2), 1, 3),
        (4, (2, 2), 2, 2),
    ],
    (1, 2): [
        (2, (0, 0), 3, 1), (1, (0, 1), 4, 0), (3, (0, 1), 2, 2),
        (2, (0, 2), 3, 1), (2, (0, 2), 1, 3), (1, (1, 1), 3, 1),
        (1, (1, 1), 1, 3), (3, (1, 2), 2, 2), (1, (1, 2), 0, 4),
        (2, (2, 2), 1, 3),
    ],
    (2, 2): [
        (1, (0, 0), 4, 0), (2, (0, 1), 3, 1), (2, (0, 2), 2, 2),
        (1, (1, 1), 2, 2), (2, (1, 2), 1, 3), (1, (2, 2), 0, 4),
    ],
}


def _eval_terms(terms, p, w):
    a = 1.0 - w
    total = 0.0
    for coef, idx, pw, pa in terms:
        prod = float(coef)
        for i in idx:
            prod *= p[i]
        total += prod * w**pw * a**pa
    return total


def _unpack(x_donor, x_poi, freqs):
    x_donor = check_genotype(x_donor, "x_donor")
    x_poi = check_genotype(x_poi, "x_poi")
    if isinstance(freqs, GenotypeFrequencies):
        p = freqs.as_tuple()
    else:
        p = check_frequency_vector(freqs)
    return x_donor, x_poi, p


def joint_prob_hp(x_donor, x_poi, freqs, w):
    """P(X^D = x_donor, X^S = x_poi | Hp) from the closed-form polynomials."""
    x_donor, x_poi, p = _unpack(x_donor, x_poi, freqs)
    w = check_error_rate(w)
    key = (min(x_donor, x_poi), max(x_donor, x_poi))
    return _eval_terms(_HP_TERMS[key], p, w)


def joint_prob_hd(x_donor, x_poi, freqs, w):
    """P(X^D = x_donor, X^S = x_poi | Hd) from the closed-form polynomials."""
    x_donor, x_poi, p = _unpack(x_donor, x_poi, freqs)
    w = check_error_rate(w)
    key = (min(x_donor, x_poi), max(x_donor, x_poi))
    return _eval_terms(_HD_TERMS[key], p, w)


def marginal_prob(x, freqs, w):
    """P(X = x) for one typed sample: sum_z p_z T[z, x]."""
    x, _, p = _unpack(x, 0, freqs)
    t = genotype_channel(w)
    return float(sum(p[z] * t[z, x] for z in range(3)))


def joint_prob_hp_channel(x_donor, x_poi, freqs, w):
    """Hp evidence probability by composing the channel: sum_z p_z T[z,a] T[z,b]."""
    x_donor, x_poi, p = _unpack(x_donor, x_poi, freqs)
    t = genotype_channel(w)
    return float(sum(p[z] * t[z, x_donor] * t[z, x_poi] for z in range(3)))


def joint_prob_hd_channel(x_donor, x_poi, freqs, w):
    """Hd evidence probability as a product of the two independent marginals."""
    return marginal_prob(x_donor, freqs, w) * marginal_prob(x_poi, freqs, w)


def lr_single(pair, w):
    """Single-locus likelihood ratio P(E | Hp) / P(E | Hd).

    At ``w == 0`` the conventional values are returned exactly: ``1 / p_x``
    for a match and ``0`` for a mismatch. Raises :class:`UndefinedLRError`
    when the denominator vanishes.
    """
    w = check_error_rate(w)
    p = pair.freqs.as_tuple()
    a, b = int(pair.x_donor), int(pair.x_poi)
    if w == 0.0:
        if a != b:
            return 0.0
        if p[a] == 0.0:
            raise UndefinedLRError(f"genotype {a} has population frequency 0; LR is 0/0")
        return 1.0 / p[a]
    num = joint_prob_hp(a, b, p, w)
    den = joint_prob_hd(a, b, p, w)
    if den == 0.0:
        raise UndefinedLRError(f"P(E | Hd) is 0 for genotypes ({a}, {b})")
    return num / den


def lr_profile(pairs, w):
    """Combine independent loci. The product is formed in log10 space."""
    pairs = list(pairs)
    if not pairs:
        raise ValueError("lr_profile needs at least one evidence pair")
    lrs = []
    for i, pair in enumerate(pairs):
        try:
            lrs.append(lr_single(pair, w))
        except UndefinedLRError as exc:
            raise UndefinedLRError(f"locus {i}: {exc}", locus=i) from exc
    return LrResult.from_per_locus(lrs)


def lr_matrix(freqs, w):
    """3x3 array of single-locus LRs indexed by (x_donor, x_poi).

    Undefined entries are ``nan``; used for vectorised scoring in simulations.
    """
    out = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            try:
                out[a, b] = lr_single(EvidencePair(a, b, freqs), w)
            except UndefinedLRError:
                out[a, b] = np.nan
    return out
