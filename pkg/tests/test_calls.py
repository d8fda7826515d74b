import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snplr.calls import (
    FILTERS,
    CallFilter,
    FilterSpec,
    SiteCall,
    allele_balance,
    allele_balance_deviation,
    apply_filter,
    pair_samples,
    parse_calls,
    write_calls,
)
from snplr.exceptions import DuplicateSiteError, ParseError

HEADER = "segment_id\tchrom\tpos\tref\talt\tgt\tdp\tgq\tad_ref\tad_alt\n"


def call(pos=100, gt=0, dp=30, gq=40, ad=(30, 0), ref="A", alt=".", seg="s1", chrom="1"):
    if gt and alt == ".":
        alt = "C"
    return SiteCall(seg, chrom, pos, ref, alt, gt, dp, gq, ad[0], ad[1])


@st.composite
def site_calls(draw, pos=None):
    gt = draw(st.sampled_from([None, 0, 1, 2]))
    ad_ref = draw(st.integers(0, 60))
    ad_alt = draw(st.integers(0, 60))
    return SiteCall(
        "s1", "1", pos if pos is not None else draw(st.integers(1, 50)),
        "A", "." if gt in (None, 0) else "G", gt,
        draw(st.integers(0, 130)), draw(st.integers(0, 99)), ad_ref, ad_alt,
    )


@st.composite
def call_sets(draw):
    positions = draw(st.lists(st.integers(1, 200), unique=True, max_size=40))
    return [draw(site_calls(pos=p)) for p in positions]


class TestAlleleBalance:
    def test_homozygous_example(self):
        ab = allele_balance(95, 5)
        assert ab == 0.05
        assert allele_balance_deviation(0, ab) == 0.05

    def test_heterozygous_example(self):
        ab = allele_balance(55, 45)
        assert ab == 0.45
        assert allele_balance_deviation(1, ab) == pytest.approx(0.05, abs=1e-15)

    def test_perfect(self):
        assert allele_balance(50, 50) == 0.5
        assert allele_balance_deviation(1, 0.5) == 0.0

    def test_hom_alt(self):
        assert allele_balance_deviation(2, allele_balance(5, 95)) == 0.05

    def test_undefined(self):
        with pytest.raises(ValueError):
            allele_balance(0, 0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            allele_balance_deviation(1, 0.7)
        with pytest.raises(ValueError):
            allele_balance_deviation(3, 0.1)


class TestFilter:
    def test_presets(self):
        assert FILTERS["none"] == FilterSpec("none", 0.5, 0, 0)
        assert (FILTERS["loose"].max_abd, FILTERS["loose"].min_dp, FILTERS["loose"].min_gq) == (0.3, 6, 10)
        assert (FILTERS["strict"].max_abd, FILTERS["strict"].min_dp, FILTERS["strict"].min_gq) == (0.1, 10, 20)

    @pytest.mark.parametrize("gt, ad", [(0, (70, 30)), (1, (80, 20)), (2, (30, 70))])
    def test_boundary_inclusive(self, gt, ad):
        # ABD exactly 0.3 for each genotype class, DP 6, GQ 10.
        c = call(gt=gt, dp=6, gq=10, ad=ad)
        assert apply_filter(c, FILTERS["loose"]) == (True, None)
        assert apply_filter(c, FILTERS["strict"]) == (False, "allele_balance")

    def test_missing(self):
        assert apply_filter(call(gt=None), FILTERS["none"]) == (False, "missing")

    def test_zero_reads_fail_none(self):
        assert apply_filter(call(dp=0, ad=(0, 0)), FILTERS["none"]) == (False, "allele_balance")

    def test_depth_and_gq_reasons(self):
        assert apply_filter(call(dp=5, ad=(5, 0)), FILTERS["loose"]).reason == "depth"
        assert apply_filter(call(gq=9), FILTERS["loose"]).reason == "genotype_quality"

    def test_first_violation_reported(self):
        c = call(gt=1, dp=2, gq=0, ad=(2, 0))
        assert apply_filter(c, FILTERS["strict"]).reason == "allele_balance"

    def test_parse_custom(self):
        f = FilterSpec.parse("custom:0.2,8,15")
        assert (f.max_abd, f.min_dp, f.min_gq) == (0.2, 8, 15)
        assert FilterSpec.parse("loose") is FILTERS["loose"]

    @pytest.mark.parametrize("text", ["custom:0.2,8", "medium", "custom:a,b,c", "custom:0.7,1,1"])
    def test_parse_bad(self, text):
        with pytest.raises(ValueError):
            FilterSpec.parse(text)

    @given(call_sets())
    def test_nesting(self, calls):
        passing = {
            name: {c.key for c in calls if apply_filter(c, spec)} for name, spec in FILTERS.items()
        }
        assert passing["strict"] <= passing["loose"] <= passing["none"]

    def test_transformer(self):
        calls = [call(pos=1), call(pos=2, dp=3, ad=(3, 0)), call(pos=3, gt=None)]
        kept = CallFilter.from_spec("loose").fit().transform(calls)
        assert [c.pos for c in kept] == [1]
        assert CallFilter(max_abd=0.1, min_dp=10, min_gq=20).get_params() == {
            "max_abd": 0.1, "min_dp": 10, "min_gq": 20,
        }


class TestParse:
    def test_single_line(self):
        calls = parse_calls(HEADER + "s1\t1\t10\tA\t.\t0\t30\t40\t30\t0\n")
        assert len(calls) == 1
        assert calls[0] == SiteCall("s1", "1", 10, "A", ".", 0, 30, 40, 30, 0)

    def test_missing_genotype(self):
        calls = parse_calls(HEADER + "s1\t1\t10\tA\t.\t./.\t0\t0\t0\t0\n")
        assert calls[0].genotype is None

    def test_worked_example_inputs(self):
        (c,) = parse_calls(HEADER + "s1\t1\t10\tA\tC\t0\t100\t50\t95\t5\n")
        assert (c.dp, c.ad_ref, c.ad_alt, c.genotype) == (100, 95, 5, 0)
        assert allele_balance(c.ad_ref, c.ad_alt) == 0.05

    def test_comments_and_order(self):
        text = "# sample H-1\n" + HEADER + "s1\t1\t20\tA\t.\t0\t5\t5\t5\t0\n#x\ns1\t1\t10\tA\tG\t1\t5\t5\t3\t2\n"
        assert [c.pos for c in parse_calls(text)] == [20, 10]

    def test_bad_header(self):
        with pytest.raises(ParseError):
            parse_calls("segment\tchrom\n")

    def test_strict_reports_line(self):
        text = HEADER + "s1\t1\t10\tA\t.\t0\t30\t40\t30\t0\ns1\t1\tx\tA\t.\t0\t30\t40\t30\t0\n"
        with pytest.raises(ParseError) as info:
            parse_calls(text, source="a.tsv")
        assert info.value.line == 3
        assert "a.tsv:3" in str(info.value)

    def test_lenient_skips_and_counts(self):
        text = HEADER + "s1\t1\t10\tA\t.\t0\t30\t40\t30\t0\nbroken\ns1\t1\t11\tA\t.\t7\t1\t1\t1\t0\n"
        calls = parse_calls(text, strict=False)
        assert len(calls) == 1
        assert calls.n_skipped == 2

    @pytest.mark.parametrize(
        "line",
        [
            "s1\t1\t0\tA\t.\t0\t1\t1\t1\t0",  # pos 0
            "s1\t1\t5\tAC\t.\t0\t1\t1\t1\t0",  # multi-base ref
            "s1\t1\t5\tA\tC,G\t1\t1\t1\t1\t0",  # multi-allelic
            "s1\t1\t5\tA\t.\t1\t1\t1\t1\t0",  # het without alt
            "s1\t1\t5\tA\t.\t0\t-1\t1\t1\t0",  # negative depth
        ],
    )
    def test_invalid_fields(self, line):
        with pytest.raises(ParseError):
            parse_calls(HEADER + line + "\n")

    def test_depth_inconsistency_flagged_not_rejected(self):
        (c,) = parse_calls(HEADER + "s1\t1\t10\tA\tC\t1\t5\t40\t10\t10\n")
        assert c.depth_inconsistent

    @given(call_sets())
    def test_round_trip(self, calls):
        buf = io.StringIO()
        write_calls(calls, buf)
        again = parse_calls(buf.getvalue())
        assert list(again) == calls
        buf2 = io.StringIO()
        write_calls(again, buf2)
        assert buf2.getvalue() == buf.getvalue()


class TestPairSamples:
    def test_identical_is_diagonal(self):
        calls = [call(pos=1, gt=0), call(pos=2, gt=1, ad=(15, 15)), call(pos=3, gt=2, ad=(0, 30))]
        paired = pair_samples(calls, calls, FILTERS["none"])
        np.testing.assert_array_equal(paired.confusion.counts, np.diag([1, 1, 1]))
        assert paired.shared_sites == (("s1", 1, 0, 0), ("s1", 2, 1, 1), ("s1", 3, 2, 2))

    def test_only_in_one_sample(self):
        paired = pair_samples([call(pos=1), call(pos=2)], [call(pos=1)], FILTERS["none"])
        assert paired.n_excluded_missing == 1
        assert paired.confusion.total == 1

    def test_allele_mismatch(self):
        a = [call(pos=1, gt=1, ad=(15, 15), alt="C"), call(pos=2)]
        b = [call(pos=1, gt=1, ad=(15, 15), alt="G"), call(pos=2)]
        paired = pair_samples(a, b, FILTERS["none"])
        assert paired.n_excluded_alleles == 1
        assert paired.confusion.total == 1

    def test_hom_ref_dot_alt_is_compatible(self):
        a = [call(pos=1, gt=0, alt=".")]
        b = [call(pos=1, gt=1, ad=(15, 15), alt="T")]
        paired = pair_samples(a, b, FILTERS["none"])
        assert paired.confusion.counts[0, 1] == 1

    def test_filter_exclusion(self):
        a = [call(pos=1, dp=3, ad=(3, 0))]
        paired = pair_samples(a, [call(pos=1)], FILTERS["loose"])
        assert paired.n_excluded_filter == 1

    def test_duplicate_site(self):
        with pytest.raises(DuplicateSiteError, match="s1 1:5"):
            pair_samples([call(pos=5), call(pos=5)], [], FILTERS["none"])

    @settings(max_examples=50)
    @given(call_sets(), call_sets())
    def test_swap_transposes(self, a, b):
        ab = pair_samples(a, b, FILTERS["loose"])
        ba = pair_samples(b, a, FILTERS["loose"])
        np.testing.assert_array_equal(ab.confusion.counts, ba.confusion.counts.T)

    @settings(max_examples=50)
    @given(call_sets(), call_sets())
    def test_conservation(self, a, b):
        paired = pair_samples(a, b, FILTERS["strict"])
        keys = {c.key for c in a} | {c.key for c in b}
        assert paired.n_considered == len(keys)
        assert paired.confusion.total == len(paired.shared_sites)

    @settings(max_examples=50)
    @given(call_sets(), call_sets())
    def test_totals_non_increasing_with_stringency(self, a, b):
        totals = [pair_samples(a, b, FILTERS[n]).confusion.total for n in ("none", "loose", "strict")]
        assert totals[0] >= totals[1] >= totals[2]

    def test_deterministic_regardless_of_input_order(self):
        a = [call(pos=p, gt=p % 3, ad=(15, 15) if p % 3 == 1 else (30, 0)) for p in range(1, 30)]
        r1 = pair_samples(a, a[::-1], FILTERS["none"])
        r2 = pair_samples(a[::-1], a, FILTERS["none"])
        assert r1 == r2
