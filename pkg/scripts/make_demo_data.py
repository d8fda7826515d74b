"""Regenerate the synthetic demo segment and candidate tables in src/snplr/data.

43 segments of 200,000 bp near both ends of each autosome (one end only for
chromosome 19). Candidate frequencies are synthetic; no external data is used.
"""

import pathlib

import numpy as np

# GRCh38 autosome lengths.
CHROM_LENGTHS = {
    "1": 248956422, "2": 242193529, "3": 198295559, "4": 190214555, "5": 181538259,
    "6": 170805979, "7": 159345973, "8": 145138636, "9": 138394717, "10": 133797422,
    "11": 135086622, "12": 133275309, "13": 114364328, "14": 107043718, "15": 101991189,
    "16": 90338345, "17": 83257441, "18": 80373285, "19": 58617616, "20": 64444167,
    "21": 46709983, "22": 50818468,
}
POPULATIONS = ("AFR", "EAS", "NFE")
OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "snplr" / "data"


def main(seed=20240501):
    rng = np.random.default_rng(seed)
    segments = []
    for chrom, length in CHROM_LENGTHS.items():
        ends = ("p", "q") if chrom != "19" else ("q",)
        for end in ends:
            centre = 3_000_000 if end == "p" else length - 3_000_000
            segments.append((f"chr{chrom}{end}", f"chr{chrom}", centre - 100_000, centre + 99_999))

    seg_lines = ["segment_id\tchrom\tstart\tend"]
    cand_lines = ["segment_id\tchrom\tpos\trs\torientation\tref\talt\t" + "\t".join(f"af_{p}" for p in POPULATIONS)]
    rs_next = 9_000_000
    for seg_id, chrom, start, end in segments:
        seg_lines.append(f"{seg_id}\t{chrom}\t{start}\t{end}")
        n = int(rng.integers(4, 21))
        positions = np.sort(rng.choice(np.arange(start, end + 1), size=n, replace=False))
        # One candidate per segment is kept near 0.5 in every population so a
        # fully covered trace yields a marker in each segment at AFD 0.1.
        central = int(rng.integers(n))
        for k, pos in enumerate(positions):
            if k == central:
                afs = 0.5 + np.clip(rng.normal(0.0, 0.03, size=len(POPULATIONS)), -0.09, 0.09)
            else:
                base = rng.uniform(0.25, 0.75)
                afs = np.clip(base + rng.normal(0.0, 0.08, size=len(POPULATIONS)), 0.01, 0.99)
            ref, alt = rng.choice(list("ACGT"), size=2, replace=False)
            orientation = "alt" if rng.random() < 0.8 else "ref"
            shown = afs if orientation == "alt" else 1.0 - afs
            rs_next += int(rng.integers(1, 5000))
            cand_lines.append(
                f"{seg_id}\t{chrom}\t{pos}\trs{rs_next}\t{orientation}\t{ref}\t{alt}\t"
                + "\t".join(f"{v:.4f}" for v in shown)
            )
    (OUT / "demo_segments.tsv").write_text("\n".join(seg_lines) + "\n", encoding="utf-8")
    (OUT / "demo_candidates.tsv").write_text("\n".join(cand_lines) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
