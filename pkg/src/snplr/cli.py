"""Command-line interface: ``snplr <subcommand> [options]``.

Exit codes: 0 success (including an LR report with no usable loci),
1 usage error, 2 unreadable or invalid input, 3 numerical failure
(empty confusion table, undefined LR, or a replay whose outputs differ).

Every run writes a manifest (JSON) with the exact argv, the resolved
parameters and SHA-256 digests of all inputs and outputs. ``snplr replay
MANIFEST`` re-runs it and checks that the outputs are byte-identical.
"""

import argparse
import contextlib
import hashlib
import io
import json
import logging
import math
import platform
import sys

import numpy as np
import scipy
import sklearn

from . import __version__
from .calls import FilterSpec, alleles_compatible, apply_filter, pair_samples, read_calls
from .estimation import aggregate_tables, estimate_mle, estimate_posterior_mean, read_confusion_table
from .exceptions import DuplicateSiteError, NoDataError, UndefinedLRError
from .genotype_model import LrResult, lr_single
from .markers import (
    evidence_for,
    load_demo_candidates,
    load_demo_segments,
    min_lr_profile,
    read_candidates,
    read_segments,
    select_markers,
)
from .simulation import HYPOTHESES, build_grid, simulate_study, write_cases_csv, write_summary_csv

__all__ = ["main", "run", "build_parser", "EXIT_OK", "EXIT_USAGE", "EXIT_INPUT", "EXIT_NUMERIC"]

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3
STDOUT = "<stdout>"
DEFAULT_GRID = dict(hypotheses="Hp,Hd", w="1e-6,1e-4,1e-2", q="0.25,0.5", loci="10,20,43")


class UsageError(Exception):
    pass


class ReplayMismatch(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# argparse value types; ValueError/ArgumentTypeError become usage errors.

def _error_rate(text):
    w = float(text)
    if not (0.0 <= w < 0.5):
        raise argparse.ArgumentTypeError(f"error rate must lie in [0, 0.5), got {text}")
    return w


def _filter(text):
    try:
        return FilterSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _afd(text):
    t = float(text)
    if not (0.0 < t <= 0.5):
        raise argparse.ArgumentTypeError(f"AFD threshold must lie in (0, 0.5], got {text}")
    return t


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return v


def _level(text):
    v = float(text)
    if not (0.0 < v < 1.0):
        raise argparse.ArgumentTypeError(f"credible level must lie in (0, 1), got {text}")
    return v


def _list_of(item_type):
    def parse(text):
        items = [s for s in text.split(",") if s]
        if not items:
            raise argparse.ArgumentTypeError("expected a comma-separated list")
        return [item_type(s) for s in items]

    return parse


def _hypothesis(text):
    if text not in HYPOTHESES:
        raise argparse.ArgumentTypeError(f"hypothesis must be Hp or Hd, got {text}")
    return text


def _probability(text):
    v = float(text)
    if not (0.0 <= v <= 1.0):
        raise argparse.ArgumentTypeError(f"allele frequency must lie in [0, 1], got {text}")
    return v


def build_parser():
    parser = _Parser(prog="snplr", description="Likelihood ratios for SNP genotypes with calling errors.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    common = _Parser(add_help=False)
    common.add_argument("--out", help="output file (default: standard output)")
    common.add_argument("--manifest", help="manifest path (default: OUT.manifest.json, else standard error)")

    p = sub.add_parser("tabulate", parents=[common], help="confusion table from two replicate call files")
    p.add_argument("calls_a")
    p.add_argument("calls_b")
    p.add_argument("--filter", type=_filter, default=_filter("none"), metavar="{none|loose|strict|custom:ABD,DP,GQ}")
    p.add_argument("--report", help="exclusion report JSON (default: OUT.report.json, else standard error)")
    p.add_argument("--skip-malformed", action="store_true", help="skip and count malformed call lines")

    p = sub.add_parser("estimate-w", parents=[common], help="estimate the calling error rate")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--table", action="append", help="confusion table file (repeat with --aggregate)")
    src.add_argument("--calls", nargs=2, metavar=("CALLS_A", "CALLS_B"), help="tabulate two call files first")
    p.add_argument("--aggregate", action="store_true", help="sum several tables cell-wise before estimating")
    p.add_argument("--filter", type=_filter, default=_filter("none"), metavar="{none|loose|strict|custom:ABD,DP,GQ}")
    p.add_argument("--method", choices=("mle", "bayes", "both"), default="both")
    p.add_argument("--credible-level", type=_level, default=0.95)

    p = sub.add_parser("lr", parents=[common], help="select markers on the trace, then score against the PoI")
    p.add_argument("--trace", required=True, help="trace sample call file")
    p.add_argument("--poi", required=True, help="person-of-interest call file")
    p.add_argument("--candidates", help="candidate marker TSV (default: packaged demo table)")
    p.add_argument("--segments", help="segment TSV (default: packaged demo segments)")
    p.add_argument("--filter", type=_filter, default=_filter("none"), metavar="{none|loose|strict|custom:ABD,DP,GQ}")
    p.add_argument("--afd", type=_afd)
    p.add_argument("--w", type=_error_rate, required=True, help="calling error rate")
    p.add_argument("--population", required=True, help="population whose frequencies enter the LR")
    p.add_argument("--min-lr-k", type=_positive_int, help="also report the minimum LR over the top K candidates per segment")

    p = sub.add_parser("simulate", parents=[common], help="simulate cases and summarise log10 LRs")
    p.add_argument("--hypotheses", type=_list_of(_hypothesis), default=DEFAULT_GRID["hypotheses"])
    p.add_argument("--w", type=_list_of(_error_rate), default=DEFAULT_GRID["w"], help="generating error rates")
    p.add_argument("--w-analysis", type=_error_rate, help="error rate used for scoring (default: generating rate)")
    p.add_argument("--q", type=_list_of(_probability), default=DEFAULT_GRID["q"], help="reference allele frequencies")
    p.add_argument("--loci", type=_list_of(_positive_int), default=DEFAULT_GRID["loci"])
    p.add_argument("--cases", type=_positive_int, default=1000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--cases-out", help="per-case CSV")
    p.add_argument("--jobs", type=_positive_int, default=1)

    p = sub.add_parser("select-markers", parents=[common], help="choose one marker per segment from trace calls")
    p.add_argument("--trace", required=True)
    p.add_argument("--candidates")
    p.add_argument("--segments")
    p.add_argument("--filter", type=_filter, default=_filter("none"), metavar="{none|loose|strict|custom:ABD,DP,GQ}")
    p.add_argument("--afd", type=_afd)
    p.add_argument("--populations", type=_list_of(str), help="populations used for scoring (default: all)")

    p = sub.add_parser("replay", help="re-run a manifest and verify its outputs")
    p.add_argument("manifest")
    return parser


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def _file_digest(path):
    with open(path, "rb") as fh:
        return _sha256(fh.read())


def _json(obj):
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _num(v):
    """JSON-safe float: shortest repr via ``json``; non-finite becomes ``None``."""
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


def _filter_dict(spec):
    return {"name": spec.name, "max_abd": spec.max_abd, "min_dp": spec.min_dp, "min_gq": spec.min_gq}


class _Run:
    """Per-invocation state: output streams, digests and the parameter record."""

    def __init__(self, argv, args, stdout, stderr):
        self.argv, self.args = argv, args
        self.stdout, self.stderr = stdout, stderr
        self.inputs, self.outputs, self.parameters = {}, {}, {}
        self.seed = None

    def read(self, path):
        self.inputs[path] = _file_digest(path)
        return path

    def emit(self, text, path=None, fallback=None):
        """Write ``text`` to ``path``, else to ``fallback`` (default stdout)."""
        data = text.encode("utf-8")
        if path:
            with open(path, "wb") as fh:
                fh.write(data)
            self.outputs[path] = _sha256(data)
        elif fallback is None or fallback is self.stdout:
            self.stdout.write(text)
            self.outputs[STDOUT] = _sha256(data)
        else:
            fallback.write(text)

    def manifest(self):
        return {
            "tool": "snplr",
            "version": __version__,
            "subcommand": self.args.command,
            "argv": list(self.argv),
            "parameters": self.parameters,
            "inputs": dict(sorted(self.inputs.items())),
            "outputs": dict(sorted(self.outputs.items())),
            "seed": self.seed,
            "environment": {
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "scikit-learn": sklearn.__version__,
            },
        }

    def write_manifest(self):
        path = self.args.manifest or (f"{self.args.out}.manifest.json" if self.args.out else None)
        text = _json(self.manifest())
        if path:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            self.stderr.write(text)


def _cmd_tabulate(run):
    a = run.args
    strict = not a.skip_malformed
    calls_a = read_calls(run.read(a.calls_a), strict=strict)
    calls_b = read_calls(run.read(a.calls_b), strict=strict)
    paired = pair_samples(calls_a, calls_b, a.filter)
    run.parameters = {"filter": _filter_dict(a.filter), "skip_malformed": a.skip_malformed}
    run.emit(paired.confusion.to_tsv(), a.out)
    report = {
        "filter": _filter_dict(a.filter),
        **paired.exclusion_report(),
        "n_skipped_lines": {a.calls_a: calls_a.n_skipped, a.calls_b: calls_b.n_skipped},
    }
    report_path = a.report or (f"{a.out}.report.json" if a.out else None)
    run.emit(_json(report), report_path, fallback=run.stderr)


def _cmd_estimate_w(run):
    a = run.args
    if a.table:
        if len(a.table) > 1 and not a.aggregate:
            raise UsageError("snplr estimate-w: error: several --table files need --aggregate")
        tables = []
        for path in a.table:
            with open(run.read(path), encoding="utf-8") as fh:
                tables.append(read_confusion_table(fh, source=path))
        table = aggregate_tables(tables)
    else:
        table = pair_samples(read_calls(run.read(a.calls[0])), read_calls(run.read(a.calls[1])), a.filter).confusion
    run.parameters = {"method": a.method, "credible_level": a.credible_level, "aggregate": a.aggregate}
    if a.calls:
        run.parameters["filter"] = _filter_dict(a.filter)
    counts = table.categorize()
    out = {
        "counts": {"diagonal": int(counts.n_diagonal), "corner": int(counts.n_corner),
                   "off_diagonal": int(counts.n_offdiagonal), "total": int(counts.total)},
        "table": table.counts.tolist(),
        "n_tables": len(a.table) if a.table else 1,
    }
    if a.method in ("mle", "both"):
        out["w_mle"] = _num(estimate_mle(counts).w_hat)
    if a.method in ("bayes", "both"):
        est = estimate_posterior_mean(counts, credible_level=a.credible_level)
        out["w_bayes"] = _num(est.w_hat)
        out["interval"] = {"level": a.credible_level, "lower": _num(est.interval[0]), "upper": _num(est.interval[1])}
    run.emit(_json(out), a.out)


def _marker_inputs(run):
    a = run.args
    cands = read_candidates(run.read(a.candidates)) if a.candidates else load_demo_candidates()
    segs = read_segments(run.read(a.segments)) if a.segments else load_demo_segments()
    return cands, segs


def _site_index(calls, label):
    out = {}
    for c in calls:
        key = (c.chrom, c.pos)
        if key in out:
            raise DuplicateSiteError(f"duplicate {label} call at {c.chrom}:{c.pos}")
        out[key] = c
    return out


def _lr_fields(lr):
    return {"lr": _num(lr), "log10_lr": _num(math.log10(lr)) if lr > 0 else None, "lr_is_zero": lr == 0.0}


def _usable(candidate, trace_call, poi_call, spec):
    if poi_call is None or poi_call.is_missing:
        return "poi_missing"
    if not apply_filter(poi_call, spec):
        return "poi_filter"
    if not alleles_compatible(trace_call, poi_call):
        return "poi_alleles"
    if candidate.alt is not None and poi_call.alt not in (".", candidate.alt):
        return "poi_alleles"
    return None


def _cmd_lr(run):
    a = run.args
    cands, segs = _marker_inputs(run)
    missing = [c.rs for c in cands if a.population not in c.populations]
    if missing:
        raise ValueError(f"population {a.population!r} missing for {len(missing)} candidate(s), e.g. {missing[0]}")

    # Phase 1: selection sees the trace only.
    trace_calls = read_calls(run.read(a.trace))
    selection = select_markers(cands, segs, trace_calls, a.filter, a.afd)
    trace = _site_index(trace_calls, "trace")

    # Phase 2: the PoI file is opened only after the markers are fixed.
    poi = _site_index(read_calls(run.read(a.poi)), "PoI")

    run.parameters = {"filter": _filter_dict(a.filter), "afd": a.afd, "w": a.w, "population": a.population,
                      "min_lr_k": a.min_lr_k}
    loci, unusable, per_locus = [], [], []
    for seg_id, c in selection.chosen.items():
        t, p = trace[(c.chrom, c.pos)], poi.get((c.chrom, c.pos))
        reason = _usable(c, t, p, a.filter)
        if reason:
            unusable.append({"segment_id": seg_id, "rs": c.rs, "reason": reason})
            continue
        pair = evidence_for(c, t.genotype, p.genotype, a.population)
        try:
            lr = lr_single(pair, a.w)
        except UndefinedLRError as exc:
            raise UndefinedLRError(f"{c.rs} ({seg_id}): {exc}", locus=seg_id) from exc
        per_locus.append(lr)
        loci.append({
            "segment_id": seg_id, "chrom": c.chrom, "pos": c.pos, "rs": c.rs,
            "ref_freq": _num(c.ref_freq(a.population)), "x_trace": t.genotype, "x_poi": p.genotype,
            "match": t.genotype == p.genotype, **_lr_fields(lr),
        })

    report = {
        "status": "ok" if loci else "no_usable_loci",
        "population": a.population,
        "w": a.w,
        "filter": _filter_dict(a.filter),
        "afd": a.afd,
        "n_segments": len(segs),
        "n_selected": selection.n_selected,
        "n_usable_loci": len(loci),
        "log10_lr": None,
        "lr_is_zero": False,
        "loci": loci,
        "mismatched_loci": [
            {k: d[k] for k in ("segment_id", "rs", "x_trace", "x_poi", "lr", "log10_lr")} for d in loci if not d["match"]
        ],
        "unusable_loci": unusable,
        "skipped_segments": [{"segment_id": s, "reason": r} for s, r in selection.skipped],
    }
    if loci:
        combined = LrResult.from_per_locus(per_locus)
        report["log10_lr"] = _num(combined.log10_combined)
        report["lr_is_zero"] = combined.is_zero
    if a.min_lr_k:
        report["min_lr"] = _min_lr_report(selection, trace, poi, a)
    run.emit(_json(report), a.out)


def _min_lr_report(selection, trace, poi, a):
    pairs = {}
    for seg_id, ranked in selection.ranked.items():
        usable = []
        for c in ranked[: a.min_lr_k]:
            t, p = trace[(c.chrom, c.pos)], poi.get((c.chrom, c.pos))
            if _usable(c, t, p, a.filter) is None:
                usable.append(evidence_for(c, t.genotype, p.genotype, a.population))
        if usable:
            pairs[seg_id] = usable
    out = {"k": a.min_lr_k, "n_segments": len(pairs), "n_combinations": math.prod(len(v) for v in pairs.values()),
           "log10_lr": None, "lr_is_zero": False}
    if pairs:
        res = min_lr_profile(pairs, a.w)
        out["log10_lr"] = _num(res.log10_combined)
        out["lr_is_zero"] = res.is_zero
    return out


def _cmd_simulate(run):
    a = run.args
    grid = build_grid(a.hypotheses, a.w, a.q, a.loci, a.cases, a.seed, w_analysis=a.w_analysis)
    run.seed = a.seed
    run.parameters = {"hypotheses": a.hypotheses, "w": a.w, "w_analysis": a.w_analysis, "q": a.q,
                      "loci": a.loci, "cases": a.cases, "jobs": a.jobs}
    summaries = simulate_study(grid, n_jobs=a.jobs)
    buf = io.StringIO()
    write_summary_csv(summaries, buf)
    run.emit(buf.getvalue(), a.out)
    if a.cases_out:
        buf = io.StringIO()
        write_cases_csv(summaries, buf)
        run.emit(buf.getvalue(), a.cases_out)


def _cmd_select_markers(run):
    a = run.args
    cands, segs = _marker_inputs(run)
    selection = select_markers(cands, segs, read_calls(run.read(a.trace)), a.filter, a.afd, a.populations)
    run.parameters = {"filter": _filter_dict(a.filter), "afd": a.afd, "populations": a.populations}
    out = selection.to_dict()
    out["n_segments"] = len(segs)
    out["n_skipped"] = len(selection.skipped)
    run.emit(_json(out), a.out)


def _cmd_replay(argv_path, stdout, stderr):
    with open(argv_path, encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("tool") != "snplr" or "argv" not in manifest:
        raise ValueError(f"{argv_path} is not a snplr manifest")
    for path, digest in manifest.get("inputs", {}).items():
        if _file_digest(path) != digest:
            raise ValueError(f"input {path} changed since the manifest was written")
    captured = io.StringIO()
    code = run(manifest["argv"], captured, stderr)
    stdout.write(captured.getvalue())
    if code != EXIT_OK:
        return code
    for path, digest in manifest.get("outputs", {}).items():
        now = _sha256(captured.getvalue().encode("utf-8")) if path == STDOUT else _file_digest(path)
        if now != digest:
            raise ReplayMismatch(f"output {path} differs from the manifest")
    stderr.write(f"replay: {len(manifest.get('outputs', {}))} output(s) reproduced\n")
    return EXIT_OK


_COMMANDS = {
    "tabulate": _cmd_tabulate,
    "estimate-w": _cmd_estimate_w,
    "lr": _cmd_lr,
    "simulate": _cmd_simulate,
    "select-markers": _cmd_select_markers,
}


def run(argv, stdout=None, stderr=None):
    """Execute one command line and return its exit code."""
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    argv = list(argv)
    parser = build_parser()
    try:
        try:
            with contextlib.redirect_stdout(stdout):
                args = parser.parse_args(argv)
        except SystemExit as exc:  # --help / --version
            return exc.code or EXIT_OK
        if args.command == "replay":
            return _cmd_replay(args.manifest, stdout, stderr)
        r = _Run(argv, args, stdout, stderr)
        _COMMANDS[args.command](r)
        r.write_manifest()
        return EXIT_OK
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_USAGE
    except (NoDataError, UndefinedLRError, ReplayMismatch) as exc:
        stderr.write(f"snplr: error: {exc}\n")
        return EXIT_NUMERIC
    except (OSError, UnicodeDecodeError, ValueError, KeyError) as exc:
        stderr.write(f"snplr: error: {exc}\n")
        return EXIT_INPUT


def main(argv=None):
    logging.basicConfig(format="snplr: %(message)s", level=logging.WARNING)
    return run(sys.argv[1:] if argv is None else argv)
