"""Command-line entry point ``gbsval``.

Exit status: 0 success, 1 a validation check failed, 2 input error,
3 numeric error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import acceptance, clickstats, gaussian as gc, io, phasespace, sampler, torontonian as tor, validation
from .errors import InputError, NumericError

log = logging.getLogger("gbsval")

EXIT_OK, EXIT_VALIDATION, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


class ValidationFailure(Exception):
    pass


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _covariances(args, bundle) -> dict[str, np.ndarray]:
    out = {}
    for kind in ("SQUE", "SQUA"):
        override = getattr(args, f"cov_{kind.lower()}", None)
        if override:
            out[kind] = io.read_covariance(override)
        elif kind in bundle.covariances:
            out[kind] = bundle.covariances[kind]
        else:
            out[kind] = gc.build_hypothesis(kind, bundle.spec, bundle.T)
        if out[kind].shape != (2 * bundle.M, 2 * bundle.M):
            raise InputError(f"{kind} covariance describes {len(out[kind]) // 2} modes, bundle has {bundle.M}")
    return out


def _samples(args, bundle) -> sampler.SampleSet:
    if getattr(args, "samples", None):
        return io.read_samples(args.samples, bundle.M, source="experimental")
    return bundle.samples()


def _sectors(text: str | None):
    if not text:
        return None
    out = []
    for part in text.split(","):
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _hbar_check(bundle, threads: int) -> dict:
    """Click statistics must not depend on the value of hbar."""
    res = {}
    for kind in ("SQUE", "SQUA"):
        vals = []
        for hbar in (1.0, 2.0):
            sigma = gc.build_hypothesis(kind, bundle.spec, bundle.T, hbar=hbar)
            h = tor.husimi_from_covariance(sigma, hbar=hbar)
            mean, std = tor.click_count_mean_std(h)
            vals.append((h.log_sqrt_det, mean, std))
        diff = max(abs(a - b) for a, b in zip(*vals))
        res[kind] = diff
        if diff > 1e-10:
            raise ValidationFailure(f"hbar check failed for {kind}: results differ by {diff:.3e}")
    return res


def _prc(args, bundle, kind, sigma):
    return validation.sector_probabilities_for(
        kind, bundle.spec, bundle.T, sigma, args.n_samples, args.groups, args.seed, args.threads
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_hypothesis(args, bundle):
    covs = _covariances(args, bundle)
    rows, summary = [], {}
    for kind, sigma in covs.items():
        h = tor.husimi_from_covariance(sigma, label=kind)
        mean, std = tor.click_count_mean_std(h)
        nbar = gc.mean_photon_number(sigma)
        dev = gc.click_photon_relation_check(sigma, mean) if mean > 0 and nbar > 0 else float("nan")
        rows.append([kind, bundle.M, bundle.K, nbar, nbar / bundle.M, mean, std, dev])
        summary[kind] = {"nbar": nbar, "nu": nbar / bundle.M, "mean_clicks": mean, "std_clicks": std, "relation_deviation": dev}
        print(f"{kind}: nu={nbar / bundle.M:.6g} N={nbar:.6g} C={mean:.6g} sigma(C)={std:.6g}")
        if args.write_covariances:
            Path(args.out_dir).mkdir(parents=True, exist_ok=True)
            io.write_covariance(Path(args.out_dir) / f"covariance_{kind.lower()}.txt", sigma)
    header = ["hypothesis", "M", "K", "nbar", "nu", "mean_clicks", "std_clicks", "relation_deviation"]
    return {"hypothesis": (header, rows)}, summary


def cmd_grouped(args, bundle):
    kinds = ["SQUE", "SQUA"] if args.hypothesis == "both" else [args.hypothesis.upper()]
    rows, summary = [], {}
    for kind in kinds:
        dist = phasespace.estimate_grouped(bundle.spec, bundle.T, kind, args.n_samples, args.groups, args.seed, args.threads)
        s = phasespace.summarize(dist)
        for r in dist.rows():
            rows.append([r["C"], r["Pr"], r["stderr"], r["hypothesis"]])
        summary[kind] = {
            "mean_clicks": s.mean,
            "mean_clicks_err": s.mean_err,
            "std_clicks": s.std,
            "std_clicks_err": s.std_err,
            "sum_pr": float(np.sum(dist.probs)),
            "combined_stderr": float(math.sqrt(np.sum(dist.stderr**2))),
            "max_imag": dist.max_imag,
        }
        print(f"{kind}: C={s.mean:.6g} +- {s.mean_err:.2g}  sigma(C)={s.std:.6g} +- {s.std_err:.2g}")
    summary.update({"n_samples": args.n_samples, "groups": args.groups})
    return {"grouped": (["C", "Pr", "stderr", "hypothesis"], rows)}, summary


def cmd_sample(args, bundle):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.sampler == "squashed":
        cfg = sampler.SamplerConfig("SQUA", bundle.spec, bundle.T, args.L, args.seed, args.clicks, args.max_attempts)
        S = sampler.sample_squashed(cfg)
    else:
        sigma = _covariances(args, bundle)[args.hypothesis.upper()]
        S = sampler.exact_sample(sigma, args.L, args.seed, args.clicks)
    path = out / (args.output or "samples.txt")
    io.write_samples(path, S)
    print(f"wrote {len(S)} samples to {path}")
    summary = {"samples": len(S), "complete": S.complete, "source": S.source, "file": str(path)}
    hist = np.bincount(S.click_counts, minlength=bundle.M + 1) if len(S) else np.zeros(bundle.M + 1, int)
    return {"sample_histogram": (["C", "count"], [[c, int(n)] for c, n in enumerate(hist)])}, summary


def cmd_cumulants(args, bundle):
    covs = _covariances(args, bundle)
    S = _samples(args, bundle) if (args.samples or bundle.sample_paths) else None
    subsets = []
    for order in sorted({int(o) for o in args.orders.split(",")}):
        if order <= 2:
            subsets += clickstats.random_mode_subsets(bundle.M, order, math.comb(bundle.M, order), args.seed)
        else:
            subsets += clickstats.random_mode_subsets(bundle.M, order, args.subsets, args.seed)
    records = clickstats.cumulant_table(covs, subsets, S)
    rows = [
        [r.order, " ".join(map(str, r.modes)), r.theory["SQUE"], r.theory["SQUA"], "" if r.empirical is None else r.empirical]
        for r in records
    ]
    summary = {"subsets": len(records)}
    if S is not None:
        summary["correlations"] = clickstats.correlation_summary(records, args.resamples, args.seed)
        for c in summary["correlations"]:
            print(f"order {c['order']} {c['hypothesis']} {c['statistic']}: {c['coefficient']:.6f} +- {c['bootstrap_std']:.2g}")
    header = ["order", "modes", "theory_sque", "theory_squa", "empirical"]
    return {"cumulants": (header, rows)}, summary


def _result_table(res: validation.TestResult):
    return (["C", "L", "delta", "stderr", "ratio"], [[r.C, r.L, r.delta, r.stderr, r.ratio] for r in res.rows])


def cmd_bayes(args, bundle):
    covs = _covariances(args, bundle)
    S = _samples(args, bundle)
    same = np.array_equal(covs["SQUE"], covs["SQUA"])
    prc_e = _prc(args, bundle, "SQUE", covs["SQUE"])
    prc_a = prc_e if same else _prc(args, bundle, "SQUA", covs["SQUA"])
    res = validation.bayesian_test(
        S, covs["SQUE"], covs["SQUA"], prc_e, prc_a, _sectors(args.sectors), args.L, args.precision, args.threads,
        args.randomize, args.seed,
    )
    for r in res.rows:
        print(f"C={r.C:3d} L={r.L:6d} dH={r.delta:+.6e} +- {r.stderr:.2e} r_B={r.ratio:.6g}")
    return {"bayes": _result_table(res)}, res.summary()


def cmd_hog(args, bundle):
    covs = _covariances(args, bundle)
    S = _samples(args, bundle)
    sectors = _sectors(args.sectors) or sorted(int(c) for c in np.unique(S.click_counts))
    if args.adversary:
        A = io.read_samples(args.adversary, bundle.M, source="adversary")
    else:
        parts = []
        for C in sectors:
            have = int(np.sum(S.click_counts == C))
            want = have if args.L is None else min(have, args.L)
            cfg = sampler.SamplerConfig("SQUA", bundle.spec, bundle.T, want, args.seed, C, args.max_attempts)
            parts.append(sampler.sample_squashed(cfg).patterns)
        A = sampler.SampleSet(np.concatenate(parts) if parts else np.zeros((0, bundle.M), np.uint8), "squashed-sampler")
    res = validation.hog_test(S, A, covs["SQUE"], None, sectors, args.L, args.precision, args.threads)
    for r in res.rows:
        print(f"C={r.C:3d} L={r.L:6d} dE={r.delta:+.6e} +- {r.stderr:.2e} r_HOG={r.ratio:.6g}")
    return {"hog": _result_table(res)}, res.summary()


def cmd_selftest(args, _bundle):
    numbers = _sectors(args.only)
    results = acceptance.run_all(numbers)
    rows = [[r.number, r.title, r.status, r.detail] for r in results]
    summary = {"checks": [{"number": r.number, "status": r.status, "detail": r.detail, "elapsed": r.elapsed} for r in results]}
    failed = [r.number for r in results if not r.ok]
    if failed:
        io.emit_report(args.out_dir, {"selftest": (["number", "title", "status", "detail"], rows)}, summary)
        raise ValidationFailure(f"acceptance checks failed: {failed}")
    return {"selftest": (["number", "title", "status", "detail"], rows)}, summary


CONVERTERS = ("transmission-npy", "samples-npy", "samples-dense", "covariance-xpxp", "covariance-npy")


def cmd_convert(args, _bundle):
    src, dst = Path(args.input), Path(args.output)
    if not src.exists():
        raise InputError(f"input file not found: {src}")
    if args.kind == "transmission-npy":
        io.write_transmission(dst, gc.check_transmission(np.load(src)))
    elif args.kind == "samples-npy":
        io.write_samples(dst, sampler.SampleSet(np.load(src)))
    elif args.kind == "samples-dense":
        rows = [line.split() for line in src.read_text().splitlines() if line.strip()]
        io.write_samples(dst, sampler.SampleSet(np.array(rows, dtype=np.uint8)))
    elif args.kind == "covariance-xpxp":
        S = np.loadtxt(src, ndmin=2)
        io.write_covariance(dst, gc.validate_covariance(gc.xpxp_to_xxpp(S) * (2.0 / args.hbar)))
    else:
        S = np.load(src)
        io.write_covariance(dst, gc.validate_covariance(np.asarray(S) * (2.0 / args.hbar)))
    print(f"wrote {dst}")
    return {}, {"converted": str(dst), "kind": args.kind}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _global_options(defaults: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    d = (lambda v: v) if defaults else (lambda v: argparse.SUPPRESS)
    p.add_argument("--seed", type=int, default=d(0), help="master seed for every random stream (default 0)")
    p.add_argument("--precision", choices=["double", "extended"], default=d("double"))
    p.add_argument("--threads", type=int, default=d(os.cpu_count() or 1), help="worker threads (results do not depend on it)")
    p.add_argument("--out-dir", default=d("gbsval-out"), help="directory for CSV/JSON reports")
    p.add_argument("--hbar-check", action="store_true", default=d(False), help="verify hbar-invariance before running")
    p.add_argument("-v", "--verbose", action="store_true", default=d(False))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gbsval", description=__doc__.splitlines()[0], parents=[_global_options(True)])
    sub = parser.add_subparsers(dest="command", required=True)
    g = [_global_options(False)]

    def with_bundle(name, help_):
        sp = sub.add_parser(name, help=help_, parents=g)
        sp.add_argument("bundle", help="bundle manifest file")
        return sp

    def cov_overrides(sp):
        sp.add_argument("--cov-sque", help="covariance file replacing the squeezed hypothesis")
        sp.add_argument("--cov-squa", help="covariance file replacing the squashed hypothesis")

    def prc_options(sp):
        sp.add_argument("--n-samples", type=int, default=1_000_000, help="phase-space samples for Pr(C) when M > 12")
        sp.add_argument("--groups", type=int, default=100)

    sp = with_bundle("hypothesis", "build both hypotheses; report nu, mean and std of clicks")
    cov_overrides(sp)
    sp.add_argument("--write-covariances", action="store_true")
    sp.set_defaults(func=cmd_hypothesis)

    sp = with_bundle("grouped", "phase-space estimate of Pr(C)")
    prc_options(sp)
    sp.add_argument("--hypothesis", choices=["SQUE", "SQUA", "sque", "squa", "both"], default="both")
    sp.set_defaults(func=cmd_grouped)

    sp = with_bundle("sample", "draw click patterns")
    sp.add_argument("--sampler", choices=["squashed", "exact"], default="squashed")
    sp.add_argument("--hypothesis", choices=["SQUE", "SQUA", "sque", "squa"], default="SQUE", help="for --sampler exact")
    sp.add_argument("-L", type=int, default=10_000, help="number of samples")
    sp.add_argument("--clicks", type=int, help="condition on this click number")
    sp.add_argument("--max-attempts", type=int, default=10_000_000)
    sp.add_argument("--output", help="file name inside --out-dir (default samples.txt)")
    cov_overrides(sp)
    sp.set_defaults(func=cmd_sample)

    sp = with_bundle("cumulants", "theoretical vs empirical click cumulants")
    sp.add_argument("--samples", help="samples file (default: first file listed in the bundle)")
    sp.add_argument("--orders", default="1,2,3,4")
    sp.add_argument("--subsets", type=int, default=100_000, help="random subsets per order >= 3")
    sp.add_argument("--resamples", type=int, default=1000, help="bootstrap resamples")
    cov_overrides(sp)
    sp.set_defaults(func=cmd_cumulants)

    sp = with_bundle("bayes", "Bayesian test per click sector")
    sp.add_argument("--samples")
    sp.add_argument("--sectors", help="e.g. 21-26 or 3,4,5 (default: all present)")
    sp.add_argument("-L", type=int, default=validation.DEFAULT_SECTOR_SIZE, help="samples per sector")
    sp.add_argument("--randomize", action="store_true", help="random instead of first-L selection")
    cov_overrides(sp)
    prc_options(sp)
    sp.set_defaults(func=cmd_bayes)

    sp = with_bundle("hog", "HOG test per click sector")
    sp.add_argument("--samples")
    sp.add_argument("--adversary", help="adversary samples file (default: generate squashed samples)")
    sp.add_argument("--sectors")
    sp.add_argument("-L", type=int, default=validation.DEFAULT_SECTOR_SIZE)
    sp.add_argument("--max-attempts", type=int, default=10_000_000)
    cov_overrides(sp)
    sp.set_defaults(func=cmd_hog)

    sp = sub.add_parser("selftest", help="run the acceptance checks", parents=g)
    sp.add_argument("--only", help="comma list / ranges of check numbers")
    sp.set_defaults(func=cmd_selftest, bundle=None)

    sp = sub.add_parser("convert", help="convert external files into the native formats", parents=g)
    sp.add_argument("kind", choices=CONVERTERS)
    sp.add_argument("input")
    sp.add_argument("output")
    sp.add_argument("--hbar", type=float, default=2.0, help="hbar convention of the input covariance")
    sp.set_defaults(func=cmd_convert, bundle=None)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    t0 = time.perf_counter()
    try:
        bundle = io.load_bundle(args.bundle) if args.bundle else None
        summary_extra = {}
        if args.hbar_check and bundle is not None:
            summary_extra["hbar_check"] = _hbar_check(bundle, args.threads)
        tables, summary = args.func(args, bundle)
        summary = {
            "command": args.command,
            "seed": args.seed,
            "precision": args.precision,
            "threads": args.threads,
            "bundle": str(args.bundle) if bundle else None,
            "result": summary,
            "wall_time_s": time.perf_counter() - t0,
            **summary_extra,
        }
        io.emit_report(args.out_dir, tables, summary)
    except ValidationFailure as exc:
        print(f"validation failure: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
