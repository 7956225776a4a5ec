"""Command-line front end: ``treegff <command> [flags]``.

Exit codes: 0 success, 2 bad flags, 3 solver failure, 4 acceptance failure.
"""
from __future__ import annotations

import argparse
import filecmp
import math
import re
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from . import acceptance, critical, simulate, spectral
from .ou_core import TreeParams
from .serialize import (CSV_HEADERS, RunManifest, csv_text, gnuplot_script, json_text,
                        manifest_path, write_text)

EXIT_USAGE, EXIT_SOLVER, EXIT_ACCEPTANCE = 2, 3, 4


class UsageError(Exception):
    pass


def parse_int_list(text: str) -> list[int]:
    """``"2"``, ``"2,3,5"`` or the inclusive range ``"2:10"``."""
    try:
        if ":" in text:
            a, b = text.split(":")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse integer list {text!r}") from None
    if not vals:
        raise UsageError(f"empty range {text!r}")
    return vals


def parse_float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as a list of reals") from None


def parse_range(text: str) -> list[float]:
    """Inclusive ``a:b:step``."""
    try:
        a, b, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"--h-range expects a:b:step, got {text!r}") from None
    if step <= 0 or b < a:
        raise UsageError("--h-range needs step > 0 and a <= b")
    k = int(math.floor((b - a) / step + 1e-9))
    return [round(a + i * step, 12) for i in range(k + 1)]


def _degrees(args) -> list[int]:
    text = getattr(args, "d_range", None) or args.d
    if text is None:
        raise UsageError("--d or --d-range is required")
    ds = parse_int_list(text)
    bad = [d for d in ds if d < 2]
    if bad:
        raise UsageError(f"d must be >= 2, got {bad}")
    return ds


def _single_degree(args) -> int:
    ds = _degrees(args)
    if len(ds) != 1:
        raise UsageError("this command takes a single --d")
    return ds[0]


def _controls(args) -> spectral.SolverControls:
    kw = {}
    if getattr(args, "nodes", None) is not None:
        kw["m"] = args.nodes
    if getattr(args, "tol", None) is not None:
        kw["tol"] = args.tol
    if getattr(args, "root_tol", None) is not None:
        kw["root_tol"] = args.root_tol
    try:
        return spectral.SolverControls(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


class Output:
    """Collects the files of one command and writes the manifest last."""

    def __init__(self, args, command):
        self.args = args
        self.command = command
        self.paths = []
        self.t0 = time.perf_counter()
        self.timings = {}

    def emit(self, text: str, suffix: str | None = None):
        out = self.args.out
        if out is None:
            sys.stdout.write(text)
            return None
        path = Path(out)
        if suffix:
            path = path.with_name(path.stem + suffix)
        write_text(path, text)
        self.paths.append(str(path))
        return path

    def finish(self, seed=None):
        if self.args.out is None:
            return
        params = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func",)}
        man = RunManifest(self.command, params, seed=seed,
                          duration_s=time.perf_counter() - self.t0,
                          outputs=list(self.paths), timings=self.timings)
        man.write(manifest_path(self.paths[0] if self.paths else self.args.out))


def _maybe_gnuplot(args, out: Output, csv_path, header, x, y, title):
    if getattr(args, "gnuplot", False) and csv_path is not None:
        write_text(Path(csv_path).with_suffix(".gp"), gnuplot_script(csv_path, x, y, header, title))
        out.paths.append(str(Path(csv_path).with_suffix(".gp")))


def cmd_lambda(args):
    d = _single_degree(args)
    if args.h_range:
        hs = parse_range(args.h_range)
    elif args.h is not None:
        hs = parse_float_list(args.h)
    else:
        raise UsageError("--h or --h-range is required")
    p, ctrl = TreeParams(d), _controls(args)
    results = [spectral.lambda_h(h, p, ctrl) for h in sorted(hs)]
    out = Output(args, "lambda")
    header = CSV_HEADERS["lambda"]
    if args.format == "json":
        out.emit(json_text({"command": "lambda", "d": d, "rows": [r.to_dict() for r in results]}))
    else:
        rows = [(d, r.h, r.lambda_h, r.h_prime, r.eigenpair.residual, r.eigenpair.gap) for r in results]
        path = out.emit(csv_text(header, rows))
        _maybe_gnuplot(args, out, path, header, "h", "lambda_h", f"lambda_h, d={d}")
    out.finish()


def _critical_rows(reports):
    return [[getattr(r, k) for k in CSV_HEADERS["critical"]] for r in reports]


def cmd_hstar(args):
    ctrl = _controls(args)
    reports = [critical.bound_chain(TreeParams(d), ctrl) for d in _degrees(args)]
    _emit_reports(args, "hstar", reports)


def cmd_bounds(args):
    ctrl = _controls(args)
    reports = [critical.bound_chain(TreeParams(d), ctrl) for d in _degrees(args)]
    _emit_reports(args, "bounds", reports)
    if not all(r.chain_ok for r in reports):
        bad = [r.d for r in reports if not r.chain_ok]
        print(f"bound chain violated for d = {bad}", file=sys.stderr)
        return EXIT_SOLVER
    return 0


def _emit_reports(args, command, reports):
    out = Output(args, command)
    if args.format == "json":
        out.emit(json_text({"command": command, "reports": [r.to_dict() for r in reports]}))
    else:
        header = CSV_HEADERS["critical"]
        path = out.emit(csv_text(header, _critical_rows(reports)))
        _maybe_gnuplot(args, out, path, header, "d", "h_star", "critical level h*")
    out.finish()


def cmd_spectrum(args):
    d = _single_degree(args)
    p = TreeParams(d)
    m = args.nodes or 400
    s = p.sigma
    op = spectral.assemble_operator(spectral.build_grid(-12 * s, 12 * s, m, p), p)
    ev = spectral.top_eigenvalues(op, args.top)
    exact = [float(d) ** (1 - n) for n in range(len(ev))]
    out = Output(args, "spectrum")
    if args.format == "json":
        out.emit(json_text({"command": "spectrum", "d": d, "m": m, "eigenvalues": ev, "exact": exact}))
    else:
        header = CSV_HEADERS["spectrum"]
        path = out.emit(csv_text(header, [(d, n, ev[n], exact[n]) for n in range(len(ev))]))
        _maybe_gnuplot(args, out, path, header, "n", "eigenvalue", f"spectrum of L, d={d}")
    out.finish()


def _sim_config(args, depth):
    d = _single_degree(args)
    try:
        return simulate.SimConfig(TreeParams(d), float(args.h), depth, args.replicas, seed=args.seed,
                                  population_cap=args.population_cap)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _front_run_rows(stats):
    R, N1 = stats.front_count.shape
    for r in range(R):
        for n in range(N1):
            c = stats.front_count[r, n]
            yield (r, n, c, stats.martingale[r, n], c > 0, stats.censored[r])


def cmd_simulate(args):
    kind = args.kind
    out = Output(args, f"simulate {kind}")
    if kind == "arcsine":
        cfg = _sim_config(args, 0)
        ns = parse_int_list(args.n)
        rows = [simulate.arcsine_check(n, cfg) for n in ns]
        out.emit(csv_text(CSV_HEADERS["arcsine"],
                          [(r.n, r.mc_estimate, r.se, r.exact, r.z_score) for r in rows]), ".csv")
        summary = {"kind": "arcsine", "d": cfg.params.d, "replicas": cfg.replicas, "seed": cfg.seed,
                   "results": [r.to_dict() for r in rows]}
        out.emit(json_text(summary), ".json")
        out.finish(seed=cfg.seed)
        return 0

    cfg = _sim_config(args, args.depth)
    ctrl = _controls(args)
    res = spectral.lambda_h(cfg.h, cfg.params, ctrl)
    if kind == "martingale" and not res.lambda_h > 1:
        raise UsageError(f"martingale moments need h < h* (lambda_h = {res.lambda_h:.6g})")
    stats = simulate.sample_front(cfg, res)
    fc = simulate.front_check(cfg, res, stats)
    summary = {"kind": kind, "d": cfg.params.d, "h": cfg.h, "depth": cfg.depth,
               "replicas": cfg.replicas, "seed": cfg.seed, "lambda_h": res.lambda_h,
               "censored": stats.n_censored,
               "survival_frequency": [stats.survival_frequency(n) for n in range(cfg.depth + 1)],
               "front": fc.to_dict()}
    if kind == "martingale":
        summary["martingale"] = simulate.martingale_moments(cfg, res, stats).to_dict()
    if not args.summary_only:
        out.emit(csv_text(CSV_HEADERS["front_run"], _front_run_rows(stats)), ".csv")
    out.emit(json_text(summary), ".json")
    out.finish(seed=cfg.seed)
    return 0


def _verify_outputs(out_dir: Path):
    return [out_dir / "verify.csv", out_dir / "verify.json"]


def cmd_verify(args):
    profile = args.profile
    out_dir = Path(args.out) if args.out else Path(tempfile.mkdtemp(prefix="treegff-verify-"))
    out = Output(argparse.Namespace(**{**vars(args), "out": str(out_dir / "verify.csv")}), "verify")
    echo = None if args.quiet else print
    crits = acceptance.run_suite(profile, seed=args.seed, echo=echo)

    def write(crit_list):
        rows = [(c.number, c.name, c.passed) for c in crit_list]
        csv_p, json_p = _verify_outputs(out_dir)
        write_text(csv_p, csv_text(CSV_HEADERS["verify"], rows))
        write_text(json_p, json_text({"profile": profile, "seed": args.seed,
                                      "all_passed": all(c.passed for c in crit_list),
                                      "criteria": [c.to_dict() for c in crit_list]}))
        return csv_p, json_p

    write(crits)
    if not args.no_repro_check:
        # same flags, fresh interpreter: the data files must match byte for byte
        t = time.perf_counter()
        with tempfile.TemporaryDirectory(prefix="treegff-rerun-") as tmp:
            cmd = [sys.executable, "-m", "treegff", "verify", "--profile", profile,
                   "--seed", str(args.seed), "--out", tmp, "--no-repro-check", "--quiet"]
            proc = subprocess.run(cmd, capture_output=True, text=True)
            same = [filecmp.cmp(a, Path(tmp) / a.name, shallow=False) if (Path(tmp) / a.name).exists()
                    else False for a in _verify_outputs(out_dir)]
        repro = acceptance.Criterion(12, "rerun with the same seed gives byte-identical CSV/JSON",
                                     all(same), {"files_identical": same,
                                                 "rerun_exit_code": proc.returncode})
        repro.runtime = time.perf_counter() - t
        crits.append(repro)
        if echo:
            echo(f"{repro.line()}  ({repro.runtime:.1f} s)")
        write(crits)
    csv_p, json_p = _verify_outputs(out_dir)
    out.paths = [str(csv_p), str(json_p)]
    out.timings = {str(c.number): c.runtime for c in crits}
    out.finish(seed=args.seed)
    ok = all(c.passed for c in crits)
    if echo:
        echo(f"{'all criteria passed' if ok else 'acceptance FAILED'}; results in {out_dir}")
    return 0 if ok else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="treegff", description=(
        "Level-set percolation of the Gaussian free field on the (d+1)-regular tree: "
        "principal eigenvalue lambda_h, critical level h*, bounds and Monte-Carlo checks."))
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, d_range=True):
        p.add_argument("--d", help="degree parameter d >= 2 (tree degree d+1); list 2,3 or range 2:10")
        if d_range:
            p.add_argument("--d-range", dest="d_range", help="inclusive range a:b of d values")
        p.add_argument("--out", help="output path (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--gnuplot", action="store_true", help="also write a gnuplot script next to the CSV")

    def solver(p):
        p.add_argument("--nodes", type=int, default=None, help="quadrature nodes m (default 400)")
        p.add_argument("--tol", type=float, default=None, help="truncation tolerance on lambda (default 1e-9)")

    p = sub.add_parser("lambda", help="tabulate lambda_h")
    common(p, d_range=False)
    solver(p)
    p.add_argument("--h", help="barrier value(s), comma separated")
    p.add_argument("--h-range", dest="h_range", help="inclusive a:b:step")
    p.set_defaults(func=cmd_lambda)

    p = sub.add_parser("hstar", help="critical level h* for each d")
    common(p)
    solver(p)
    p.add_argument("--root-tol", dest="root_tol", type=float, default=None,
                   help="tolerance on |lambda_h* - 1| (default 1e-8)")
    p.set_defaults(func=cmd_hstar)

    p = sub.add_parser("bounds", help="closed-form brackets of h* and the bound chain")
    common(p)
    solver(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("spectrum", help="top eigenvalues of the untruncated operator")
    common(p, d_range=False)
    p.add_argument("--top", type=int, default=4)
    p.add_argument("--nodes", type=int, default=None)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("simulate", help="Monte-Carlo runs")
    p.add_argument("kind", choices=("front", "martingale", "arcsine"))
    p.add_argument("--d", default="2")
    p.add_argument("--h", type=float, default=0.0)
    p.add_argument("--depth", type=int, default=10)
    p.add_argument("--n", default="1:4", help="arcsine path length(s)")
    p.add_argument("--replicas", type=int, default=10**4)
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--population-cap", dest="population_cap", type=int, default=10**7)
    p.add_argument("--summary-only", dest="summary_only", action="store_true",
                   help="skip the per-replica CSV")
    p.add_argument("--out", help="output stem; writes <stem>.csv and <stem>.json")
    solver(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run the acceptance criteria")
    p.add_argument("--profile", choices=("fast", "full"), default="fast")
    p.add_argument("--fast", dest="profile", action="store_const", const="fast")
    p.add_argument("--full", dest="profile", action="store_const", const="full")
    p.add_argument("--seed", type=int, default=acceptance.DEFAULT_SEED)
    p.add_argument("--out", help="output directory")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--no-repro-check", dest="no_repro_check", action="store_true",
                   help="skip the second run that checks byte reproducibility")
    p.set_defaults(func=cmd_verify)
    return ap


_NEGATIVE_VALUE = re.compile(r"^-[\d.]")


def _attach_negative_values(argv):
    """Write ``--h-range -2:2:0.5`` as ``--h-range=-2:2:0.5``.

    argparse takes a token such as ``-2:2:0.5`` for an option, because it
    only recognises plain negative numbers.
    """
    out, i = [], 0
    while i < len(argv):
        tok = argv[i]
        if (tok.startswith("--") and "=" not in tok and i + 1 < len(argv)
                and _NEGATIVE_VALUE.match(argv[i + 1])):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
        else:
            out.append(tok)
            i += 1
    return out


def main(argv=None) -> int:
    ap = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = ap.parse_args(_attach_negative_values(argv))
    try:
        rc = args.func(args)
    except UsageError as exc:
        ap.error(str(exc))  # exits with status 2
    except (spectral.EigenSolverError, spectral.TruncationError, critical.BracketError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return rc or 0


if __name__ == "__main__":
    sys.exit(main())
