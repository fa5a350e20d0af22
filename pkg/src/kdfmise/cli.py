"""Command-line interface: ``kdfmise <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import (
    asymptotic_bandwidth,
    cv_bandwidth,
    default_r_max,
    minimize_h_r,
    minimize_h,
    nrr_bandwidth,
    nrr_from_sample,
    plugin_select,
)
from .emfit import DEFAULT_RESTARTS, select_m
from .errors import KdfmiseError
from .estimator import FittedCdf, kdfe_eval, rearrange
from .kernels import KernelSpec
from .mise import exact_mise, relative_mise
from .mixture import catalog, catalog_ids, load_distribution, v0
from .sim import (
    ExperimentConfig,
    figure_csv,
    figure_data,
    records_csv,
    run_experiment,
    standard_summary,
    summary_csv,
)


def parse_grid(text: str) -> np.ndarray:
    """A single number or lo:hi:steps."""
    parts = text.split(":")
    if len(parts) == 1:
        return np.array([float(parts[0])])
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected a number or lo:hi:steps, got {text!r}")
    lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
    if steps < 1:
        raise argparse.ArgumentTypeError("steps must be positive")
    return np.linspace(lo, hi, steps)


def read_data(path: str) -> np.ndarray:
    """First column of a CSV file; a non-numeric first row is treated as a header."""
    vals = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or not row[0].strip():
                continue
            try:
                vals.append(float(row[0]))
            except ValueError:
                if k == 0:
                    continue
                raise
    return np.array(vals)


def _write_rows(out, header, rows):
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _normal_mixture(spec):
    d = load_distribution(spec)
    if d.kind != "normal_mixture":
        raise KdfmiseError(f"{spec} is not a normal mixture")
    return d.mixture


def cmd_catalog(args):
    if args.kernel is not None:
        k = KernelSpec.parse(args.kernel)
        xs = parse_grid(args.grid)
        _write_rows(sys.stdout, ["x", "cdf", "pdf"], zip(xs, k.cdf(xs), k.pdf(xs)))
        return 0
    if args.show:
        d = catalog(args.show)
        info = {"id": args.show, "kind": d.kind}
        if d.mixture is not None:
            info.update(d.mixture.to_dict())
            info["v0"] = v0(d.mixture)
        else:
            info.update({"shape": d.shape, "scale": d.scale, "dof": d.dof})
        print(json.dumps(info, indent=2))
        return 0
    for ident in catalog_ids():
        print(ident)
    return 0


def cmd_mise(args):
    nm = _normal_mixture(args.mixture)
    k = KernelSpec.parse(args.r)
    rows = []
    for h in parse_grid(args.h):
        b = exact_mise(nm, k, float(h), args.n)
        rows.append((float(h), b.isb, b.iv, b.mise, relative_mise(b.mise, nm, args.n)))
    _write_rows(sys.stdout, ["h", "isb", "iv", "mise", "relative_mise"], rows)
    return 0


def cmd_bandwidth(args):
    method = args.method
    if args.data:
        x = read_data(args.data)
        n = x.size
    else:
        if not (args.mixture and args.n):
            raise KdfmiseError("give --data, or --mixture with --n")
        x, n = None, args.n
    r_max = args.rmax if args.rmax else default_r_max(n)
    if method == "oracle":
        nm = _normal_mixture(args.mixture)
        choice = minimize_h_r(nm, n, r_max, args.include_inf) if args.r is None \
            else minimize_h(nm, KernelSpec.parse(args.r), n)
    elif method == "asymptotic":
        choice = asymptotic_bandwidth(_normal_mixture(args.mixture), int(args.r or 1), n)
    elif method == "nrr":
        k = KernelSpec.parse(args.r or 1)
        if x is not None:
            choice = nrr_from_sample(x, k)
        else:
            nm = _normal_mixture(args.mixture)
            choice = nrr_bandwidth(nm.sd, nm.iqr(), n, k)
    elif x is None:
        raise KdfmiseError(f"method {method} needs --data")
    elif method == "cv":
        choice = cv_bandwidth(x)
    else:
        rule = method.split("-")[1]
        choice = plugin_select(x, rule, r_max, args.include_inf, args.restarts, args.seed,
                               args.mmax or 10)
    out = choice.to_dict()
    print(json.dumps(out, indent=2))
    return 0


def cmd_fit(args):
    x = read_data(args.data)
    fit = select_m(x, args.mmax, args.criterion, args.restarts, args.seed)
    print(json.dumps(fit.to_dict(), indent=2))
    return 0


def cmd_estimate(args):
    x = read_data(args.data)
    fc = FittedCdf(x, args.h, KernelSpec.parse(args.r))
    grid = parse_grid(args.grid)
    vals = rearrange(fc, grid) if args.rearrange else kdfe_eval(fc, grid)
    _write_rows(sys.stdout, ["x", "F"], zip(grid, np.atleast_1d(vals)))
    return 0


def cmd_simulate(args):
    cfg_dict = json.loads(Path(args.config).read_text())
    if args.workers:
        cfg_dict["workers"] = args.workers
    if args.full_scale:
        cfg_dict["replications"] = 10000
    cfg = ExperimentConfig.from_dict(cfg_dict)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.full_scale:
        probe = ExperimentConfig.from_dict({**cfg.to_dict(), "replications": 3, "workers": 1})
        t0 = time.perf_counter()
        run_experiment(probe)
        per = (time.perf_counter() - t0) / 3
        eta = per * cfg.replications / max(cfg.workers, 1)
        print(f"projected runtime: {eta / 60:.1f} min", file=sys.stderr)
    t0 = time.perf_counter()
    records = run_experiment(cfg)
    elapsed = time.perf_counter() - t0
    (out / "records.csv").write_text(records_csv(records, cfg.methods))
    rows = standard_summary(records)
    (out / "summary.csv").write_text(summary_csv(rows))
    manifest = {
        "config": cfg.to_dict(),
        "config_sha256": cfg.digest(),
        "seed": cfg.seed,
        "versions": {"kdfmise": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
        "elapsed_seconds": elapsed,
        "excluded_m0": sum(r.m0_failed for r in records),
        "t_test_convention": "zero-variance differences: p=1 if mean is 0, else p=0",
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return 0


def cmd_figure(args):
    ns = np.unique(np.round(np.geomspace(args.nmin, args.nmax, args.points)).astype(int))
    rows = figure_data(args.mixture, ns, args.rmax, not args.no_inf)
    text = figure_csv(rows)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kdfmise", description="Exact-MISE kernel distribution function tools")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("catalog", help="list reference distributions or evaluate a kernel")
    c.add_argument("--show", help="print one catalog entry as JSON")
    c.add_argument("--kernel", help="kernel index r (or inf) to evaluate")
    c.add_argument("--grid", default="-5:5:101", help="lo:hi:steps for --kernel")
    c.set_defaults(func=cmd_catalog)

    c = sub.add_parser("mise", help="exact MISE on a bandwidth grid")
    c.add_argument("--mixture", required=True, help="catalog id or mixture JSON file")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--r", default="1", help="kernel index r or inf")
    c.add_argument("--h", required=True, help="bandwidth or lo:hi:steps")
    c.set_defaults(func=cmd_mise)

    c = sub.add_parser("bandwidth", help="select a bandwidth (and kernel order)")
    c.add_argument("--data")
    c.add_argument("--mixture")
    c.add_argument("--n", type=int)
    c.add_argument("--method", default="oracle",
                   choices=["oracle", "plugin-aic", "plugin-bic", "cv", "nrr", "asymptotic"])
    c.add_argument("--r", help="fix the kernel index (oracle, nrr, asymptotic)")
    c.add_argument("--rmax", type=int)
    c.add_argument("--mmax", type=int)
    c.add_argument("--include-inf", action="store_true")
    c.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_bandwidth)

    c = sub.add_parser("fit", help="EM normal-mixture fit with AIC/BIC selection")
    c.add_argument("--data", required=True)
    c.add_argument("--criterion", choices=["aic", "bic"], default="bic")
    c.add_argument("--mmax", type=int, default=10)
    c.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_fit)

    c = sub.add_parser("estimate", help="evaluate the kernel cdf estimate on a grid")
    c.add_argument("--data", required=True)
    c.add_argument("--h", type=float, required=True)
    c.add_argument("--r", default="1")
    c.add_argument("--grid", required=True, help="lo:hi:steps")
    c.add_argument("--rearrange", action="store_true")
    c.set_defaults(func=cmd_estimate)

    c = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    c.add_argument("--config", required=True)
    c.add_argument("--out", required=True)
    c.add_argument("--workers", type=int)
    c.add_argument("--full-scale", action="store_true", help="10000 replications")
    c.set_defaults(func=cmd_simulate)

    c = sub.add_parser("figure", help="relative-MISE curves over n as CSV")
    c.add_argument("--mixture", required=True)
    c.add_argument("--nmin", type=int, default=2)
    c.add_argument("--nmax", type=int, default=1000)
    c.add_argument("--points", type=int, default=30)
    c.add_argument("--rmax", type=int, default=15)
    c.add_argument("--no-inf", action="store_true")
    c.add_argument("--out")
    c.set_defaults(func=cmd_figure)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except KdfmiseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
