"""Monte Carlo harness: replications, summaries with paired t-tests, figure data."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bandwidth import (
    best_of,
    cv_bandwidth,
    default_r_max,
    minimize_h,
    minimize_h_r,
    nrr_bandwidth,
    nrr_from_sample,
    profile_over_r,
)
from .emfit import DEFAULT_RESTARTS, _child_seed, em_fit, fit_path
from .errors import DomainError, FitError, SummaryError
from .estimator import FittedCdf, ise, ise_cdf
from .kernels import KernelSpec
from .mise import exact_mise, mise_star, relative_mise
from .mixture import catalog, load_distribution
from .specfun import norm_ppf, student_t_cdf

PLUGIN_RULES = ("m0", "aic", "bic")
BASE_METHODS = ("edf", "cv", "nrr", "oracle", "oracle_r1")
METHODS = (
    BASE_METHODS
    + tuple(f"plugin_{m}" for m in PLUGIN_RULES)
    + tuple(f"plugin_{m}_r1" for m in PLUGIN_RULES)
    + tuple(f"parametric_{m}" for m in PLUGIN_RULES)
)
DEFAULT_METHODS = ("edf", "cv", "plugin_bic", "plugin_bic_r1")


@dataclass(frozen=True)
class ExperimentConfig:
    distribution: str
    n: int
    replications: int = 500
    methods: tuple = DEFAULT_METHODS
    seed: int = 0
    r_max: int | None = None
    m_max: int | None = None
    restarts: int = DEFAULT_RESTARTS
    include_inf: bool = False
    rearrange: bool = False
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.replications < 2:
            raise DomainError("replications must be at least 2")
        if not self.methods:
            raise DomainError("methods must be nonempty")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise DomainError(f"unknown methods {bad}")
        if self.n < 2:
            raise DomainError("n must be at least 2")
        truth = self.truth()
        needs_m0 = any(m.endswith("m0") or "_m0_" in m for m in self.methods)
        needs_nm = any(m.startswith("oracle") for m in self.methods)
        if (needs_m0 or needs_nm) and truth.kind != "normal_mixture":
            raise DomainError("m0 and oracle methods need a normal-mixture truth")

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(**d)

    def to_dict(self):
        out = asdict(self)
        out["methods"] = list(self.methods)
        return out

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()

    def truth(self):
        return load_distribution(self.distribution)

    @property
    def resolved_r_max(self) -> int:
        return default_r_max(self.n) if self.r_max is None else self.r_max

    @property
    def resolved_m_max(self) -> int:
        if self.m_max is not None:
            return self.m_max
        m0 = self.truth().true_m
        return m0 + 4 if m0 is not None else 10


@dataclass
class ReplicationRecord:
    index: int
    ise: dict = field(default_factory=dict)
    h: dict = field(default_factory=dict)
    r: dict = field(default_factory=dict)
    m_hat_aic: int | None = None
    m_hat_bic: int | None = None
    m0_failed: bool = False
    errors: dict = field(default_factory=dict)


def _oracles(cfg: ExperimentConfig) -> dict:
    truth = cfg.truth()
    out = {}
    if "oracle" in cfg.methods:
        out["oracle"] = minimize_h_r(truth.mixture, cfg.n, cfg.resolved_r_max, cfg.include_inf)
    if "oracle_r1" in cfg.methods:
        out["oracle_r1"] = minimize_h(truth.mixture, KernelSpec(1), cfg.n)
    return out


def _replicate(cfg: ExperimentConfig, index: int, seq: np.random.SeedSequence, oracles: dict):
    truth = cfg.truth()
    rng = np.random.Generator(np.random.PCG64(seq))
    x = np.sort(truth.sample(cfg.n, rng))
    em_seq = np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (1,))
    rec = ReplicationRecord(index)

    def put(method, h, kernel, value):
        rec.ise[method] = float(value)
        rec.h[method] = float(h)
        rec.r[method] = kernel.label

    def kde(method, h, kernel):
        put(method, h, kernel, ise(FittedCdf(x, h, kernel), truth, cfg.rearrange))

    wanted = set(cfg.methods)
    if "edf" in wanted:
        kde("edf", 0.0, KernelSpec(1))
    if "cv" in wanted:
        try:
            c = cv_bandwidth(x)
            kde("cv", c.h, c.kernel)
        except DomainError as exc:
            rec.errors["cv"] = str(exc)
    if "nrr" in wanted:
        c = nrr_from_sample(x, 1)
        kde("nrr", c.h, c.kernel)
    for name, choice in oracles.items():
        kde(name, choice.h, choice.kernel)

    rules = [m for m in PLUGIN_RULES if any(w in wanted for w in
             (f"plugin_{m}", f"plugin_{m}_r1", f"parametric_{m}"))]
    if not rules:
        return rec
    fits = {}
    try:
        path = fit_path(x, cfg.resolved_m_max, cfg.restarts, em_seq)
    except FitError as exc:
        for m in rules:
            rec.errors[m] = str(exc)
        rec.m0_failed = "m0" in rules
        path = []
    if path:
        fits["aic"] = min(path, key=lambda f: (f.aic, f.m))
        fits["bic"] = min(path, key=lambda f: (f.bic, f.m))
        rec.m_hat_aic, rec.m_hat_bic = fits["aic"].m, fits["bic"].m
    if "m0" in rules:
        m0 = truth.true_m
        if m0 <= len(path):
            fits["m0"] = path[m0 - 1]
        else:
            try:
                fits["m0"] = em_fit(x, m0, cfg.restarts, _child_seed(em_seq, m0))
            except FitError as exc:
                rec.m0_failed = True
                rec.errors["m0"] = str(exc)
    profiles = {}
    for rule in rules:
        fit = fits.get(rule)
        if fit is None:
            continue
        key = fit.m
        if key not in profiles:
            profiles[key] = profile_over_r(fit.mixture, cfg.n, cfg.resolved_r_max, cfg.include_inf)
        prof = profiles[key]
        if f"plugin_{rule}" in wanted:
            b = best_of(prof)
            kde(f"plugin_{rule}", b.h, b.kernel)
        if f"plugin_{rule}_r1" in wanted:
            kde(f"plugin_{rule}_r1", prof[1].h, prof[1].kernel)
        if f"parametric_{rule}" in wanted:
            nm = fit.mixture
            lo, hi = nm.support()
            rec.ise[f"parametric_{rule}"] = ise_cdf(nm.cdf, truth, lo, hi, 0.25 * float(nm.sds.min()))
    return rec


def _run_chunk(args):
    cfg, items, oracles = args
    return [_replicate(cfg, i, s, oracles) for i, s in items]


def run_experiment(cfg: ExperimentConfig, progress=None) -> list:
    """All replications; results depend only on the config, not on the worker count."""
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.replications)
    oracles = _oracles(cfg)
    items = list(enumerate(seqs))
    if cfg.workers <= 1:
        out = []
        for i, s in items:
            out.append(_replicate(cfg, i, s, oracles))
            if progress is not None:
                progress(i + 1, cfg.replications)
        return out
    chunks = [items[k::cfg.workers] for k in range(cfg.workers)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        parts = list(pool.map(_run_chunk, [(cfg, c, oracles) for c in chunks]))
    return sorted((r for p in parts for r in p), key=lambda r: r.index)


# ---------------------------------------------------------------------------
# summaries


def paired_t_test(a, b) -> float:
    """Two-sided paired t-test p-value.

    Zero-variance differences give p = 1 when the mean difference is zero and
    p = 0 otherwise.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise DomainError("paired samples must be one-dimensional and of equal length")
    if a.size < 2:
        raise DomainError("need at least two pairs")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    if sd == 0.0:
        return 1.0 if mean == 0.0 else 0.0
    t = mean / (sd / math.sqrt(d.size))
    return float(min(1.0, 2.0 * student_t_cdf(-abs(t), d.size - 1)))


def significance_marker(p: float) -> str:
    if p < 0.01:
        return ""
    return "dag" if p < 0.05 else "ddag"


def _values(records, method):
    return np.array([r.ise.get(method, np.nan) for r in records], dtype=float)


def compare(records, method: str, baseline: str) -> dict:
    a, b = _values(records, method), _values(records, baseline)
    ok = np.isfinite(a) & np.isfinite(b)
    used = int(ok.sum())
    if used < 2:
        raise SummaryError(f"fewer than two usable records for {method} vs {baseline}")
    mean_a, mean_b = float(a[ok].mean()), float(b[ok].mean())
    rel = 100.0 * (mean_a / mean_b - 1.0)
    p = 1.0 if method == baseline else paired_t_test(a[ok], b[ok])
    return {
        "method": method,
        "baseline": baseline,
        "relative_change": rel,
        "p_value": p,
        "significance": significance_marker(p),
        "worse_than_baseline": rel > 0,
        "mean_ise": mean_a,
        "mean_baseline_ise": mean_b,
        "used": used,
        "excluded": len(records) - used,
    }


def summarize(records, baseline: str = "edf", methods=None) -> list:
    """Relative change in mean ISE versus ``baseline`` with paired t-test p-values.

    Records missing either value are excluded pairwise.
    """
    if len(records) < 2:
        raise SummaryError("need at least two records")
    if methods is None:
        methods = sorted({k for r in records for k in r.ise}, key=METHODS.index)
    rows = [compare(records, m, baseline) for m in methods]
    finite = [row for row in rows if row["method"] != baseline]
    best = min(finite, key=lambda row: row["relative_change"])["method"] if finite else None
    for row in rows:
        row["best_in_group"] = row["method"] == best
    return rows


def standard_summary(records) -> list:
    """The comparisons laid out like the published table: vs EDF, vs CV, vs parametric fit."""
    have = {k for r in records for k in r.ise}
    rows = []
    if "edf" in have:
        rows += summarize(records, "edf", [m for m in METHODS if m in have and m != "edf"
                                           and not m.startswith("parametric")])
    plug = [m for m in METHODS if m.startswith("plugin") and m in have]
    if "cv" in have and plug:
        rows += summarize(records, "cv", [m for m in plug if "m0" not in m])
    for m in plug:
        rule = m.split("_")[1]
        base = f"parametric_{rule}"
        if base in have:
            row = compare(records, m, base)
            row["best_in_group"] = False
            rows.append(row)
    return rows


SUMMARY_FIELDS = ("method", "baseline", "relative_change", "p_value", "significance",
                  "worse_than_baseline", "best_in_group", "mean_ise", "mean_baseline_ise",
                  "used", "excluded")


def records_csv(records, methods) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    head = ["index", "m_hat_aic", "m_hat_bic", "m0_failed"]
    for m in methods:
        head += [f"ise_{m}", f"h_{m}", f"r_{m}"]
    w.writerow(head)
    for rec in records:
        row = [rec.index, rec.m_hat_aic, rec.m_hat_bic, int(rec.m0_failed)]
        for m in methods:
            row += [repr(rec.ise.get(m, float("nan"))), repr(rec.h.get(m, float("nan"))),
                    rec.r.get(m, "")]
        w.writerow(row)
    return buf.getvalue()


def summary_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


# ---------------------------------------------------------------------------
# deterministic curves


FIGURE_FIELDS = ("n", "rel_r1", "h_r1", "rel_inf", "h_inf", "rel_opt", "r_star", "h_opt",
                 "rel_star", "rel_nrr", "h_nrr", "nrr_scale")


def figure_data(nm_id, n_grid, r_max: int = 15, include_inf: bool = True) -> list:
    """Relative MISE curves over n: r = 1, sinc, best finite r, the infeasible bound, NRR."""
    truth = catalog(nm_id) if isinstance(nm_id, str) else None
    if truth is None or truth.kind != "normal_mixture":
        raise DomainError("figure data needs a normal-mixture catalog id")
    nm = truth.mixture
    sigma = nm.sd
    zeta = nm.iqr() / (2.0 * norm_ppf(0.75))
    rows = []
    for n in n_grid:
        n = int(n)
        prof = profile_over_r(nm, n, r_max, include_inf=False)
        opt = best_of(prof)
        row = {
            "n": n,
            "rel_r1": relative_mise(prof[1].predicted_mise, nm, n),
            "h_r1": prof[1].h,
            "rel_opt": relative_mise(opt.predicted_mise, nm, n),
            "r_star": opt.kernel.r,
            "h_opt": opt.h,
            "rel_star": relative_mise(mise_star(nm, n), nm, n),
        }
        if include_inf:
            s = minimize_h(nm, KernelSpec.infinite(), n)
            row["rel_inf"], row["h_inf"] = relative_mise(s.predicted_mise, nm, n), s.h
        else:
            row["rel_inf"], row["h_inf"] = float("nan"), float("nan")
        nrr = nrr_bandwidth(sigma, nm.iqr(), n, 1)
        row["rel_nrr"] = relative_mise(exact_mise(nm, KernelSpec(1), nrr.h, n).mise, nm, n)
        row["h_nrr"] = nrr.h
        row["nrr_scale"] = "sigma" if sigma <= zeta else "zeta"
        rows.append(row)
    return rows


def figure_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=FIGURE_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                    for k, v in row.items()})
    return buf.getvalue()
