"""Monte Carlo studies and the expanding-window application protocol.

``run_mc`` simulates panels from the calibrated process, runs every
requested (method, specification) pair per replication, and aggregates
bias, dispersion and confidence-interval coverage.  Specifications follow
the usual panel ladder: (1) intercept only, (2) firm effects, (3) time
effects, (4) both.

``expanding_window`` re-estimates a model on growing year windows
(first window start..start_end, then one more year at a time), re-applying
the two-years-per-firm filter inside every window, and emits a tidy table
of estimates and intervals per (window, method, coefficient).

Replications are independent substreams of one master seed, so results
are bit-identical for a given configuration regardless of the worker
count.
"""

from __future__ import annotations

import re
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .data_model import EstimateReport, PanelData
from .dc import panel_dc_estimate, pooled_design
from .dgp import DgpConfig, generate_panel
from .errors import (
    CalibrationError,
    NearSingularDenominatorError,
    NotFoundError,
    ParameterError,
)
from .estimators import WeakDenominatorWarning, asy_var_3m, geary_3m, ols
from .inference import (
    BootstrapConfig,
    dc_bootstrap_ci,
    dc_bootstrap_gamma_ci,
    ols_wald_cis,
    wald_ci,
)
from .rng import derive_seed, spawn_rng

__all__ = [
    "SPEC_EFFECTS",
    "McConfig",
    "McCell",
    "McSummary",
    "WindowRow",
    "WindowResult",
    "parse_method",
    "method_label",
    "estimate_panel",
    "run_mc",
    "summarize_tables",
    "expanding_window",
    "PAPER_SCALE_REFERENCE",
]

SPEC_EFFECTS = {1: (False, False), 2: (True, False), 3: (False, True), 4: (True, True)}

_METHOD_RE = re.compile(r"^(ols|3m|dc(\d*))$")


def parse_method(method: str) -> tuple[str, int | None]:
    """Split a method token into (kind, blocks_per_year).

    Tokens: ``ols``, ``3m``, ``dc`` (defaults to 2 blocks per year), or
    ``dc<N>`` for N blocks per year.
    """
    m = _METHOD_RE.match(method.strip().lower())
    if not m:
        raise ParameterError(f"unknown method {method!r} (expected ols, 3m, or dc<N>)")
    kind = m.group(1)
    if kind.startswith("dc"):
        bpy = int(m.group(2)) if m.group(2) else 2
        if bpy < 1:
            raise ParameterError("blocks per year must be >= 1")
        return "dc", bpy
    return kind, None


def method_label(method: str, T: int) -> str:
    kind, bpy = parse_method(method)
    if kind == "dc":
        return f"DC({bpy * T})"
    return kind.upper()


def _gamma_names(k: int, has_intercept: bool) -> tuple:
    names = ["const"] if has_intercept else []
    names += [f"z{j+1}" for j in range(k)]
    return tuple(names)


def estimate_panel(
    panel: PanelData,
    method: str,
    fe: bool = False,
    te: bool = False,
    blocks_per_year: int | None = None,
    mode: str = "random",
    alpha: float = 0.05,
    bootstrap_draws: int = 399,
    seed: int = 0,
    gamma_names: tuple | None = None,
) -> EstimateReport:
    """One full estimate: point values, intervals, replay metadata.

    For ``dc`` the partition stream and the bootstrap stream are the
    ``"dc-partition"`` and ``"dc-bootstrap"`` substreams of ``seed``; the
    other methods are deterministic given the data.
    """
    kind, parsed_bpy = parse_method(method)
    if kind == "dc":
        bpy = blocks_per_year if blocks_per_year is not None else parsed_bpy
    elif blocks_per_year is not None:
        raise ParameterError("blocks_per_year applies to the dc method only")
    pooled, has_intercept = pooled_design(panel, fe=fe, te=te)
    names = gamma_names or _gamma_names(panel.k, has_intercept)
    config = {
        "method": kind,
        "fe": fe,
        "te": te,
        "alpha": alpha,
        "partition_mode": mode,
    }

    if kind == "ols":
        beta, gamma = ols(pooled)
        beta_ci, gamma_cis = ols_wald_cis(pooled, alpha)
        return EstimateReport(
            method="ols", beta_hat=beta, gamma_hat=gamma, gamma_names=names,
            ci_beta=beta_ci.as_tuple(),
            ci_gamma=tuple(ci.as_tuple() for ci in gamma_cis),
            seed=seed, config=config,
        )

    if kind == "3m":
        beta, gamma = geary_3m(pooled)
        variance = asy_var_3m(pooled, beta)
        beta_ci = wald_ci(beta, variance, alpha)
        gamma_cis = _gamma_wald_3m(pooled, beta, variance, alpha)
        return EstimateReport(
            method="3m", beta_hat=beta, gamma_hat=gamma, gamma_names=names,
            ci_beta=beta_ci.as_tuple(),
            ci_gamma=tuple(ci.as_tuple() for ci in gamma_cis),
            seed=seed, config=config,
        )

    config.update({"blocks_per_year": bpy, "bootstrap_draws": bootstrap_draws})
    rng = spawn_rng(seed, "dc-partition")
    beta, gamma, subs = panel_dc_estimate(
        panel, blocks_per_year=bpy, fe=fe, te=te, mode=mode, rng=rng
    )
    boot = BootstrapConfig(
        n_draws=bootstrap_draws, alpha=alpha, seed=derive_seed(seed, "dc-bootstrap")
    )
    beta_ci, beta_draws = dc_bootstrap_ci(subs, beta, boot)
    if pooled.k > 0:
        gamma_cis = dc_bootstrap_gamma_ci(pooled, beta_draws, boot)
    else:
        gamma_cis = []
    return EstimateReport(
        method="dc", beta_hat=beta, gamma_hat=gamma, gamma_names=names,
        ci_beta=beta_ci.as_tuple(),
        ci_gamma=tuple(ci.as_tuple() for ci in gamma_cis),
        subsample_estimates=subs.values, n_degenerate_blocks=subs.n_degenerate,
        seed=seed, config=config,
    )


def _gamma_wald_3m(pooled, beta, beta_variance, alpha):
    """Normal intervals for the control coefficients of the ratio estimator.

    ``gamma(b) = (Z'Z)^{-1} Z'(y - x b)`` is linear in b, so the variance
    combines the least-squares noise at fixed b with the slope-sensitivity
    term (cross term ignored; benchmarking convenience).
    """
    z = pooled.z
    if z.shape[1] == 0:
        return []
    ztz_inv = np.linalg.inv(z.T @ z)
    sens = ztz_inv @ (z.T @ pooled.x)
    gamma = ztz_inv @ (z.T @ (pooled.y - pooled.x * beta))
    resid = pooled.y - pooled.x * beta - z @ gamma
    dof = max(len(resid) - z.shape[1], 1)
    sigma2 = float(resid @ resid) / dof
    var = np.diag(ztz_inv) * sigma2 + sens ** 2 * beta_variance
    return [wald_ci(float(g), float(v), alpha) for g, v in zip(gamma, var)]


@dataclass(frozen=True)
class McConfig:
    """One Monte Carlo study: design, replications, methods, specs."""

    dgp: DgpConfig = field(default_factory=DgpConfig)
    reps: int = 500
    methods: tuple = ("ols", "3m", "dc2")
    specs: tuple = (1,)
    alpha: float = 0.05
    bootstrap_draws: int = 399
    partition_mode: str = "random"
    seed: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.reps < 1:
            raise ParameterError("reps must be >= 1")
        for m in self.methods:
            parse_method(m)
        for s in self.specs:
            if s not in SPEC_EFFECTS:
                raise ParameterError(f"unknown spec {s!r} (use 1..4)")
        if self.threads < 1:
            raise ParameterError("threads must be >= 1")


@dataclass(frozen=True)
class McCell:
    method: str
    spec: int
    coef: str
    mean: float
    sd: float
    coverage: float
    n_degenerate: int
    reps: int


@dataclass(frozen=True)
class McSummary:
    cells: tuple
    config: dict

    def to_csv_text(self) -> str:
        lines = ["method,spec,coef,mean,sd,coverage,n_degenerate,reps"]
        for c in self.cells:
            lines.append(
                f"{c.method},{c.spec},{c.coef},{c.mean!r},{c.sd!r},"
                f"{c.coverage!r},{c.n_degenerate},{c.reps}"
            )
        return "\n".join(lines) + "\n"


def _rep_records(cfg: McConfig, rep: int) -> list[dict]:
    dgp_cfg = replace(cfg.dgp, seed=derive_seed(cfg.seed, "rep", rep))
    try:
        panel = generate_panel(dgp_cfg).to_panel()
    except CalibrationError as exc:
        raise CalibrationError(f"replication {rep}: {exc}") from exc
    records = []
    for spec in cfg.specs:
        fe, te = SPEC_EFFECTS[spec]
        for method in cfg.methods:
            est_seed = derive_seed(cfg.seed, "est", rep, spec, method)
            base = {"method": method, "spec": spec, "rep": rep}
            try:
                with warnings.catch_warnings():
                    # wild-but-finite ratio draws belong in the summary rows
                    warnings.simplefilter("ignore", WeakDenominatorWarning)
                    report = estimate_panel(
                        panel, method, fe=fe, te=te, mode=cfg.partition_mode,
                        alpha=cfg.alpha, bootstrap_draws=cfg.bootstrap_draws,
                        seed=est_seed,
                    )
            except NearSingularDenominatorError:
                records.append({**base, "degenerate": True})
                continue
            gamma_idx = next(
                (i for i, name in enumerate(report.gamma_names) if name != "const"),
                None,
            )
            rec = {
                **base,
                "degenerate": False,
                "beta": report.beta_hat,
                "beta_lo": report.ci_beta[0],
                "beta_hi": report.ci_beta[1],
                "n_degenerate": report.n_degenerate_blocks,
            }
            if gamma_idx is not None and len(report.gamma_hat) > gamma_idx:
                rec["gamma"] = float(report.gamma_hat[gamma_idx])
                if len(report.ci_gamma) > gamma_idx:
                    rec["gamma_lo"], rec["gamma_hi"] = report.ci_gamma[gamma_idx]
            records.append(rec)
    return records


def _rep_worker(args) -> list[dict]:
    return _rep_records(*args)


def run_mc(cfg: McConfig) -> McSummary:
    """Run the full study; deterministic given ``cfg`` (incl. seed)."""
    tasks = [(cfg, rep) for rep in range(cfg.reps)]
    if cfg.threads > 1:
        with ProcessPoolExecutor(max_workers=cfg.threads) as pool:
            chunk = max(1, cfg.reps // (cfg.threads * 8))
            per_rep = list(pool.map(_rep_worker, tasks, chunksize=chunk))
    else:
        per_rep = [_rep_records(cfg, rep) for rep in range(cfg.reps)]

    truth = {"beta": cfg.dgp.beta, "gamma": cfg.dgp.gamma}
    cells = []
    for spec in cfg.specs:
        for method in cfg.methods:
            recs = [
                r for rep in per_rep for r in rep
                if r["method"] == method and r["spec"] == spec
            ]
            label = method_label(method, cfg.dgp.T)
            n_degen = sum(r.get("n_degenerate", 0) for r in recs) + sum(
                1 for r in recs if r["degenerate"]
            )
            for coef in ("beta", "gamma"):
                vals = np.array([r[coef] for r in recs if coef in r])
                hits = [
                    r[f"{coef}_lo"] <= truth[coef] <= r[f"{coef}_hi"]
                    for r in recs
                    if f"{coef}_lo" in r
                ]
                if len(vals) == 0:
                    continue
                cells.append(
                    McCell(
                        method=label, spec=spec, coef=coef,
                        mean=float(np.mean(vals)),
                        sd=float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0,
                        coverage=float(np.mean(hits)) if hits else float("nan"),
                        n_degenerate=n_degen, reps=len(vals),
                    )
                )
    config_echo = {
        "dgp": cfg.dgp.to_dict(), "reps": cfg.reps,
        "methods": list(cfg.methods), "specs": list(cfg.specs),
        "alpha": cfg.alpha, "bootstrap_draws": cfg.bootstrap_draws,
        "partition_mode": cfg.partition_mode, "seed": cfg.seed,
    }
    return McSummary(cells=tuple(cells), config=config_echo)


def summarize_tables(summary: McSummary) -> str:
    """Aligned text rendering of a Monte Carlo summary."""
    header = f"{'method':<10} {'spec':>4} {'coef':<6} {'mean':>10} {'sd':>10} {'coverage':>9} {'degen':>6}"
    lines = [header, "-" * len(header)]
    for c in summary.cells:
        cov = f"{c.coverage:9.3f}" if np.isfinite(c.coverage) else f"{'--':>9}"
        lines.append(
            f"{c.method:<10} {c.spec:>4} {c.coef:<6} {c.mean:>10.4f} {c.sd:>10.4f} {cov} {c.n_degenerate:>6}"
        )
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class WindowRow:
    end_year: int
    method: str
    coef: str
    estimate: float
    lo: float
    hi: float


@dataclass(frozen=True)
class WindowResult:
    rows: tuple
    start_year: int

    def to_csv_text(self) -> str:
        lines = ["end_year,method,coef,estimate,lo,hi"]
        for r in self.rows:
            lines.append(
                f"{r.end_year},{r.method},{r.coef},{r.estimate!r},{r.lo!r},{r.hi!r}"
            )
        return "\n".join(lines) + "\n"


def _window_panel(panel: PanelData, end_year: int) -> PanelData:
    mask = panel.year <= end_year
    if not np.any(mask):
        raise NotFoundError(f"window up to {end_year} contains no data")
    firm, year = panel.firm_id[mask], panel.year[mask]
    y, x, z = panel.y[mask], panel.x[mask], panel.z[mask]
    if len(np.unique(year)) > 1:
        firms, counts = np.unique(firm, return_counts=True)
        multi = firms[counts >= 2]
        keep = np.isin(firm, multi)
        if not np.any(keep):
            raise NotFoundError(f"window up to {end_year} has no multi-year firms")
        firm, year, y, x, z = firm[keep], year[keep], y[keep], x[keep], z[keep]
    return PanelData(firm_id=firm, year=year, y=y, x=x, z=z,
                     firm_labels=panel.firm_labels)


def expanding_window(
    panel: PanelData,
    start_end: int,
    methods: tuple = ("ols", "3m", "dc2"),
    fe: bool = True,
    alpha: float = 0.05,
    bootstrap_draws: int = 399,
    partition_mode: str = "random",
    seed: int = 0,
) -> WindowResult:
    """Estimates on year windows [first_year, end] for end = start_end..last.

    Per window and method the estimation seed is
    ``derive_seed(seed, "window", end_year, method)``, so a single window
    reproduces a direct :func:`estimate_panel` call bit-exactly.
    """
    years = panel.years()
    first, last = int(years[0]), int(years[-1])
    if start_end < first or start_end > last:
        raise NotFoundError(
            f"start_end={start_end} outside panel years [{first}, {last}]"
        )
    rows = []
    for end in range(start_end, last + 1):
        win = _window_panel(panel, end)
        for method in methods:
            est_seed = derive_seed(seed, "window", end, method)
            report = estimate_panel(
                win, method, fe=fe, mode=partition_mode, alpha=alpha,
                bootstrap_draws=bootstrap_draws, seed=est_seed,
            )
            rows.append(WindowRow(end, method, "beta", report.beta_hat,
                                  report.ci_beta[0], report.ci_beta[1]))
            for name, g, ci in zip(report.gamma_names, report.gamma_hat, report.ci_gamma):
                rows.append(WindowRow(end, method, name, float(g), ci[0], ci[1]))
    return WindowResult(rows=tuple(rows), start_year=first)


# Reference cells for the full-scale configuration (n=3000, T=20, 20000
# replications): mean and standard deviation of the slope and control
# estimates per method and specification, echoed by the CLI's
# --paper-scale mode for comparison.
PAPER_SCALE_REFERENCE = {
    0.0: {
        ("OLS", 1): ((0.000, 0.000), (0.050, 0.002)),
        ("OLS", 2): ((0.000, 0.000), (0.050, 0.002)),
        ("OLS", 3): ((0.000, 0.000), (0.050, 0.002)),
        ("OLS", 4): ((0.000, 0.000), (0.050, 0.002)),
        ("3M", 1): ((0.036, 7.513), (-0.017, 14.081)),
        ("3M", 2): ((0.039, 2.774), (-0.012, 4.483)),
        ("3M", 3): ((0.007, 1.418), (0.038, 2.717)),
        ("3M", 4): ((0.031, 4.966), (0.004, 7.430)),
        ("DC(20)", 1): ((0.001, 0.008), (0.048, 0.015)),
        ("DC(20)", 2): ((0.001, 0.008), (0.049, 0.013)),
        ("DC(20)", 3): ((0.001, 0.007), (0.048, 0.014)),
        ("DC(20)", 4): ((0.001, 0.008), (0.049, 0.013)),
        ("DC(40)", 1): ((0.001, 0.005), (0.047, 0.010)),
        ("DC(40)", 2): ((0.001, 0.005), (0.048, 0.009)),
        ("DC(40)", 3): ((0.001, 0.005), (0.047, 0.010)),
        ("DC(40)", 4): ((0.001, 0.005), (0.048, 0.008)),
    },
    0.025: {
        ("OLS", 1): ((0.011, 0.000), (0.077, 0.001)),
        ("OLS", 2): ((0.009, 0.000), (0.075, 0.001)),
        ("OLS", 3): ((0.011, 0.000), (0.077, 0.001)),
        ("OLS", 4): ((0.009, 0.000), (0.075, 0.001)),
        ("3M", 1): ((0.025, 0.000), (0.050, 0.002)),
        ("3M", 2): ((0.025, 0.001), (0.050, 0.002)),
        ("3M", 3): ((0.025, 0.000), (0.050, 0.002)),
        ("3M", 4): ((0.025, 0.001), (0.050, 0.002)),
        ("DC(20)", 1): ((0.026, 0.007), (0.048, 0.014)),
        ("DC(20)", 2): ((0.024, 0.010), (0.051, 0.015)),
        ("DC(20)", 3): ((0.026, 0.007), (0.048, 0.014)),
        ("DC(20)", 4): ((0.025, 0.010), (0.050, 0.015)),
        ("DC(40)", 1): ((0.026, 0.007), (0.049, 0.013)),
        ("DC(40)", 2): ((0.018, 0.007), (0.061, 0.011)),
        ("DC(40)", 3): ((0.026, 0.007), (0.049, 0.013)),
        ("DC(40)", 4): ((0.019, 0.008), (0.059, 0.012)),
    },
}
