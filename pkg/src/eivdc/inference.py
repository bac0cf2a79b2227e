"""Confidence intervals: sign-flip bootstrap for the block-median
estimator, normal (Wald) intervals for the moment-ratio and OLS
estimators.

The bootstrap resamples the residuals ``e_j = subsample_j - beta_hat``
with replacement from the sign-augmented set ``{+e_1, -e_1, ..., +e_m,
-e_m}`` (symmetry enforced because the block ratios are symmetric about
the truth in the degenerate regime).  Each draw re-medians
``beta_hat + e~`` and the interval is built from empirical quantiles of
the centered draws:

    (beta_hat + q_{a/2}, beta_hat + q_{1-a/2}).

Quantiles use linear interpolation between order statistics (position
``p*(m-1)+1``), fixed here for bit-reproducibility.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .data_model import CrossSection
from .dc import SubsampleEstimates
from .errors import ParameterError
from .estimators import gamma_ci_draws
from .rng import spawn_rng

__all__ = [
    "BootstrapConfig",
    "ConfidenceInterval",
    "dc_bootstrap_ci",
    "dc_bootstrap_gamma_ci",
    "wald_ci",
    "ols_wald_cis",
]


@dataclass(frozen=True)
class BootstrapConfig:
    n_draws: int = 399
    alpha: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.n_draws < 1:
            raise ParameterError("n_draws must be >= 1")
        if not 0 < self.alpha < 1:
            raise ParameterError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class ConfidenceInterval:
    lo: float
    hi: float
    level: float
    method: str

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ParameterError(f"interval has lo={self.lo} > hi={self.hi}")

    def contains(self, value: float) -> bool:
        return self.lo <= value <= self.hi

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def as_tuple(self) -> tuple[float, float]:
        return (self.lo, self.hi)


def dc_bootstrap_ci(
    subs: SubsampleEstimates, beta_hat: float, cfg: BootstrapConfig
) -> tuple[ConfidenceInterval, np.ndarray]:
    """Sign-flip bootstrap interval for the block-median estimator.

    Per draw, ``m = len(subs.values)`` residuals are resampled with
    replacement from the 2m-element sign-augmented set and re-medianed.
    Returns the interval and the vector of bootstrap slope draws
    ``beta~_i`` (used downstream for control-coefficient intervals).
    Deterministic given ``cfg.seed``.
    """
    values = subs.values
    m = len(values)
    if m == 0:
        raise ParameterError("no subsample estimates to resample")
    residuals = values - beta_hat
    pool = np.concatenate([residuals, -residuals])
    rng = spawn_rng(cfg.seed, "dc-bootstrap")
    idx = rng.integers(0, 2 * m, size=(cfg.n_draws, m))
    centered = np.median(pool[idx], axis=1)
    lo_q, hi_q = np.quantile(centered, [cfg.alpha / 2, 1 - cfg.alpha / 2])
    ci = ConfidenceInterval(
        lo=float(beta_hat + lo_q), hi=float(beta_hat + hi_q),
        level=1 - cfg.alpha, method="dc_bootstrap",
    )
    return ci, beta_hat + centered


def dc_bootstrap_gamma_ci(
    cs: CrossSection, beta_draws: np.ndarray, cfg: BootstrapConfig
) -> list[ConfidenceInterval]:
    """Per-control intervals from the quantiles of the mapped slope draws."""
    if cs.k == 0:
        raise ParameterError("no controls present")
    draws = gamma_ci_draws(cs, beta_draws)
    out = []
    for j in range(cs.k):
        lo, hi = np.quantile(draws[:, j], [cfg.alpha / 2, 1 - cfg.alpha / 2])
        out.append(ConfidenceInterval(float(lo), float(hi), 1 - cfg.alpha, "dc_bootstrap"))
    return out


def wald_ci(beta_hat: float, variance: float, alpha: float) -> ConfidenceInterval:
    """Normal-quantile interval ``beta_hat +- z_{1-a/2} * sqrt(variance)``."""
    if variance < 0:
        raise ParameterError(f"variance must be >= 0, got {variance}")
    if not 0 < alpha < 1:
        raise ParameterError("alpha must lie in (0, 1)")
    half = float(stats.norm.ppf(1 - alpha / 2)) * np.sqrt(variance)
    return ConfidenceInterval(beta_hat - half, beta_hat + half, 1 - alpha, "wald")


def ols_wald_cis(
    cs: CrossSection, alpha: float
) -> tuple[ConfidenceInterval, list[ConfidenceInterval]]:
    """Textbook OLS intervals for the slope and each control coefficient.

    Homoskedastic covariance ``s^2 (X'X)^{-1}`` with ``X = [x, Z]`` and
    normal quantiles; a benchmarking convenience, not a robust interval.
    """
    design = np.column_stack([cs.x, cs.z])
    n, p = design.shape
    coef, _, rank, _ = np.linalg.lstsq(design, cs.y, rcond=None)
    if rank < p:
        raise ParameterError("design matrix is rank deficient")
    resid = cs.y - design @ coef
    dof = max(n - p, 1)
    sigma2 = float(resid @ resid) / dof
    cov = sigma2 * np.linalg.inv(design.T @ design)
    z = float(stats.norm.ppf(1 - alpha / 2))
    half = z * np.sqrt(np.diag(cov))
    beta_ci = ConfidenceInterval(coef[0] - half[0], coef[0] + half[0], 1 - alpha, "wald")
    gamma_cis = [
        ConfidenceInterval(coef[j] - half[j], coef[j] + half[j], 1 - alpha, "wald")
        for j in range(1, p)
    ]
    return beta_ci, gamma_cis
