"""Closed-form cross-sectional estimators.

Two point estimators for the slope of a mismeasured regressor:

* ``ols`` — least squares of y on [x, z]; inconsistent under measurement
  error (attenuated toward zero) but a useful benchmark.
* ``geary_3m`` — the third-order moment ratio ``sum(x*y^2) / sum(x^2*y)``
  computed on control-residualized data; consistent when the latent slope
  and the latent third moment are both non-zero.

``partial_out`` residualizes two disjoint index sets each against its own
subset's control projection, preserving independence across the subsets:
``x_dot_i = x_i - z_i' (sum_{R1} z z')^{-1} sum_{R1} z x`` on the first
set, and the analogous double-dot quantities on the second.

All moment sums use compensated (exactly rounded) accumulation via
``math.fsum``; third-order moments are cancellation-prone near a zero
slope.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .data_model import CrossSection
from .errors import NearSingularDenominatorError, ParameterError, SingularDesignError

__all__ = [
    "MomentSums",
    "Residualized",
    "WeakDenominatorWarning",
    "moment_sums",
    "ols",
    "geary_3m",
    "asy_var_3m",
    "partial_out",
    "gamma_ci_draws",
]

DENOM_RTOL = 1e-12
WEAK_DENOM_TSTAT = 2.0


class WeakDenominatorWarning(UserWarning):
    """Third-moment denominator is statistically indistinguishable from zero.

    Emitted when the denominator sum is within ~2 standard errors of zero,
    the signature of a (near-)zero latent slope or latent third moment,
    where the moment-ratio estimate is unreliable.
    """


@dataclass(frozen=True)
class MomentSums:
    """Compensated moment sums entering the ratio estimators."""

    s_xy2: float
    s_x2y: float
    s_xy: float
    s_x2: float
    n: int


def moment_sums(x: np.ndarray, y: np.ndarray) -> MomentSums:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ParameterError("x and y must be one-dimensional with equal length")
    return MomentSums(
        s_xy2=math.fsum(x * y * y),
        s_x2y=math.fsum(x * x * y),
        s_xy=math.fsum(x * y),
        s_x2=math.fsum(x * x),
        n=len(x),
    )


def _lstsq_coef(design: np.ndarray, target: np.ndarray, what: str) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    if rank < design.shape[1]:
        raise SingularDesignError(f"{what} is rank deficient")
    return coef


def _residualize(values: np.ndarray, z: np.ndarray, what: str) -> np.ndarray:
    """Least-squares residuals of ``values`` on ``z`` (identity when k=0)."""
    if z.shape[1] == 0:
        return values
    coef = _lstsq_coef(z, values, what)
    return values - z @ coef


def _check_denominator(x: np.ndarray, y: np.ndarray, s_x2y: float) -> None:
    scale = math.sqrt(math.fsum(x ** 4) * math.fsum(y ** 2))
    if abs(s_x2y) <= DENOM_RTOL * scale:
        raise NearSingularDenominatorError(
            "third-moment denominator is numerically zero; the latent slope "
            "or the latent third moment is (close to) zero and the moment "
            "ratio is ill-defined"
        )
    spread = math.sqrt(math.fsum((x * x * y) ** 2))
    if spread > 0 and abs(s_x2y) < WEAK_DENOM_TSTAT * spread:
        warnings.warn(
            "third-moment denominator is within ~2 standard errors of zero; "
            "the moment-ratio estimate is unreliable in this regime",
            WeakDenominatorWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class Residualized:
    """Control residuals on two disjoint subsets (own-subset projections)."""

    x_dot: np.ndarray
    y_dot: np.ndarray
    x_ddot: np.ndarray
    y_ddot: np.ndarray


def partial_out(cs: CrossSection, idx1, idx2) -> Residualized:
    """Residualize x and y against the controls, separately per subset.

    Each subset uses only its own rows to estimate the projection, so
    functions of the first subset's residuals stay independent of the
    second subset's under independent sampling.
    """
    idx1 = np.asarray(idx1)
    idx2 = np.asarray(idx2)
    if np.intersect1d(idx1, idx2).size > 0:
        raise ParameterError("index sets overlap")
    out = []
    for label, idx in (("first subset", idx1), ("second subset", idx2)):
        z = cs.z[idx]
        x = cs.x[idx]
        y = cs.y[idx]
        out.append(_residualize(x, z, f"controls on the {label}"))
        out.append(_residualize(y, z, f"controls on the {label}"))
    return Residualized(x_dot=out[0], y_dot=out[1], x_ddot=out[2], y_ddot=out[3])


def ols(cs: CrossSection) -> tuple[float, np.ndarray]:
    """Least squares of y on [x, z].

    Returns ``(beta_hat, gamma_hat)`` where ``gamma_hat`` holds the control
    coefficients in column order (empty when there are no controls).
    """
    design = np.column_stack([cs.x, cs.z])
    coef = _lstsq_coef(design, cs.y, "design matrix [x, z]")
    return float(coef[0]), coef[1:]


def geary_3m(cs: CrossSection) -> tuple[float, np.ndarray]:
    """Third-order moment ratio on control-residualized data.

    Controls are partialled out on the full sample, then
    ``beta_hat = sum(x. * y.^2) / sum(x.^2 * y.)``.  The control
    coefficients are recovered by least squares of ``y - x*beta_hat`` on z.

    Raises
    ------
    NearSingularDenominatorError
        When ``|sum(x.^2 y.)|`` is below ``1e-12 * sqrt(sum(x.^4) sum(y.^2))``.
    """
    x = _residualize(cs.x, cs.z, "controls")
    y = _residualize(cs.y, cs.z, "controls")
    sums = moment_sums(x, y)
    _check_denominator(x, y, sums.s_x2y)
    beta = sums.s_xy2 / sums.s_x2y
    if cs.k > 0:
        gamma = _lstsq_coef(cs.z, cs.y - cs.x * beta, "controls")
    else:
        gamma = np.empty(0)
    return float(beta), gamma


def asy_var_3m(cs: CrossSection, beta_hat: float) -> float:
    """Sandwich plug-in variance of the third-moment ratio estimator.

    ``(1/n) * mean(x^2 y^2 (y - x*beta)^2) / mean(x^2 y)^2`` evaluated on
    the same control-residualized data as :func:`geary_3m`.
    """
    x = _residualize(cs.x, cs.z, "controls")
    y = _residualize(cs.y, cs.z, "controls")
    n = len(x)
    s_x2y = math.fsum(x * x * y)
    _check_denominator(x, y, s_x2y)
    resid = y - x * beta_hat
    num = math.fsum((x * y * resid) ** 2) / n
    den = (s_x2y / n) ** 2
    return num / den / n


def gamma_ci_draws(cs: CrossSection, beta_draws: np.ndarray) -> np.ndarray:
    """Control coefficients implied by each slope draw, shape (n_draws, k).

    ``gamma(b) = (Z'Z)^{-1} Z'(y - x b)`` is linear in ``b``, so the full
    matrix is two solves.
    """
    if cs.k == 0:
        raise ParameterError("no controls to draw coefficients for")
    beta_draws = np.atleast_1d(np.asarray(beta_draws, dtype=float))
    ztz = cs.z.T @ cs.z
    try:
        base = np.linalg.solve(ztz, cs.z.T @ cs.y)
        slope = np.linalg.solve(ztz, cs.z.T @ cs.x)
    except np.linalg.LinAlgError:
        raise SingularDesignError("controls are rank deficient") from None
    return base[None, :] - np.outer(beta_draws, slope)
