"""Calibrated data-generating process for the simulation study.

The design mimics a firm panel of investment (outcome), Tobin's q
(mismeasured regressor) and cash flow (perfectly measured control):

1. All shocks are i.i.d. Gamma draws standardized to mean 0, variance 1.
2. The latent regressor and the control follow AR(1) processes started at
   zero ten periods before the sample and cut to the last ``T`` periods.
3. The latent pair is affinely recolored so its pooled sample covariance
   matches a fixed target: the observed-data covariance matrix ``C`` with
   the first variance scaled by ``tau_sq`` (the signal share of the
   mismeasured regressor) and the off-diagonal scaled by ``sqrt(tau_sq)``.
4. Observables add standardized-Gamma noise: measurement noise scaled so
   the OLS attenuation factor equals exactly ``tau_sq``, and outcome noise
   scaled to hit a target outcome variance.

``mu_y`` and ``sigma_y_sq`` are artifact defaults chosen to resemble an
investment rate (mean 0.145, sd 0.15); the original calibration data is
not public.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .data_model import PanelData
from .errors import CalibrationError, DegeneracyError, ParameterError
from .rng import spawn_rng

__all__ = [
    "DgpConfig",
    "SimulatedPanel",
    "sample_std_gamma",
    "simulate_ar1",
    "target_covariance",
    "generate_panel",
]


@dataclass(frozen=True)
class DgpConfig:
    """Full parameterization of the simulated panel.

    Defaults reproduce the large-scale study design (n=3000, T=20); the
    Monte Carlo harness overrides ``n``, ``T`` and ``seed`` per run.
    """

    n: int = 3000
    T: int = 20
    beta: float = 0.025
    gamma: float = 0.05
    shape_u: float = 0.32        # outcome noise
    shape_e: float = 0.09        # measurement noise
    shape_v_xi: float = 0.007    # latent-regressor AR(1) innovations
    shape_v_z: float = 2.08      # control AR(1) innovations
    scale: float = 1.0
    phi_xi: float = 0.78
    phi_z: float = 0.48
    delta_xi: float = 0.570
    delta_z: float = 0.094
    tau_sq: float = 0.45
    c11: float = 16.130
    c21: float = 0.489
    c22: float = 0.258
    mu_y: float = 0.145          # artifact default, not a published value
    sigma_y_sq: float = 0.0225   # artifact default, not a published value
    burn_in: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.n < 1 or self.T < 1:
            raise ParameterError("n and T must be positive")
        for name in ("shape_u", "shape_e", "shape_v_xi", "shape_v_z", "scale"):
            if getattr(self, name) <= 0:
                raise ParameterError(f"{name} must be positive")
        if not 0 < self.tau_sq <= 1:
            raise ParameterError("tau_sq must lie in (0, 1]")
        if self.sigma_y_sq <= 0:
            raise ParameterError("sigma_y_sq must be positive")
        if abs(self.phi_xi) >= 1 or abs(self.phi_z) >= 1:
            raise ParameterError("AR(1) coefficients must satisfy |phi| < 1")
        if self.burn_in < 0:
            raise ParameterError("burn_in must be >= 0")
        c = self.cov_matrix
        if np.any(np.linalg.eigvalsh(c) <= 0):
            raise ParameterError("C must be positive definite")

    @property
    def cov_matrix(self) -> np.ndarray:
        return np.array([[self.c11, self.c21], [self.c21, self.c22]])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DgpConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown DGP field(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class SimulatedPanel:
    """Latent and observed matrices of one simulated panel (all n x T)."""

    xi: np.ndarray
    z: np.ndarray
    x: np.ndarray
    y: np.ndarray
    config: DgpConfig = None  # type: ignore[assignment]

    def to_panel(self, first_year: int = 1) -> PanelData:
        """Long-format panel with firm ids 0..n-1 and consecutive years."""
        n, T = self.y.shape
        firm = np.repeat(np.arange(n, dtype=np.int64), T)
        year = np.tile(np.arange(first_year, first_year + T, dtype=np.int64), n)
        return PanelData(
            firm_id=firm, year=year,
            y=self.y.ravel(), x=self.x.ravel(),
            z=self.z.ravel()[:, None],
        )


def sample_std_gamma(shape: float, scale: float, size, rng: np.random.Generator) -> np.ndarray:
    """Gamma(shape, scale) draws standardized by the population moments.

    Returns ``(g - shape*scale) / (sqrt(shape)*scale)`` which has population
    mean 0 and variance 1; the skewness ``2/sqrt(shape)`` is inherited from
    the Gamma law.
    """
    if shape <= 0 or scale <= 0:
        raise ParameterError("shape and scale must be positive")
    g = rng.gamma(shape, scale, size=size)
    return (g - shape * scale) / (math.sqrt(shape) * scale)


def simulate_ar1(delta: float, phi: float, innovations: np.ndarray, burn_in: int) -> np.ndarray:
    """AR(1) recursion from a zero start, discarding the first ``burn_in`` steps.

    ``innovations`` has time on the last axis with length ``T + burn_in``;
    the recursion is ``s_t = delta + phi * s_{t-1} + v_t`` with ``s`` at
    zero before the first innovation.  Returns the last ``T`` values.
    """
    v = np.asarray(innovations, dtype=float)
    total = v.shape[-1]
    if burn_in < 0 or burn_in >= total:
        raise ParameterError(
            f"burn_in must lie in [0, {total}) for {total} innovations"
        )
    out = np.empty_like(v)
    state = np.zeros(v.shape[:-1])
    for t in range(total):
        state = delta + phi * state + v[..., t]
        out[..., t] = state
    return out[..., burn_in:]


def _lower_chol(mat: np.ndarray, what: str) -> np.ndarray:
    try:
        return np.linalg.cholesky(mat)
    except np.linalg.LinAlgError:
        raise DegeneracyError(f"{what} is singular or not positive definite") from None


def target_covariance(
    xi_raw: np.ndarray, z_raw: np.ndarray, C: np.ndarray, tau_sq: float
) -> tuple[np.ndarray, np.ndarray]:
    """Affinely recolor (xi, z) so their pooled covariance hits the target.

    The target is ``[[tau_sq*C11, tau*C21], [tau*C21, C22]]`` with
    ``tau = sqrt(tau_sq)``.  The pooled data is demeaned, whitened by the
    inverse lower-triangular factor of its sample covariance, recolored by
    the lower-triangular factor of the target, and the original pooled
    means are re-added.  After the transform the pooled sample covariance
    (ddof=1) equals the target to floating-point accuracy.
    """
    C = np.asarray(C, dtype=float)
    tau = math.sqrt(tau_sq)
    target = np.array(
        [[tau_sq * C[0, 0], tau * C[1, 0]], [tau * C[1, 0], C[1, 1]]]
    )
    if np.any(np.linalg.eigvalsh(target) <= 0):
        raise DegeneracyError("scaled target covariance is not positive definite")

    flat = np.stack([np.ravel(xi_raw), np.ravel(z_raw)])
    means = flat.mean(axis=1, keepdims=True)
    sample_cov = np.cov(flat, ddof=1)
    if not np.all(np.isfinite(sample_cov)):
        raise DegeneracyError("sample covariance of the latent pair is not finite")
    eigs = np.linalg.eigvalsh(sample_cov)
    if eigs[0] <= 1e-12 * max(eigs[-1], 1e-300):
        raise DegeneracyError("sample covariance of the latent pair is singular")
    L_sample = _lower_chol(sample_cov, "sample covariance of the latent pair")
    L_target = _lower_chol(target, "target covariance")
    transform = L_target @ np.linalg.inv(L_sample)
    recolored = transform @ (flat - means) + means
    xi = recolored[0].reshape(np.shape(xi_raw))
    z = recolored[1].reshape(np.shape(z_raw))
    return xi, z


def generate_panel(cfg: DgpConfig) -> SimulatedPanel:
    """Simulate one panel; bit-identical for identical configs.

    Draw order (fixed for reproducibility): latent-regressor innovations,
    control innovations, measurement noise, outcome noise.  The outcome
    noise standard deviation is ``sqrt(sigma_y_sq - var(systematic))``
    where ``var(systematic)`` is the pooled sample variance (ddof=1) of
    ``xi*beta + z*gamma`` after recoloring; a configuration where that
    square root is imaginary raises :class:`CalibrationError`.
    """
    rng = spawn_rng(cfg.seed, "panel-dgp")
    n, T, burn = cfg.n, cfg.T, cfg.burn_in

    v_xi = sample_std_gamma(cfg.shape_v_xi, cfg.scale, (n, T + burn), rng)
    v_z = sample_std_gamma(cfg.shape_v_z, cfg.scale, (n, T + burn), rng)
    xi_raw = simulate_ar1(cfg.delta_xi, cfg.phi_xi, v_xi, burn)
    z_raw = simulate_ar1(cfg.delta_z, cfg.phi_z, v_z, burn)
    xi, z = target_covariance(xi_raw, z_raw, cfg.cov_matrix, cfg.tau_sq)

    # Measurement noise scaled so the attenuation factor
    # var(xi) / (var(xi) + var(noise)) equals tau_sq exactly:
    # var(noise) = tau_sq^{-1} (1 - tau_sq) * var(xi) with var(xi) = tau_sq*C11.
    var_xi_target = cfg.tau_sq * cfg.c11
    meas_sd = math.sqrt((1.0 - cfg.tau_sq) / cfg.tau_sq * var_xi_target)
    e = sample_std_gamma(cfg.shape_e, cfg.scale, (n, T), rng)
    x = xi + meas_sd * e

    systematic = xi * cfg.beta + z * cfg.gamma
    var_sys = float(np.var(systematic, ddof=1))
    if cfg.sigma_y_sq <= var_sys:
        raise CalibrationError(
            f"sigma_y_sq={cfg.sigma_y_sq} must exceed var(systematic)={var_sys:.6g}"
        )
    u = sample_std_gamma(cfg.shape_u, cfg.scale, (n, T), rng)
    y = cfg.mu_y + systematic + math.sqrt(cfg.sigma_y_sq - var_sys) * u

    return SimulatedPanel(xi=xi, z=z, x=x, y=y, config=cfg)
