"""GARCH conditional-variance models layered on ARMA residuals.

The variance recursion is

    sigma2_t = alpha0 + sum_i alpha_i e2_{t-i} + sum_j beta_j sigma2_{t-j}

with presample squared residuals and variances both initialized to the
sample variance of the residual series. Estimation is two-stage: the mean
equation is fitted first and GARCH is fitted to its residuals, so
attaching a variance model never moves a point forecast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

import numpy as np
from scipy.signal import lfilter, lfiltic

from .errors import InvalidParameters
from .series import HourlySeries

if TYPE_CHECKING:  # pragma: no cover
    from .estimation import FitOptions, FittedModel

__all__ = [
    "GarchSpec",
    "GarchParams",
    "conditional_variances",
    "garch_log_likelihood",
    "forecast_variance",
    "attach_garch",
]


@dataclass(frozen=True)
class GarchSpec:
    """Orders of a GARCH(p, q) model.

    ``p`` counts squared-residual (ARCH) lags and must be at least 1;
    ``q`` counts lagged-variance (GARCH) terms and may be 0.
    """

    p: int = 1
    q: int = 1

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"ARCH order p must be >= 1, got {self.p}")
        if self.q < 0:
            raise ValueError(f"GARCH order q must be >= 0, got {self.q}")


@dataclass(frozen=True)
class GarchParams:
    """Coefficients of the variance recursion.

    Weak nonnegativity is admitted for ``alpha``/``beta`` so boundary
    estimates are representable; ``sum(alpha) + sum(beta) < 1`` keeps the
    process covariance stationary.
    """

    alpha0: float
    alpha: tuple[float, ...]
    beta: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "alpha0", float(self.alpha0))
        object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))
        if not self.alpha0 > 0.0:
            raise InvalidParameters(f"alpha0 must be positive, got {self.alpha0}")
        if not self.alpha:
            raise InvalidParameters("at least one ARCH coefficient is required")
        if any(a < 0.0 for a in self.alpha) or any(b < 0.0 for b in self.beta):
            raise InvalidParameters("alpha and beta coefficients must be non-negative")
        if self.persistence >= 1.0:
            raise InvalidParameters(
                f"sum(alpha) + sum(beta) = {self.persistence} must be < 1"
            )

    @property
    def persistence(self) -> float:
        return float(sum(self.alpha) + sum(self.beta))

    @property
    def unconditional_variance(self) -> float:
        """Long-run variance alpha0 / (1 - sum(alpha) - sum(beta))."""
        return self.alpha0 / (1.0 - self.persistence)


def _check_orders(spec: GarchSpec, params: GarchParams) -> None:
    if len(params.alpha) != spec.p or len(params.beta) != spec.q:
        raise InvalidParameters(
            f"params have orders ({len(params.alpha)}, {len(params.beta)}), "
            f"spec requires ({spec.p}, {spec.q})"
        )


def _variance_recursion(
    alpha0: float,
    alpha: np.ndarray,
    beta: np.ndarray,
    eps2: np.ndarray,
    v0: float,
) -> np.ndarray:
    """Run the recursion with presample eps2 and sigma2 both equal to v0."""
    p = alpha.shape[0]
    q = beta.shape[0]
    eps2_ext = np.concatenate([np.full(p, v0), eps2])
    arch = lfilter(np.concatenate([[0.0], alpha]), [1.0], eps2_ext)[p:]
    x = alpha0 + arch
    if q == 0:
        return x
    a = np.concatenate([[1.0], -beta])
    zi = lfiltic([1.0], a, np.full(q, v0))
    sig2, _ = lfilter([1.0], a, x, zi=zi)
    return sig2


def conditional_variances(params: GarchParams, residuals: HourlySeries) -> HourlySeries:
    """Conditional variance path of the residual series under the model.

    Presample squared residuals and variances are backcast with the
    residual sample variance; outputs are strictly positive because
    ``alpha0 > 0``.
    """
    values = residuals.values
    v0 = float(np.var(values))
    sig2 = _variance_recursion(
        params.alpha0, np.asarray(params.alpha), np.asarray(params.beta), values**2, v0
    )
    return HourlySeries(residuals.start, sig2, "variance")


def garch_log_likelihood(params: GarchParams, residuals: HourlySeries) -> float:
    """Gaussian quasi-log-likelihood of the residuals under the variance path."""
    eps2 = residuals.values**2
    sig2 = _variance_recursion(
        params.alpha0,
        np.asarray(params.alpha),
        np.asarray(params.beta),
        eps2,
        float(np.var(residuals.values)),
    )
    return float(
        -0.5 * (residuals.values.shape[0] * math.log(2.0 * math.pi) + np.sum(np.log(sig2)) + np.sum(eps2 / sig2))
    )


def forecast_variance(params: GarchParams, residuals: HourlySeries, horizon: int) -> np.ndarray:
    """Expected conditional variances for 1..horizon steps ahead.

    The one-step value comes from the recursion with observed residuals;
    beyond that each step applies the expected-value recursion
    ``sigma2_{t+h} = alpha0 + persistence * sigma2_{t+h-1}``, which
    converges geometrically to the unconditional variance.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    values = residuals.values
    v0 = float(np.var(values))
    alpha = np.asarray(params.alpha)
    beta = np.asarray(params.beta)
    sig2 = _variance_recursion(params.alpha0, alpha, beta, values**2, v0)

    m = values.shape[0]
    out = np.empty(horizon)
    step1 = params.alpha0
    for i in range(1, alpha.shape[0] + 1):
        past_eps2 = values[m - i] ** 2 if m - i >= 0 else v0
        step1 += alpha[i - 1] * past_eps2
    for j in range(1, beta.shape[0] + 1):
        past_sig2 = sig2[m - j] if m - j >= 0 else v0
        step1 += beta[j - 1] * past_sig2
    out[0] = step1
    for h in range(1, horizon):
        out[h] = params.alpha0 + params.persistence * out[h - 1]
    return out


def attach_garch(
    arma_fit: "FittedModel",
    gspec: GarchSpec,
    options: "FitOptions | None" = None,
) -> "FittedModel":
    """Fit a GARCH model to the residuals of a fitted mean equation.

    Returns a copy of the fit carrying the variance model; the mean
    equation, and with it every point forecast, is untouched. Coefficient
    estimates that land on the zero boundary are reported through the
    diagnostics flags.
    """
    from .estimation import FitOptions, fit_garch

    gparams = fit_garch(arma_fit.residuals, gspec, options or FitOptions())
    flags = list(arma_fit.diagnostics.boundary_flags)
    if any(a < 1e-6 for a in gparams.alpha):
        flags.append("garch_alpha_at_zero")
    if any(b < 1e-6 for b in gparams.beta):
        flags.append("garch_beta_at_zero")
    diagnostics = replace(arma_fit.diagnostics, boundary_flags=tuple(flags))
    return replace(arma_fit, garch=(gspec, gparams), diagnostics=diagnostics)
