"""Backshift-operator polynomial algebra.

A lag polynomial is a finite sum ``1 + c_1 B + c_2 B^2 + ...`` in the
backshift operator B (``B^h x_t = x_{t-h}``), stored sparsely by lag so
seasonal factors such as ``1 - 0.4 B^24`` stay cheap. The lag-0 coefficient
is always exactly 1, matching the leading 1 of every AR/MA/differencing
factor used here.

Sign convention: a factor with autoregressive coefficient ``phi`` is stored
as ``{0: 1, 1: -phi}`` - the minus signs live in the stored coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple

import numpy as np

from .errors import InsufficientPresample, SeriesTooShort
from .series import HOUR, HourlySeries

__all__ = [
    "LagPolynomial",
    "DifferenceSpec",
    "StabilityResult",
    "apply",
    "multiply",
    "difference_polynomial",
    "integrate",
    "is_stable",
]

@dataclass(frozen=True)
class LagPolynomial:
    """Finite polynomial in the backshift operator with unit lag-0 coefficient."""

    coefficients: Mapping[int, float]

    def __post_init__(self) -> None:
        cleaned: dict[int, float] = {}
        for lag, coeff in self.coefficients.items():
            lag = int(lag)
            coeff = float(coeff)
            if lag < 0:
                raise ValueError(f"negative lag {lag}")
            if lag != 0 and coeff == 0.0:
                continue  # keep storage sparse
            cleaned[lag] = coeff
        if cleaned.get(0) != 1.0:
            raise ValueError("lag-0 coefficient must be exactly 1")
        object.__setattr__(self, "coefficients", dict(sorted(cleaned.items())))

    @property
    def degree(self) -> int:
        return max(self.coefficients)

    def coefficient(self, lag: int) -> float:
        return self.coefficients.get(lag, 0.0)

    def dense(self) -> np.ndarray:
        """Coefficients as an ascending-lag dense array of length degree+1."""
        out = np.zeros(self.degree + 1)
        for lag, coeff in self.coefficients.items():
            out[lag] = coeff
        return out

    def __mul__(self, other: "LagPolynomial") -> "LagPolynomial":
        return multiply(self, other)

    @staticmethod
    def identity() -> "LagPolynomial":
        return LagPolynomial({0: 1.0})

    @staticmethod
    def from_factor_coefficients(coeffs: Iterable[float], spacing: int = 1) -> "LagPolynomial":
        """Build ``1 - a_1 B^s - a_2 B^{2s} - ...`` from factor coefficients ``a_i``.

        This is the shared shape of the AR, seasonal AR, MA and seasonal MA
        factors: the caller passes the plain coefficients and the minus signs
        are applied here.
        """
        if spacing < 1:
            raise ValueError("spacing must be >= 1")
        out = {0: 1.0}
        for i, a in enumerate(coeffs, start=1):
            if a != 0.0:
                out[i * spacing] = -float(a)
        return LagPolynomial(out)


class StabilityResult(NamedTuple):
    stable: bool
    margin: float


@dataclass(frozen=True)
class DifferenceSpec:
    """Orders of ordinary (d) and seasonal (D, season length S) differencing."""

    d: int = 0
    D: int = 0
    S: int = 24

    def __post_init__(self) -> None:
        if self.d < 0 or self.D < 0:
            raise ValueError("differencing orders must be non-negative")
        if self.S < 1:
            raise ValueError("season length must be positive")
        if self.D > 0 and self.S < 2:
            raise ValueError("seasonal differencing requires season length >= 2")

    @property
    def order(self) -> int:
        """Number of presample values consumed: d + D*S."""
        return self.d + self.D * self.S


def multiply(a: LagPolynomial, b: LagPolynomial) -> LagPolynomial:
    """Product polynomial: convolution of the sparse coefficient maps."""
    out: dict[int, float] = {}
    for la, ca in a.coefficients.items():
        for lb, cb in b.coefficients.items():
            lag = la + lb
            out[lag] = out.get(lag, 0.0) + ca * cb
    return LagPolynomial(out)


def difference_polynomial(spec: DifferenceSpec) -> LagPolynomial:
    """Expanded ``(1 - B)^d (1 - B^S)^D``."""
    poly = LagPolynomial.identity()
    step = LagPolynomial({0: 1.0, 1: -1.0})
    for _ in range(spec.d):
        poly = multiply(poly, step)
    if spec.D > 0:
        seasonal = LagPolynomial({0: 1.0, spec.S: -1.0})
        for _ in range(spec.D):
            poly = multiply(poly, seasonal)
    return poly


def apply(poly: LagPolynomial, series: HourlySeries) -> HourlySeries:
    """Apply the operator: ``out_t = sum_h coeff(h) * in_{t-h}``.

    Defined only where every lag is available, so the output is shorter by
    ``degree`` samples and its start is advanced by the same number of hours.
    """
    k = poly.degree
    n = len(series)
    if n <= k:
        raise SeriesTooShort(f"series of length {n} cannot absorb polynomial of degree {k}")
    out = apply_array(poly, series.values)
    return HourlySeries(series.start + HOUR * k, out, series.units)


def apply_array(poly: LagPolynomial, x: np.ndarray) -> np.ndarray:
    """Array form of :func:`apply`; returns length ``len(x) - degree``."""
    k = poly.degree
    n = x.shape[0]
    out = np.zeros(n - k)
    for lag, coeff in poly.coefficients.items():
        out += coeff * x[k - lag : n - lag]
    return out


def integrate(
    differenced: HourlySeries,
    presample: HourlySeries,
    spec: DifferenceSpec,
) -> HourlySeries:
    """Invert :func:`difference_polynomial` applied to a level series.

    ``presample`` must supply the ``d + D*S`` level values immediately
    preceding the differenced window (extra leading values are ignored).
    The output covers exactly the differenced window, and re-differencing
    the presample-prefixed output reproduces the input exactly.
    """
    poly = difference_polynomial(spec)
    k = poly.degree
    if k == 0:
        return differenced
    if len(presample) < k:
        raise InsufficientPresample(
            f"need {k} presample values for d={spec.d}, D={spec.D}, S={spec.S}; got {len(presample)}"
        )
    if presample.end != differenced.start:
        raise InsufficientPresample(
            f"presample must end immediately before the differenced window: "
            f"presample end {presample.end.isoformat()} vs start {differenced.start.isoformat()}"
        )
    out = integrate_array(differenced.values, presample.values[-k:], poly)
    return HourlySeries(differenced.start, out, presample.units)


def integrate_array(diff: np.ndarray, presample: np.ndarray, poly: LagPolynomial) -> np.ndarray:
    """Recursive inversion: ``y_t = diff_t - sum_{h>=1} coeff(h) * y_{t-h}``."""
    k = poly.degree
    m = diff.shape[0]
    ext = np.empty(k + m)
    ext[:k] = presample
    lags = [(lag, coeff) for lag, coeff in poly.coefficients.items() if lag > 0]
    for t in range(m):
        acc = diff[t]
        for lag, coeff in lags:
            acc -= coeff * ext[k + t - lag]
        ext[k + t] = acc
    return ext[k:]


def is_stable(poly: LagPolynomial, tolerance: float = 1e-8) -> StabilityResult:
    """Whether all roots (in B) lie strictly outside the unit circle.

    Roots come from the companion-matrix eigenvalues of the reversed
    coefficient vector (numpy.roots). The margin is ``min |root| - 1``; the
    polynomial counts as stable when the margin exceeds ``tolerance``.
    A degree-0 polynomial has no roots and is stable with infinite margin.
    """
    if poly.degree == 0:
        return StabilityResult(True, float("inf"))
    dense = poly.dense()
    roots = np.roots(dense[::-1])
    margin = float(np.min(np.abs(roots)) - 1.0)
    return StabilityResult(margin > tolerance, margin)
