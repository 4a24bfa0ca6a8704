"""Closed-form evaluation of the sublinear generator G and its algebra.

In one dimension the generator reduces to

    G(p, a) = 1/2 * (sigma_hi^2 * a+ - sigma_lo^2 * a-) + mu_hi * p+ - mu_lo * p-

which is also the supremum of ``1/2 * sigma^2 * a + mu * p`` over the moment
rectangle [sigma_lo, sigma_hi] x [mu_lo, mu_hi]; the supremum is attained at a
corner, which is what makes exact control extraction possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import math

from .errors import InvalidSpecError


@dataclass(frozen=True)
class GParams:
    """Mean and volatility bounds defining a sublinear generator."""

    mu_lo: float
    mu_hi: float
    sigma_lo: float
    sigma_hi: float

    def __post_init__(self):
        for name in ("mu_lo", "mu_hi", "sigma_lo", "sigma_hi"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise InvalidSpecError(f"GParams.{name} must be finite, got {v!r}")
        if self.mu_lo > self.mu_hi:
            raise InvalidSpecError(
                f"GParams requires mu_lo <= mu_hi, got {self.mu_lo} > {self.mu_hi}"
            )
        if not (0.0 <= self.sigma_lo <= self.sigma_hi):
            raise InvalidSpecError(
                "GParams requires 0 <= sigma_lo <= sigma_hi, got "
                f"sigma_lo={self.sigma_lo}, sigma_hi={self.sigma_hi}"
            )

    @property
    def max_abs_mu(self) -> float:
        return max(abs(self.mu_lo), abs(self.mu_hi))


def g_value(p: float, a: float, params: GParams) -> float:
    """Evaluate G(p, a) in closed form."""
    a_pos = max(a, 0.0)
    a_neg = max(-a, 0.0)
    p_pos = max(p, 0.0)
    p_neg = max(-p, 0.0)
    return (
        0.5 * (params.sigma_hi**2 * a_pos - params.sigma_lo**2 * a_neg)
        + params.mu_hi * p_pos
        - params.mu_lo * p_neg
    )


def g_corner_control(p: float, a: float, params: GParams) -> tuple[float, float]:
    """Maximizing corner (sigma, mu) of 1/2*sigma^2*a + mu*p.

    Ties at a == 0 or p == 0 resolve to the upper corner so downstream
    upwinding is deterministic.
    """
    sigma = params.sigma_hi if a >= 0.0 else params.sigma_lo
    mu = params.mu_hi if p >= 0.0 else params.mu_lo
    return sigma, mu


@dataclass(frozen=True)
class GPropertyResult:
    """Residuals of the three structural G inequalities for one sample."""

    sample: tuple[float, float, float, float, float]
    subadditivity_residual: float  # G(p+pb, a+ab) - G(p,a) - G(pb,ab), must be <= 0
    homogeneity_residual: float  # G(lam*p, lam*a) - lam*G(p,a), must be ~ 0
    monotonicity_residual: float | None  # G(p,a) - G(p,ab) when a >= ab, must be >= 0

    def passed(self, tol: float = 1e-12) -> bool:
        ok = self.subadditivity_residual <= tol and abs(self.homogeneity_residual) <= tol
        if self.monotonicity_residual is not None:
            ok = ok and self.monotonicity_residual >= -tol
        return ok


def check_g_properties(
    params: GParams,
    samples: Iterable[tuple[float, float, float, float, float]],
) -> list[GPropertyResult]:
    """Check sub-additivity, positive homogeneity and monotonicity in a.

    Each sample is a tuple (p, a, pb, ab, lam) with lam >= 0.  The
    monotonicity residual is reported only when a >= ab (the hypothesis of
    the inequality).
    """
    out = []
    for sample in samples:
        p, a, pb, ab, lam = sample
        if lam < 0.0:
            raise InvalidSpecError(f"homogeneity factor must be >= 0, got {lam}")
        sub = g_value(p + pb, a + ab, params) - g_value(p, a, params) - g_value(pb, ab, params)
        hom = g_value(lam * p, lam * a, params) - lam * g_value(p, a, params)
        mono = g_value(p, a, params) - g_value(p, ab, params) if a >= ab else None
        out.append(GPropertyResult(tuple(sample), sub, hom, mono))
    return out
