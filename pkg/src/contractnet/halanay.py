"""Delayed convergence rate and the Halanay decay envelope.

For u' <= -sigma_bar u + sigma_under sup_{[t - tau, t]} u + c the decay rate
lam is the root in (0, sigma_bar] of

    lam - sigma_bar + sigma_under * exp(lam * tau_max) = 0.

The left-hand side grows with the delay, so the worst case over time-varying
delays bounded by tau_max is the tau_max equation itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError, InfeasibleRateError

RATE_TOL = 1e-12
MAX_BISECTIONS = 60


@dataclass(frozen=True)
class HalanayParams:
    sigma_bar: float
    sigma_under: float
    tau_max: float

    def __post_init__(self):
        for name in ("sigma_bar", "sigma_under", "tau_max"):
            val = float(getattr(self, name))
            if not math.isfinite(val):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, val)
        if self.tau_max < 0:
            raise DomainError(f"tau_max must be >= 0, got {self.tau_max}")
        if self.sigma_under < 0:
            raise DomainError(f"sigma_under must be >= 0, got {self.sigma_under}")
        if not self.sigma_bar > self.sigma_under:
            raise InfeasibleRateError(
                f"sigma_bar={self.sigma_bar} must exceed sigma_under={self.sigma_under}")

    @property
    def margin(self) -> float:
        return self.sigma_bar - self.sigma_under

    def residual(self, lam: float) -> float:
        return lam - self.sigma_bar + self.sigma_under * math.exp(lam * self.tau_max)


def solve_rate(p: HalanayParams) -> float:
    """Unique positive root of the rate equation, by bisection on [0, sigma_bar]."""
    if p.sigma_under == 0.0:
        return p.sigma_bar
    if p.tau_max == 0.0:
        return p.sigma_bar - p.sigma_under
    lo, hi = 0.0, p.sigma_bar
    g_lo, g_hi = p.residual(lo), p.residual(hi)
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        g_mid = p.residual(mid)
        if g_mid == 0.0:
            return mid
        if g_mid < 0.0:
            lo, g_lo = mid, g_mid
        else:
            hi, g_hi = mid, g_mid
        if hi - lo <= RATE_TOL * 1e-3:
            break
    return lo if abs(g_lo) <= abs(g_hi) else hi


def decay_envelope(p: HalanayParams, u0: float, c: float, t: float) -> float:
    """u0 * exp(-lam t) + c / (sigma_bar - sigma_under), t measured from t0."""
    if u0 < 0 or c < 0 or t < 0:
        raise DomainError("u0, c and t must be non-negative")
    lam = solve_rate(p)
    return u0 * math.exp(-lam * t) + c / p.margin
