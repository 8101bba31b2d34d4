"""Closed-form estimators: crossing scale, minimum gap, schedule maps, run time."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameter


@dataclass(frozen=True)
class GapEstimate:
    lambda_star: float
    delta_min: float
    log_delta_min: float
    v_alpha: float
    n0: float
    a_const: float
    n_bits: int
    alpha: float

    def tunneling_bound(self, lam, distance=None):
        """Upper bound (A * lam)^n on |V12|; n defaults to v(alpha) * N."""
        n = self.v_alpha * self.n_bits if distance is None else distance
        return (self.a_const * lam) ** n

    def to_dict(self):
        return {
            "lambda_star": self.lambda_star,
            "delta_min": self.delta_min,
            "log_delta_min": self.log_delta_min,
            "v_alpha": self.v_alpha,
            "n0": self.n0,
            "a_const": self.a_const,
            "n_bits": self.n_bits,
            "alpha": self.alpha,
        }


def lambda_star(f2, n_bits):
    """Coupling above which the fourth-order splitting sqrt(N) f2 lam^4 exceeds 4."""
    if not f2 > 0:
        raise InvalidParameter(f"f2 must be positive, got {f2}")
    if n_bits < 1:
        raise InvalidParameter("n_bits must be positive")
    return math.sqrt(2.0) * f2 ** -0.25 * n_bits ** -0.125


def v_alpha(alpha):
    return 4.0 / 9.0 * (1.0 - math.exp(-3.0 * alpha))


def min_gap_estimate(n_bits, alpha, n0=1.0, a_const=1.0, f2=0.18):
    if not n0 > 0:
        raise InvalidParameter("n0 must be positive")
    if not n_bits > n0:
        raise InvalidParameter(f"need N > N0, got N={n_bits}, N0={n0}")
    v = v_alpha(alpha)
    log_delta = -(v * n_bits / 8.0) * math.log(n_bits / n0)
    return GapEstimate(
        lambda_star=lambda_star(f2, n_bits),
        delta_min=math.exp(log_delta),
        log_delta_min=log_delta,
        v_alpha=v,
        n0=float(n0),
        a_const=float(a_const),
        n_bits=int(n_bits),
        alpha=float(alpha),
    )


def lambda_from_s(s):
    if not 0 < s <= 1:
        raise InvalidParameter(f"s must be in (0, 1], got {s}")
    return (1.0 - s) / s


def s_from_lambda(lam):
    if lam < 0:
        raise InvalidParameter(f"lambda must be >= 0, got {lam}")
    return 1.0 / (1.0 + lam)


def lambda_cr_estimate(n_bits):
    """Order-of-magnitude localization threshold 1/ln N (advisory only)."""
    if n_bits < 3:
        raise InvalidParameter("n_bits must be >= 3")
    return 1.0 / math.log(n_bits)


def adiabatic_time_estimate(delta, epsilon):
    if not delta > 0:
        raise InvalidParameter("delta must be positive")
    if not 0 < epsilon < 1:
        raise InvalidParameter("epsilon must be in (0, 1)")
    return 1.0 / (epsilon * delta * delta)
