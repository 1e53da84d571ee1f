"""Closed-form constants and bounds the simulations are compared against."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

__all__ = [
    "gauss_abs_moment",
    "c1",
    "c2",
    "c2_driftless",
    "fixed_time_ratio",
    "lower_tail_bound",
    "upper_tail_bound",
    "MomentBound",
    "centered_moment_bound",
    "clt_reference_cdf",
    "mmse_residual_abs_mean",
]


def gauss_abs_moment(p: float) -> float:
    """``E|N|^p = 2^(p/2) Gamma((p+1)/2) / sqrt(pi)`` for ``N ~ N(0, 1)``."""
    if p < 0:
        raise ParameterError(f"p must be >= 0, got {p}")
    if p == int(p) and p <= 150:
        m = int(p) // 2
        if int(p) % 2 == 0:
            # (p - 1)!!
            return float(math.prod(range(1, 2 * m, 2)))
        return 2.0 ** m * math.factorial(m) * math.sqrt(2.0 / math.pi)
    if p < 300:
        return 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)
    return math.exp(0.5 * p * math.log(2.0) + math.lgamma(0.5 * (p + 1.0))) / math.sqrt(math.pi)


def c1(ell: float, s: float, epsilon: float, p: float) -> float:
    """Asymptotic optimal p-moment constant under noisy observation.

    ``(ell eps^2 / (s^3 (1 + eps^2)))^(p/2) E|N|^p``; requires ``s > 0``,
    ``epsilon > 0`` and ``p >= 1``.
    """
    if not s > 0:
        raise ParameterError(f"C1 needs s > 0, got s = {s}")
    if not epsilon > 0:
        raise ParameterError(f"C1 needs epsilon > 0, got epsilon = {epsilon}")
    if ell < 0:
        raise ParameterError(f"C1 needs ell >= 0, got ell = {ell}")
    if p < 1:
        raise ParameterError(f"C1 needs p >= 1, got p = {p}")
    e2 = epsilon * epsilon
    return (ell * e2 / (s ** 3 * (1.0 + e2))) ** (p / 2.0) * gauss_abs_moment(p)


def c2(d: float, s: float, p: float) -> float:
    """Asymptotic optimal p-moment constant under delay: ``d^(p/2) / s^p E|N|^p``.

    For ``s = 0`` the exact value is ``d^p`` instead; see :func:`c2_driftless`.
    """
    if not s > 0:
        raise ParameterError("C2 needs s > 0; with s = 0 the exact value is d**p (c2_driftless)")
    if d < 0:
        raise ParameterError(f"C2 needs d >= 0, got d = {d}")
    if p < 1:
        raise ParameterError(f"C2 needs p >= 1, got p = {p}")
    return d ** (p / 2.0) / s ** p * gauss_abs_moment(p)


def c2_driftless(d: float, p: float) -> float:
    """Exact optimal p-moment ``d^p`` under delay ``d`` when the walk has no drift."""
    if d < 0:
        raise ParameterError(f"d must be >= 0, got {d}")
    if p < 0.5:
        raise ParameterError(f"the driftless delayed result holds for p >= 1/2, got p = {p}")
    return float(d) ** p


def fixed_time_ratio(epsilon: float, p: float) -> float:
    """Limit of ``E|tau - ell/s|^p / C1`` as ``ell`` grows: ``((1 + eps^2)/eps^2)^(p/2)``."""
    if not epsilon > 0:
        raise ParameterError("the fixed-time ratio diverges at epsilon = 0")
    e2 = epsilon * epsilon
    return ((1.0 + e2) / e2) ** (p / 2.0)


def _check_tail_args(s: float, sigma2: float, z: float) -> None:
    if not s > 0:
        raise ParameterError(f"tail bounds need s > 0, got {s}")
    if not sigma2 > 0:
        raise ParameterError(f"tail bounds need sigma2 > 0, got {sigma2}")
    if z < 0:
        raise ParameterError(f"tail bounds need z >= 0, got {z}")


def lower_tail_bound(ell: float, s: float, sigma2: float, z: float) -> float:
    """Upper bound on ``P(tau < ell/s - z)``, valid for ``0 <= z < ell/s``."""
    _check_tail_args(s, sigma2, z)
    u = ell / s
    if z >= u:
        raise ParameterError(f"lower tail bound needs z < ell/s = {u:g}, got z = {z:g}")
    return math.exp(-(s * s * z * z) / (2.0 * sigma2 * (u - z)))


def upper_tail_bound(ell: float, s: float, sigma2: float, z: float) -> float:
    """Upper bound on ``P(tau > ell/s + z)`` for ``z >= 0``."""
    _check_tail_args(s, sigma2, z)
    u = ell / s
    if u + z == 0:
        return 1.0
    return math.exp(-(s * s * z * z) / (2.0 * sigma2 * (u + z)))


@dataclass(frozen=True)
class MomentBound:
    """``2 (k1 ell^(p/2) + k2)`` bound on ``E|tau - ell/s|^p`` with its pieces."""

    value: float
    k1: float
    k2: float
    i1_bound: float
    i2_bound: float


def _i2_integral(p: float, sigma2: float) -> float:
    # int_0^inf exp(-t^(1/p) / (8 sigma2)) dt = p (8 sigma2)^p Gamma(p)
    c = 8.0 * sigma2
    return math.exp(math.log(p) + p * math.log(c) + math.lgamma(p))


def centered_moment_bound(ell: float, s: float, sigma2: float, p: float) -> MomentBound:
    """Explicit-constant bound on the centred p-moment of the first-passage time.

    ``I1 <= (4 sigma2 ell / s^3)^(p/2) Gamma(p/2 + 1)`` and
    ``I2 <= s^(-2p) int_0^inf exp(-t^(1/p) / (8 sigma2)) dt``; the bound is
    ``2 (I1 + I2)``.
    """
    if not p > 0:
        raise ParameterError(f"p must be > 0, got {p}")
    if not s > 0:
        raise ParameterError(f"s must be > 0, got {s}")
    if not sigma2 > 0:
        raise ParameterError(f"sigma2 must be > 0, got {sigma2}")
    if ell < 0:
        raise ParameterError(f"ell must be >= 0, got {ell}")
    k1 = (4.0 * sigma2 / s ** 3) ** (p / 2.0) * math.gamma(p / 2.0 + 1.0)
    k2 = s ** (-2.0 * p) * _i2_integral(p, sigma2)
    i1 = k1 * ell ** (p / 2.0)
    return MomentBound(value=2.0 * (i1 + k2), k1=k1, k2=k2, i1_bound=i1, i2_bound=k2)


def clt_reference_cdf(x: float) -> float:
    """Standard normal CDF."""
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def mmse_residual_abs_mean(t: int, epsilon: float) -> float:
    """``E|Xhat_t - X_t| = (t eps^2 / (1 + eps^2))^(1/2) sqrt(2/pi)``."""
    e2 = epsilon * epsilon
    return math.sqrt(t * e2 / (1.0 + e2)) * math.sqrt(2.0 / math.pi)
