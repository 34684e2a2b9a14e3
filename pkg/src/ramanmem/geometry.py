"""Beam-angle arithmetic and the bandwidth versus Raman-absorption design rule."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

from .core import PhysicalConfig
from .errors import ConfigurationError, InfeasibleGeometryError

DEFAULT_MARGIN = 3.0


class GeometryLimitWarning(UserWarning):
    """The design sits at a degenerate limit of the angle formula."""


def relative_wavevector(theta: float, k: float) -> float:
    """|k2 - k1| for two wave vectors of magnitude k separated by theta."""
    if not (0.0 < theta <= math.pi):
        raise ConfigurationError(f"theta must lie in (0, pi] (got {theta!r})")
    return 2.0 * k * math.sin(theta / 2.0)


def raman_absorption(k: float, K: float, omega2: complex, delta1: float,
                     alpha0: float) -> float:
    """Raman absorption coefficient (k/K) |omega2/delta1|^2 alpha0, 1/m."""
    if K == 0:
        raise ConfigurationError("K = 0: the Raman absorption coefficient diverges and "
                                 "the Doppler-broadened model does not apply")
    if K < 0:
        raise ConfigurationError(f"K must be > 0 (got {K!r})")
    if delta1 == 0:
        raise ConfigurationError("delta1 must be non-zero")
    if alpha0 < 0:
        raise ConfigurationError(f"alpha0 must be >= 0 (got {alpha0!r})")
    return (k / K) * (abs(omega2) / delta1) ** 2 * alpha0


@dataclass(frozen=True)
class DesignPoint:
    theta: float
    K: float
    bandwidth: float
    alpha_r: float
    optical_depth: float
    margin_ratio: float


def design_point(theta: float, config: PhysicalConfig, delta_s: float) -> DesignPoint:
    K = relative_wavevector(theta, config.k)
    alpha_r = raman_absorption(config.k, K, config.omega2, config.delta1, config.alpha0)
    ku = K * config.u
    return DesignPoint(theta=theta, K=K, bandwidth=ku, alpha_r=alpha_r,
                       optical_depth=alpha_r * config.length,
                       margin_ratio=ku / delta_s if delta_s > 0 else math.inf)


def optimal_theta(delta_s: float, margin: float, k: float, u: float) -> float:
    """Smallest angle whose Doppler width K u reaches margin * delta_s."""
    if not margin > 1:
        raise ConfigurationError(f"margin must be > 1 (got {margin!r})")
    if delta_s < 0:
        raise ConfigurationError("delta_s must be >= 0")
    need = margin * delta_s
    top = 2.0 * k * u
    if need > top * (1 + 1e-12):
        raise InfeasibleGeometryError(
            "margin x delta_s = %.6g rad/s exceeds the largest reachable Doppler width "
            "2 k u = %.6g rad/s (counter-propagating beams)" % (need, top))
    return 2.0 * math.asin(min(1.0, need / top))


def optimize_angle(delta_s: float, margin: float = DEFAULT_MARGIN,
                   config: PhysicalConfig | None = None, *, k: float | None = None,
                   u: float | None = None) -> DesignPoint:
    """Angle maximising alpha_R while keeping K u >= margin * delta_s.

    alpha_R falls monotonically with theta, so the optimum is the smallest
    admissible angle.  Without ``config`` only k and u are needed and the
    absorption fields of the result are NaN.
    """
    k = config.k if config is not None else k
    u = config.u if config is not None else u
    if k is None or u is None:
        raise ConfigurationError("optimize_angle needs a PhysicalConfig or k and u")
    theta = optimal_theta(delta_s, margin, k, u)
    if theta <= 0.0:
        warnings.warn("delta_s -> 0 drives the optimal angle to 0 where alpha_R "
                      "diverges; the broadband model no longer applies",
                      GeometryLimitWarning, stacklevel=2)
        return DesignPoint(theta=0.0, K=0.0, bandwidth=0.0, alpha_r=math.inf,
                           optical_depth=math.inf, margin_ratio=math.nan)
    if config is None:
        K = relative_wavevector(theta, k)
        return DesignPoint(theta, K, K * u, math.nan, math.nan, K * u / delta_s)
    return design_point(theta, config, delta_s)
