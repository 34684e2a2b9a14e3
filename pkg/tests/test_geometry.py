import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ramanmem.core import PhysicalConfig
from ramanmem.errors import ConfigurationError, InfeasibleGeometryError
from ramanmem.geometry import (GeometryLimitWarning, design_point, optimal_theta,
                               optimize_angle, raman_absorption, relative_wavevector)

K_OPT = 2 * math.pi / 780e-9
U = 1e9 / K_OPT
CFG = PhysicalConfig(delta1=2e10, omega2=1e9, alpha0=40.0, u=U, length=0.2, k=K_OPT)


@given(st.floats(1e-3, 2.0), st.floats(1e-3, 2.0))
def test_absorption_times_wavenumber_is_constant(a, b):
    pa = raman_absorption(K_OPT, a * K_OPT, CFG.omega2, CFG.delta1, CFG.alpha0) * a * K_OPT
    pb = raman_absorption(K_OPT, b * K_OPT, CFG.omega2, CFG.delta1, CFG.alpha0) * b * K_OPT
    assert abs(pa / pb - 1) <= 1e-12


def test_absorption_value():
    K = 0.01 * K_OPT
    assert raman_absorption(K_OPT, K, 1e9, 2e10, 40.0) == pytest.approx(100 * 0.05 ** 2 * 40)


def test_zero_wavenumber_diverges():
    with pytest.raises(ConfigurationError, match="diverges"):
        raman_absorption(K_OPT, 0.0, 1e9, 2e10, 40.0)


@given(st.floats(1e6, 1.5e8), st.floats(1.5, 10.0))  # margin * delta_s stays below 2 k u
def test_optimal_angle_meets_margin_exactly(delta_s, margin):
    theta = optimal_theta(delta_s, margin, K_OPT, U)
    assert relative_wavevector(theta, K_OPT) * U == pytest.approx(margin * delta_s, rel=1e-12)


def test_scan_optimality():
    ds, margin = 2.77e7, 3.0
    best = optimize_angle(ds, margin, CFG)
    for theta in np.linspace(0.2 * best.theta, 5 * best.theta, 301):
        p = design_point(theta, CFG, ds)
        if theta < best.theta * (1 - 1e-12):
            assert p.margin_ratio < margin
        elif theta > best.theta * (1 + 1e-12):
            assert p.alpha_r < best.alpha_r


def test_infeasible_margin_reports_reachable_width():
    with pytest.raises(InfeasibleGeometryError, match="2 k u"):
        optimal_theta(1e9, 3.0, K_OPT, U)


def test_margin_must_exceed_one():
    with pytest.raises(ConfigurationError):
        optimal_theta(1e7, 1.0, K_OPT, U)


def test_zero_bandwidth_limit_warns():
    with pytest.warns(GeometryLimitWarning):
        p = optimize_angle(0.0, 3.0, CFG)
    assert p.theta == 0.0 and math.isinf(p.alpha_r)


def test_without_config_absorption_is_nan():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        p = optimize_angle(1e7, 3.0, k=K_OPT, u=U)
    assert math.isnan(p.alpha_r)
    assert p.margin_ratio == pytest.approx(3.0)
