import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from qtstomo.bath import (BathParams, QuadratureError, bath_kernel, fdt_reorganization,
                          lineshape_rate, lineshape_rates, log_marcus_rate, marcus_rate,
                          temperature_to_ghz, truncation_time)

# CODATA exact values
KB, H = 1.380649e-23, 6.62607015e-34


def fig_bath(**kw):
    return BathParams.from_millikelvin(10.0, 12.0, **kw)


def test_temperature_conversion():
    assert temperature_to_ghz(12.0) == pytest.approx(12e-3 * KB / H / 1e9, rel=1e-12)
    assert round(temperature_to_ghz(12.0), 4) == 0.2500
    assert round(temperature_to_ghz(10.0), 4) == 0.2084
    assert temperature_to_ghz(0.0) == 0.0
    with pytest.raises(ValueError):
        temperature_to_ghz(-1.0)


def test_fdt_reorganization():
    assert fdt_reorganization(0.2084, 0.2500) == pytest.approx(0.08686, abs=5e-6)
    assert fdt_reorganization(0.0, 0.25) == 0.0
    with pytest.raises(ValueError):
        fdt_reorganization(0.2, 0.0)
    b = fig_bath()
    assert b.mode == "fdt"
    assert b.W * b.W - 2 * b.T * b.eps_p == 0.0


def test_bath_invariants():
    with pytest.raises(ValueError):
        BathParams(0.0, 0.1, 0.2)
    with pytest.raises(ValueError):
        BathParams(0.1, -0.1, 0.2)
    with pytest.raises(ValueError):
        BathParams(0.1, 0.1, 0.2, eta=-1)


def test_marcus_examples():
    b = BathParams(1.0, 0.3, 1.0)
    assert marcus_rate(1.0, -0.3, b) == pytest.approx(math.sqrt(2 * math.pi), rel=1e-15)
    for W in (0.05, 0.7, 3.0):
        b = BathParams(W, 0.2, 1.0)
        assert marcus_rate(1.0, W - 0.2, b) == pytest.approx(math.sqrt(2 * math.pi) / W * math.exp(-0.5), rel=1e-14)


def test_marcus_normalization():
    b = fig_bath()
    area, _ = integrate.quad(lambda w: marcus_rate(1.0, w, b), -np.inf, np.inf)
    assert area == pytest.approx(2 * math.pi, rel=1e-6)


@settings(max_examples=200, deadline=None)
@given(st.floats(-5, 5), st.floats(0.01, 1.0), st.floats(0.02, 2.0))
def test_detailed_balance_log_space(x, W, T):
    b = BathParams.from_fdt(W, T)
    fwd = log_marcus_rate(1.0, x, b)  # final minus initial energy x
    bwd = log_marcus_rate(1.0, -x, b)
    assert bwd - fwd == pytest.approx(x / T, abs=1e-10)


@settings(max_examples=100, deadline=None)
@given(st.floats(-50, 50), st.floats(0.01, 1.0), st.floats(0.0, 1.0))
def test_marcus_positive(omega, W, eps_p):
    assert marcus_rate(1.0, omega, BathParams(W, eps_p, 0.3)) >= 0


def test_lineshape_marcus_limit():
    b = fig_bath()
    ws = np.linspace(-5 * b.W, 5 * b.W, 101) - b.eps_p
    m = marcus_rate(1.0, ws, b)
    ls = lineshape_rates(1.0, ws, b)
    assert np.max(np.abs(ls - m) / m) < 1e-6


def test_kernel_regular_at_zero():
    b = fig_bath(eta=0.05, omega_c=5.0)
    assert bath_kernel(0.0, b) == pytest.approx(1.0)
    assert abs(bath_kernel(1e-9, b) - 1) < 1e-8


def reference_lineshape(omega, b, n=400001):
    # independent fixed-step Simpson rule on the explicit integrand
    t = np.linspace(0.0, truncation_time(b), n)
    p = 4 * b.eta / math.pi
    x = math.pi * b.T * t
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(t == 0, 1.0, x / np.sinh(np.where(t == 0, 1.0, x)))
    hf = (ratio / (1 + 1j * b.omega_c * t)) ** p
    f = np.exp(-1j * (omega + b.eps_p) * t) * np.exp(-0.5 * (b.W * t) ** 2) * hf
    return 2 * integrate.simpson(f.real, x=t)


def test_lineshape_ohmic_against_fixed_step():
    base = fig_bath()
    b = BathParams.from_fdt(base.W, base.T, eta=0.01, omega_c=8 * math.pi * base.T)
    for omega in (-0.4, -0.0868, 0.0, 0.3):
        val = lineshape_rate(1.0, omega, b)
        assert val > 0 and math.isfinite(val)
        assert val == pytest.approx(reference_lineshape(omega, b), rel=1e-7)


def test_lineshape_approaches_marcus_monotonically():
    base = fig_bath()
    omega = -base.eps_p
    m = marcus_rate(1.0, omega, base)
    devs = []
    for eta in (0.02, 0.01, 0.005, 0.0025):
        b = BathParams.from_fdt(base.W, base.T, eta=eta, omega_c=8 * math.pi * base.T)
        devs.append(abs(lineshape_rate(1.0, omega, b) - m))
    assert all(a > c for a, c in zip(devs, devs[1:]))
    assert devs[-1] / m < 0.05


def test_lineshape_reports_quadrature_failure():
    b = fig_bath()
    with pytest.raises(QuadratureError):
        lineshape_rate(1.0, 0.0, b, rtol=1e-30)
