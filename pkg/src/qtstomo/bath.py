"""Probe-bath line shapes: Marcus (Gaussian) rates and the Ohmic line-shape integral.

Energies, temperatures and frequencies are all in GHz.  Rates carry the
squared matrix element as a prefactor, so with ``delta_sq`` equal to a
squared overlap they are rates per Delta_p^2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants, integrate

KB_OVER_H_GHZ_PER_K = constants.k / constants.h * 1e-9
SQRT_2PI = math.sqrt(2.0 * math.pi)
ENVELOPE_FLOOR = 1e-14


class QuadratureError(RuntimeError):
    pass


def temperature_to_ghz(t_mK: float) -> float:
    if t_mK < 0:
        raise ValueError("temperature must be non-negative")
    return t_mK * 1e-3 * KB_OVER_H_GHZ_PER_K


def fdt_reorganization(W: float, T: float) -> float:
    """Reorganization energy tied to the width by W^2 = 2 T eps_p."""
    if not T > 0:
        raise ValueError("FDT relation needs T > 0")
    if W < 0:
        raise ValueError("width must be non-negative")
    eps_p = W * W / (2.0 * T)
    # nudge by a few ulps so that the float identity holds exactly when possible
    for cand in _ulp_neighbours(eps_p):
        if W * W - 2.0 * T * cand == 0.0:
            return cand
    return eps_p


def _ulp_neighbours(x, n=4):
    yield x
    up = down = x
    for _ in range(n):
        up = math.nextafter(up, math.inf)
        down = math.nextafter(down, -math.inf)
        yield up
        yield down


@dataclass(frozen=True)
class BathParams:
    """Low-frequency width ``W``, reorganization energy ``eps_p``, temperature ``T``,
    Ohmic coupling ``eta`` and cutoff ``omega_c`` (all GHz except ``eta``)."""

    W: float
    eps_p: float
    T: float
    eta: float = 0.0
    omega_c: float = 10.0
    mode: str = "explicit"

    def __post_init__(self):
        if not (self.W > 0 and self.T > 0 and self.omega_c > 0):
            raise ValueError("W, T and omega_c must be positive")
        if self.eps_p < 0 or self.eta < 0:
            raise ValueError("eps_p and eta must be non-negative")
        if self.mode not in ("explicit", "fdt"):
            raise ValueError(f"unknown bath mode {self.mode!r}")

    @classmethod
    def from_fdt(cls, W: float, T: float, eta: float = 0.0, omega_c: float = 10.0) -> "BathParams":
        return cls(W, fdt_reorganization(W, T), T, eta, omega_c, mode="fdt")

    @classmethod
    def from_millikelvin(cls, W_mK: float, T_mK: float, eta: float = 0.0,
                         omega_c: float = 10.0) -> "BathParams":
        return cls.from_fdt(temperature_to_ghz(W_mK), temperature_to_ghz(T_mK), eta, omega_c)

    def fdt_violation(self) -> float:
        return self.W * self.W - 2.0 * self.T * self.eps_p


def log_marcus_rate(delta_sq, omega, bath: BathParams):
    """Natural log of :func:`marcus_rate`, free of underflow far off resonance."""
    return (np.log(delta_sq) + math.log(SQRT_2PI / bath.W)
            - (np.asarray(omega) + bath.eps_p) ** 2 / (2.0 * bath.W ** 2))


def marcus_rate(delta_sq, omega, bath: BathParams):
    """Gaussian incoherent tunneling rate for transition frequency ``omega``."""
    x = (np.asarray(omega, dtype=float) + bath.eps_p) / bath.W
    return np.asarray(delta_sq) * (SQRT_2PI / bath.W) * np.exp(-0.5 * x * x)


def _log_x_over_sinh(x):
    x = np.asarray(x, dtype=float)
    small = x < 1e-3
    xs = np.where(small, 1.0, x)
    big = -np.log1p(-np.exp(-2.0 * xs)) - xs + math.log(2.0) + np.log(xs)
    series = -(x * x) / 6.0 + x ** 4 / 180.0
    return np.where(small, series, big)


def bath_kernel(tau, bath: BathParams):
    """Correlation factor exp(-W^2 tau^2/2) * Phi_HF(tau) without the eps_p phase."""
    tau = np.asarray(tau, dtype=float)
    p = 4.0 * bath.eta / math.pi
    wt = bath.omega_c * tau
    log_mod = -0.5 * (bath.W * tau) ** 2 + p * (-0.5 * np.log1p(wt * wt) + _log_x_over_sinh(math.pi * bath.T * tau))
    phase = -p * np.arctan(wt)
    return np.exp(log_mod) * np.exp(1j * phase)


def truncation_time(bath: BathParams) -> float:
    """Time at which the Gaussian envelope falls below ``ENVELOPE_FLOOR``."""
    return math.sqrt(2.0 * math.log(1.0 / ENVELOPE_FLOOR)) / bath.W


def lineshape_rate(delta_sq: float, omega: float, bath: BathParams, rtol: float = 1e-8) -> float:
    """2 Re int_0^inf e^{-i(omega+eps_p) tau} exp(-W^2 tau^2/2) Phi_HF(tau) dtau, times delta_sq.

    The oscillating factor is handled by QUADPACK's weighted (cos/sin) rules on
    the truncated interval.
    """
    a = float(omega) + bath.eps_p
    tmax = truncation_time(bath)

    def re(t):
        return bath_kernel(t, bath).real

    def im(t):
        return bath_kernel(t, bath).imag

    opts = dict(epsabs=0.0, epsrel=1e-10, limit=2000)
    with warnings.catch_warnings():
        # the error estimate is checked explicitly below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        c, ec, s, es = _weighted_parts(re, im, a, tmax, bath.eta > 0, opts)
    # Re[e^{-i a t} K] = cos(a t) Re K + sin(a t) Im K
    value = 2.0 * (c + s)
    err = 2.0 * (ec + es)
    floor = ENVELOPE_FLOOR * SQRT_2PI / bath.W
    if err > rtol * abs(value) + floor:
        raise QuadratureError(f"line-shape quadrature error {err:.3e} exceeds tolerance at omega={omega}")
    return float(delta_sq) * value


def _weighted_parts(re, im, a, tmax, with_imag, opts):
    if a == 0.0:
        c, ec = integrate.quad(re, 0.0, tmax, **opts)
        s, es = 0.0, 0.0
    else:
        c, ec = integrate.quad(re, 0.0, tmax, weight="cos", wvar=a, **opts)
        s, es = integrate.quad(im, 0.0, tmax, weight="sin", wvar=a, **opts) if with_imag else (0.0, 0.0)
    return c, ec, s, es


def lineshape_rates(delta_sq, omegas, bath: BathParams) -> np.ndarray:
    return np.array([lineshape_rate(delta_sq, w, bath) for w in np.atleast_1d(omegas)])


def rate(delta_sq, omega, bath: BathParams, mode: str = "marcus"):
    if mode == "marcus":
        return marcus_rate(delta_sq, omega, bath)
    if mode == "lineshape":
        om = np.asarray(omega, dtype=float)
        out = lineshape_rates(1.0, om.ravel(), bath).reshape(om.shape)
        return np.asarray(delta_sq) * out
    raise ValueError(f"unknown rate mode {mode!r}")
