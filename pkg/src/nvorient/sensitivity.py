"""Angle-sensitivity figures of merit for the intensity-ratio protocol."""

from __future__ import annotations

import math
from dataclasses import dataclass

_TWO_SQRT2 = 2.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class SensitivityInput:
    """Operating point: phi (rad), relative intensity error, repetitions, time (s)."""

    phi: float
    sigma_rel: float
    n: int = 1
    t: float = 1.0

    def __post_init__(self):
        if not self.sigma_rel > 0:
            raise ValueError("sigma_rel must be positive")
        if self.n < 1:
            raise ValueError("repetition count must be at least 1")
        if not self.t > 0:
            raise ValueError("sensing time must be positive")


def signal_ratio(i1: float, i2: float) -> float:
    """Intensity ratio S = I1/I2 = tan^2(phi)."""
    if i1 < 0:
        raise ValueError("I1 must be nonnegative")
    if not i2 > 0:
        raise ValueError("I2 must be positive; the ratio diverges as phi -> pi/2")
    return i1 / i2


def phi_from_ratio(s: float) -> float:
    """Invert S = tan^2(phi) on [0, pi/2)."""
    if s < 0:
        raise ValueError("ratio must be nonnegative")
    return math.atan(math.sqrt(s))


def eta(inp: SensitivityInput) -> float:
    """Angle sensitivity sin(2*phi)/(2*sqrt(2)) * sigma_rel * sqrt(n*t), rad/sqrt(Hz).

    Reported verbatim from the formula; its vanishing at phi = 0 and phi =
    pi/2 is a linearization artifact.
    """
    return math.sin(2.0 * inp.phi) / _TWO_SQRT2 * inp.sigma_rel * math.sqrt(inp.n * inp.t)


def eta_max(sigma_rel: float, n: int = 1, t: float = 1.0) -> float:
    """Best-case sensitivity, sin(2*phi) = 1."""
    return eta(SensitivityInput(phi=math.pi / 4.0, sigma_rel=sigma_rel, n=n, t=t))


def shot_noise_sigma_rel(rate_kcps: float, contrast: float, t_s: float) -> float:
    """Shot-noise model sigma_I/I = 1 / (contrast * sqrt(rate * 1000 * t))."""
    if not rate_kcps > 0:
        raise ValueError("count rate must be positive")
    if not 0.0 < contrast <= 1.0:
        raise ValueError("contrast must lie in (0, 1]")
    if not t_s > 0:
        raise ValueError("integration time must be positive")
    return 1.0 / (contrast * math.sqrt(rate_kcps * 1000.0 * t_s))


def sigma_s(phi: float, sigma_rel: float) -> float:
    """Uncertainty of the ratio signal: sqrt(2) * tan^2(phi) * sigma_rel."""
    return math.sqrt(2.0) * math.tan(phi) ** 2 * sigma_rel
