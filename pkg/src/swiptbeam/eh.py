"""Parametric non-linear energy-harvesting model.

The rectifier is described by a three-parameter logistic curve: saturation
level ``m_sat`` (W), charging-rate slope ``a_rate`` (1/W) and turn-on
threshold ``b_turn_on`` (W).  The raw sigmoid output is shifted and scaled so
that zero RF input harvests exactly zero DC power; the normalization constant
``omega`` is fixed by the other three parameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "EhParams",
    "UnattainableTargetError",
    "sigmoid_psi",
    "harvested_power",
    "required_rf_power",
]

# Exponent clamp: exp() of anything past this is saturated in IEEE double.
_EXP_CLAMP = 700.0


class UnattainableTargetError(ValueError):
    """Requested harvested-power target at or above the saturation level."""


def _logistic(z: float) -> float:
    """1 / (1 + e^z), safe for any finite z."""
    if z > _EXP_CLAMP:
        return 0.0
    return 1.0 / (1.0 + math.exp(z))


@dataclass(frozen=True)
class EhParams:
    """Rectifier curve parameters for one energy harvester.

    ``omega`` is derived from ``a_rate`` and ``b_turn_on``; passing it
    explicitly is allowed for round-tripping serialized configs, but the
    value is checked against the defining expression.
    """

    m_sat: float
    a_rate: float
    b_turn_on: float
    omega: float | None = None

    def __post_init__(self) -> None:
        if not (self.m_sat > 0.0):
            raise ValueError(f"m_sat must be positive, got {self.m_sat}")
        if not (self.a_rate > 0.0):
            raise ValueError(f"a_rate must be positive, got {self.a_rate}")
        if not (self.b_turn_on > 0.0):
            raise ValueError(f"b_turn_on must be positive, got {self.b_turn_on}")
        derived = _logistic(self.a_rate * self.b_turn_on)
        if self.omega is None:
            object.__setattr__(self, "omega", derived)
        elif abs(self.omega - derived) > 1e-12 * derived:
            raise ValueError(
                f"omega={self.omega!r} inconsistent with a_rate*b_turn_on "
                f"(expected {derived!r})"
            )


def sigmoid_psi(p_rf: float, params: EhParams) -> float:
    """Raw logistic rectifier output (W) for RF input power ``p_rf`` (W).

    Strictly increasing in ``p_rf``; tends to ``m_sat`` in saturation.
    """
    if p_rf < 0.0:
        raise ValueError(f"p_rf must be nonnegative, got {p_rf}")
    # Argument equals a*b at p_rf = 0, which reproduces omega bit-exactly.
    z = params.a_rate * (params.b_turn_on - p_rf)
    return params.m_sat * _logistic(z)


def harvested_power(p_rf: float, params: EhParams) -> float:
    """Harvested DC power (W): the zero-offset-normalized sigmoid.

    Equals 0 at ``p_rf`` = 0 exactly, increases strictly, and approaches
    ``m_sat`` from below.
    """
    if p_rf < 0.0:
        raise ValueError(f"p_rf must be nonnegative, got {p_rf}")
    z = params.a_rate * (params.b_turn_on - p_rf)
    # m*(sig - omega) rather than (m*sig - m*omega): at p_rf=0 the two
    # logistic evaluations are bitwise identical, so the result is exactly 0.
    return params.m_sat * (_logistic(z) - params.omega) / (1.0 - params.omega)


def required_rf_power(tau: float, params: EhParams) -> float:
    """Invert :func:`harvested_power`: minimum RF input to harvest ``tau`` W.

    Raises
    ------
    ValueError
        If ``tau`` is negative.
    UnattainableTargetError
        If ``tau`` is at or beyond the saturation level ``m_sat``.
    """
    if tau < 0.0:
        raise ValueError(f"tau must be nonnegative, got {tau}")
    if tau == 0.0:
        return 0.0
    if tau >= params.m_sat:
        raise UnattainableTargetError(
            f"target {tau} W unattainable: saturation level is {params.m_sat} W"
        )
    m, a, b, omega = params.m_sat, params.a_rate, params.b_turn_on, params.omega
    psi_t = tau * (1.0 - omega) + m * omega
    # m - psi_t == (1-omega)*(m-tau); the log-difference form stays accurate
    # as tau approaches saturation, where the direct ratio would cancel.
    log_ratio = math.log1p(-omega) + math.log(m - tau) - math.log(psi_t)
    return b - log_ratio / a
