"""Random channel generation for the simulated downlink.

Information receivers see Rayleigh fading, energy harvesters see Rician
fading with a deterministic all-ones line-of-sight component, and both are
scaled by free-space path gain at the carrier frequency.  CSI estimation
errors are drawn uniformly inside norm balls whose radii are a fixed
fraction of the true channel norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, SystemConfig

__all__ = [
    "ScenarioGeometry",
    "ErrorSpec",
    "path_gain",
    "draw_channels",
    "corrupt_estimates",
]

_SPEED_OF_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class ScenarioGeometry:
    """Transmitter/receiver geometry and RF front-end constants."""

    ir_distance: float = 100.0
    er_distance: float = 5.0
    carrier_hz: float = 915e6
    antenna_gain_db: float = 10.0  # per end
    rician_k_db: float = 3.0

    def __post_init__(self) -> None:
        if self.ir_distance <= 0.0 or self.er_distance <= 0.0:
            raise ValueError("distances must be positive")
        if self.carrier_hz <= 0.0:
            raise ValueError("carrier frequency must be positive")


@dataclass(frozen=True)
class ErrorSpec:
    """Normalized CSI error variances: squared error-norm bound over squared channel norm."""

    ir_norm_var: float = 0.01
    er_norm_var: float = 0.01

    def __post_init__(self) -> None:
        if not (0.0 <= self.ir_norm_var < 1.0 and 0.0 <= self.er_norm_var < 1.0):
            raise ValueError("normalized error variances must lie in [0, 1)")


def path_gain(geometry: ScenarioGeometry, distance: float) -> float:
    """Free-space power gain at ``distance`` m, including both antenna gains."""
    if distance <= 0.0:
        raise ValueError("distance must be positive")
    wavelength = _SPEED_OF_LIGHT / geometry.carrier_hz
    end_gain = 10.0 ** (geometry.antenna_gain_db / 10.0)
    return end_gain * end_gain * (wavelength / (4.0 * np.pi * distance)) ** 2


def _cn_matrix(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    """Circularly-symmetric complex Gaussian entries with unit variance."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channels(config: SystemConfig, geometry: ScenarioGeometry, seed) -> ChannelSet:
    """Draw one true channel realization, reproducible per ``seed``.

    IR links: i.i.d. Rayleigh entries scaled by the square-root path gain at
    ``ir_distance``.  ER links: Rician with the configured K-factor, the
    line-of-sight part being the deterministic all-ones matrix, scaled by the
    square-root path gain at ``er_distance``.  The returned set carries the
    truths in both the estimate and the truth slots; use
    :func:`corrupt_estimates` to produce imperfect CSI.
    """
    rng = np.random.default_rng(seed)
    ir_scale = np.sqrt(path_gain(geometry, geometry.ir_distance))
    er_scale = np.sqrt(path_gain(geometry, geometry.er_distance))
    kappa = 10.0 ** (geometry.rician_k_db / 10.0)
    los_frac = np.sqrt(kappa / (1.0 + kappa))
    nlos_frac = np.sqrt(1.0 / (1.0 + kappa))

    ir_true = tuple(
        ir_scale * _cn_matrix(rng, (config.n_tx,)) for _ in range(config.n_ir)
    )
    los = np.ones((config.n_tx, config.n_rx), dtype=complex)
    er_true = tuple(
        er_scale * (los_frac * los + nlos_frac * _cn_matrix(rng, (config.n_tx, config.n_rx)))
        for _ in range(config.n_er)
    )
    return ChannelSet(ir_estimates=ir_true, er_estimates=er_true, ir_true=ir_true, er_true=er_true)


def _uniform_ball(rng: np.random.Generator, shape: tuple[int, ...], radius: float) -> np.ndarray:
    """Complex array uniformly distributed in the Frobenius-norm ball."""
    n_real = 2 * int(np.prod(shape))
    direction = _cn_matrix(rng, shape)
    norm = np.linalg.norm(direction)
    if norm == 0.0:
        return np.zeros(shape, dtype=complex)
    r = radius * rng.uniform() ** (1.0 / n_real)
    return direction * (r / norm)


def corrupt_estimates(
    channels: ChannelSet, errors: ErrorSpec, seed
) -> tuple[ChannelSet, list[float], list[float]]:
    """Replace true channels by noisy estimates with ball-bounded errors.

    The error radii are ``sqrt(var)`` times the true channel norms; each
    error is drawn uniformly inside its ball and subtracted from the truth,
    so truth = estimate + error holds exactly and every error satisfies its
    norm bound.  Returns the new channel set plus the per-receiver radii.
    """
    if channels.ir_true is None or channels.er_true is None:
        raise ValueError("channels must carry true realizations to corrupt")
    rng = np.random.default_rng(seed)
    rho = [float(np.sqrt(errors.ir_norm_var) * np.linalg.norm(h)) for h in channels.ir_true]
    upsilon = [float(np.sqrt(errors.er_norm_var) * np.linalg.norm(g)) for g in channels.er_true]

    ir_est = []
    for h, r in zip(channels.ir_true, rho):
        err = _uniform_ball(rng, h.shape, r)
        assert np.linalg.norm(err) <= r * (1.0 + 1e-12)
        ir_est.append(h - err)
    er_est = []
    for g, u in zip(channels.er_true, upsilon):
        err = _uniform_ball(rng, g.shape, u)
        assert np.linalg.norm(err) <= u * (1.0 + 1e-12)
        er_est.append(g - err)

    corrupted = ChannelSet(
        ir_estimates=tuple(ir_est),
        er_estimates=tuple(er_est),
        ir_true=channels.ir_true,
        er_true=channels.er_true,
    )
    return corrupted, rho, upsilon
