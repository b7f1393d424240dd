"""System configuration and deterministic link-level performance formulas.

Holds the downlink scenario description (antenna counts, power budget, QoS
targets, harvester circuits, CSI error radii), channel containers, and the
closed-form expressions for per-user rate, received RF power and the linear
harvesting model.  Everything here is a pure function of its inputs; all
powers are in watts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eh import EhParams

__all__ = [
    "SystemConfig",
    "ChannelSet",
    "BeamformingDesign",
    "received_rf_power",
    "achievable_rate",
    "harvested_power_linear",
]


@dataclass(frozen=True)
class SystemConfig:
    """Static scenario parameters for one SWIPT downlink.

    ``n_ir`` single-antenna information receivers and ``n_er`` energy
    harvesters with ``n_rx`` antennas each are served by an ``n_tx``-antenna
    transmitter under total power budget ``p_max`` (W).
    """

    n_tx: int
    n_rx: int
    n_ir: int
    n_er: int
    p_max: float
    noise_power: float
    sinr_targets: tuple[float, ...]
    eh_params: tuple[EhParams, ...]
    ir_error_radii: tuple[float, ...] = ()
    er_error_radii: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        for name in ("n_tx", "n_rx", "n_ir", "n_er"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.p_max < 0.0:
            raise ValueError("p_max must be nonnegative")
        if not (self.noise_power > 0.0):
            raise ValueError("noise_power must be positive")
        object.__setattr__(self, "sinr_targets", tuple(self.sinr_targets))
        object.__setattr__(self, "eh_params", tuple(self.eh_params))
        if not self.ir_error_radii:
            object.__setattr__(self, "ir_error_radii", (0.0,) * self.n_ir)
        else:
            object.__setattr__(self, "ir_error_radii", tuple(self.ir_error_radii))
        if not self.er_error_radii:
            object.__setattr__(self, "er_error_radii", (0.0,) * self.n_er)
        else:
            object.__setattr__(self, "er_error_radii", tuple(self.er_error_radii))
        if len(self.sinr_targets) != self.n_ir:
            raise ValueError("sinr_targets length must equal n_ir")
        if len(self.eh_params) != self.n_er:
            raise ValueError("eh_params length must equal n_er")
        if len(self.ir_error_radii) != self.n_ir:
            raise ValueError("ir_error_radii length must equal n_ir")
        if len(self.er_error_radii) != self.n_er:
            raise ValueError("er_error_radii length must equal n_er")
        if any(g <= 0.0 for g in self.sinr_targets):
            raise ValueError("all SINR targets must be positive")
        if any(r < 0.0 for r in self.ir_error_radii + self.er_error_radii):
            raise ValueError("error radii must be nonnegative")


@dataclass(frozen=True)
class ChannelSet:
    """Channel estimates (and, for simulations, the true realizations).

    ``ir_estimates[k]`` is the length-``n_tx`` vector of the transmitter to
    information receiver k; ``er_estimates[j]`` is the ``n_tx x n_rx`` matrix
    to energy harvester j.
    """

    ir_estimates: tuple[np.ndarray, ...]
    er_estimates: tuple[np.ndarray, ...]
    ir_true: tuple[np.ndarray, ...] | None = None
    er_true: tuple[np.ndarray, ...] | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "ir_estimates", tuple(np.asarray(h, dtype=complex) for h in self.ir_estimates))
        object.__setattr__(self, "er_estimates", tuple(np.asarray(g, dtype=complex) for g in self.er_estimates))
        if self.ir_true is not None:
            object.__setattr__(self, "ir_true", tuple(np.asarray(h, dtype=complex) for h in self.ir_true))
        if self.er_true is not None:
            object.__setattr__(self, "er_true", tuple(np.asarray(g, dtype=complex) for g in self.er_true))
        n_tx = self.ir_estimates[0].shape[0] if self.ir_estimates else self.er_estimates[0].shape[0]
        for h in self.ir_estimates:
            if h.shape != (n_tx,):
                raise ValueError("inconsistent IR channel shapes")
            if not np.all(np.isfinite(h.view(float))):
                raise ValueError("non-finite IR channel entries")
        for g in self.er_estimates:
            if g.ndim != 2 or g.shape[0] != n_tx:
                raise ValueError("inconsistent ER channel shapes")
            if not np.all(np.isfinite(g.view(float))):
                raise ValueError("non-finite ER channel entries")

    @property
    def n_tx(self) -> int:
        return self.ir_estimates[0].shape[0]

    @property
    def n_ir(self) -> int:
        return len(self.ir_estimates)

    @property
    def n_er(self) -> int:
        return len(self.er_estimates)


@dataclass
class BeamformingDesign:
    """One transmit design: per-user covariances, energy covariance, auxiliaries.

    ``w_mats[k]`` and ``we_mat`` are Hermitian PSD ``n_tx x n_tx`` matrices.
    ``tau`` is the guaranteed minimum harvested power (W); ``betas`` the
    per-harvester worst-case received-power levels the design certifies.
    ``vectors`` holds rank-one beamforming vectors once extracted.
    """

    w_mats: list[np.ndarray]
    we_mat: np.ndarray
    tau: float = 0.0
    betas: list[float] = field(default_factory=list)
    deltas: list[float] = field(default_factory=list)
    nus: list[float] = field(default_factory=list)
    vectors: list[np.ndarray] | None = None

    def total_covariance(self) -> np.ndarray:
        """Sum of all transmit covariances (information plus energy)."""
        return sum(self.w_mats) + self.we_mat

    def total_power(self) -> float:
        return float(np.trace(self.total_covariance()).real)

    def validate(self, p_max: float | None = None) -> None:
        """Check Hermitian symmetry, near-PSDness and the power budget."""
        for name, mat in [("we_mat", self.we_mat)] + [
            (f"w_mats[{k}]", w) for k, w in enumerate(self.w_mats)
        ]:
            scale = np.abs(mat).max() or 1.0
            if np.abs(mat - mat.conj().T).max() > 1e-9 * scale:
                raise ValueError(f"{name} is not Hermitian")
            trace = np.trace(mat).real
            if np.linalg.eigvalsh(mat).min() < -1e-8 * max(trace, scale):
                raise ValueError(f"{name} is not positive semidefinite")
        if p_max is not None and self.total_power() > p_max * (1.0 + 1e-6) + 1e-15:
            raise ValueError("total transmit power exceeds the budget")


def received_rf_power(design: BeamformingDesign, g: np.ndarray) -> float:
    """Total RF power (W) collected by a harvester with channel matrix ``g``.

    Equals the trace of the total transmit covariance against ``g g^H``.
    """
    g = np.asarray(g, dtype=complex)
    cov = design.total_covariance()
    if g.ndim != 2 or g.shape[0] != cov.shape[0]:
        raise ValueError(f"channel shape {g.shape} incompatible with {cov.shape[0]} tx antennas")
    return float(np.trace(cov @ g @ g.conj().T).real)


def achievable_rate(design: BeamformingDesign, h: np.ndarray, k: int, noise_power: float) -> float:
    """Rate (bit/s/Hz) of information receiver ``k`` for channel vector ``h``.

    The energy signal is excluded from the interference (it is known at the
    receivers and cancelled before decoding).  Uses the extracted beamforming
    vectors when available, otherwise the covariance trace form; the two
    agree whenever the covariances are rank one.
    """
    h = np.asarray(h, dtype=complex)
    n_users = len(design.w_mats)
    if not 0 <= k < n_users:
        raise IndexError(f"user index {k} out of range for {n_users} users")
    if h.shape != (design.we_mat.shape[0],):
        raise ValueError("channel vector length does not match the design")
    if design.vectors is not None:
        powers = [abs(np.vdot(w, h)) ** 2 for w in design.vectors]
    else:
        powers = [float((h.conj() @ w @ h).real) for w in design.w_mats]
    signal = powers[k]
    interference = sum(p for i, p in enumerate(powers) if i != k)
    return float(np.log2(1.0 + signal / (interference + noise_power)))


def harvested_power_linear(p_rf: float, eta: float) -> float:
    """Linear harvesting model: constant conversion efficiency ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if p_rf < 0.0:
        raise ValueError(f"p_rf must be nonnegative, got {p_rf}")
    return eta * p_rf
