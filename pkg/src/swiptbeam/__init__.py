"""Robust max-min SWIPT beamforming via S-procedure LMIs and SDP relaxation."""

from .eh import EhParams, UnattainableTargetError, harvested_power, required_rf_power, sigmoid_psi
from .model import (
    BeamformingDesign,
    ChannelSet,
    SystemConfig,
    achievable_rate,
    harvested_power_linear,
    received_rf_power,
)
from .channels import ErrorSpec, ScenarioGeometry, corrupt_estimates, draw_channels, path_gain
from .lmi import (
    ConicProblem,
    LmiBlock,
    assemble_feasibility_sdp,
    build_c2_lmi,
    build_c5_lmi,
    realify,
)
from .solver import ConicSolution, SolverOptions, certify, solve
from .optimizer import (
    KktCertificate,
    MaxMinResult,
    RankOneExtractionError,
    baseline1_linear_design,
    baseline2_isotropic,
    certified_min_harvest,
    extract_beamformers,
    robustness_check,
    solve_maxmin,
    verify_kkt,
    worst_case_received_power,
)

__version__ = "0.1.0"

__all__ = [
    "EhParams",
    "UnattainableTargetError",
    "harvested_power",
    "required_rf_power",
    "sigmoid_psi",
    "BeamformingDesign",
    "ChannelSet",
    "SystemConfig",
    "achievable_rate",
    "harvested_power_linear",
    "received_rf_power",
    "ErrorSpec",
    "ScenarioGeometry",
    "corrupt_estimates",
    "draw_channels",
    "path_gain",
    "ConicProblem",
    "LmiBlock",
    "assemble_feasibility_sdp",
    "build_c2_lmi",
    "build_c5_lmi",
    "realify",
    "ConicSolution",
    "SolverOptions",
    "certify",
    "solve",
    "KktCertificate",
    "MaxMinResult",
    "RankOneExtractionError",
    "baseline1_linear_design",
    "baseline2_isotropic",
    "certified_min_harvest",
    "extract_beamformers",
    "robustness_check",
    "solve_maxmin",
    "verify_kkt",
    "worst_case_received_power",
]
