"""Shared instance builders for the test suite.

Two families:

* ``unit_instance`` draws Table-I-shaped fading (Rayleigh links to the
  information receivers, Rician with an all-ones line-of-sight to the
  harvesters) at normalized channel scales, with the noise floor set for a
  ~22 dB per-user SNR so the QoS constraints genuinely bind and the
  rank/certificate structure is numerically resolvable.  Harvester gains
  put received power in the rectifier's active region.

* ``physical_instance`` uses the full simulated geometry (free-space path
  gain, 100 m / 5 m, -95 dBm noise, 36 dBm budget).
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from swiptbeam import (
    ChannelSet,
    EhParams,
    ErrorSpec,
    ScenarioGeometry,
    SystemConfig,
    corrupt_estimates,
    draw_channels,
)

EH_TABLE = EhParams(m_sat=24e-3, a_rate=150.0, b_turn_on=0.014)


def _cn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def unit_instance(
    n_tx=4,
    n_rx=2,
    n_ir=2,
    n_er=2,
    seed=0,
    sinr_db=10.0,
    p_max=10.0,
    err_var=0.01,
    eh_params=None,
    snr_db=24.0,
):
    """One synthetic instance: (config, estimates, radii).

    Harvester channels are scaled so the optimized received power lands in
    the rectifier's active region regardless of the antenna counts.
    """
    rng = np.random.default_rng(seed)
    g_scale = 0.02 * np.sqrt(11.657) / (np.sqrt(n_tx) + np.sqrt(n_rx))
    noise = p_max * n_tx / 10.0 ** (snr_db / 10.0)
    kappa = 10.0**0.3
    los = np.sqrt(kappa / (1 + kappa))
    nlos = np.sqrt(1 / (1 + kappa))

    h_true = [_cn(rng, n_tx) for _ in range(n_ir)]
    g_true = [
        g_scale * (los * np.ones((n_tx, n_rx)) + nlos * _cn(rng, n_tx, n_rx))
        for _ in range(n_er)
    ]
    rho, ups, h_est, g_est = [], [], [], []
    for h in h_true:
        r = np.sqrt(err_var) * np.linalg.norm(h)
        rho.append(float(r))
        d = _cn(rng, n_tx)
        d *= r * rng.uniform() ** (1.0 / (2 * n_tx)) / np.linalg.norm(d)
        h_est.append(h - d)
    for g in g_true:
        u = np.sqrt(err_var) * np.linalg.norm(g)
        ups.append(float(u))
        d = _cn(rng, n_tx, n_rx)
        d *= u * rng.uniform() ** (1.0 / (2 * n_tx * n_rx)) / np.linalg.norm(d)
        g_est.append(g - d)

    params = eh_params or (EH_TABLE,) * n_er
    config = SystemConfig(
        n_tx=n_tx,
        n_rx=n_rx,
        n_ir=n_ir,
        n_er=n_er,
        p_max=p_max,
        noise_power=noise,
        sinr_targets=(10.0 ** (sinr_db / 10.0),) * n_ir,
        eh_params=tuple(params),
        ir_error_radii=tuple(rho),
        er_error_radii=tuple(ups),
    )
    estimates = ChannelSet(
        ir_estimates=tuple(h_est),
        er_estimates=tuple(g_est),
        ir_true=tuple(h_true),
        er_true=tuple(g_true),
    )
    return config, estimates, (rho, ups)


def physical_instance(n_tx=6, n_rx=2, n_ir=2, n_er=4, seed=0, sinr_db=10.0, err_var=0.01):
    geometry = ScenarioGeometry()
    config = SystemConfig(
        n_tx=n_tx,
        n_rx=n_rx,
        n_ir=n_ir,
        n_er=n_er,
        p_max=10.0 ** ((36.0 - 30.0) / 10.0),
        noise_power=10.0 ** ((-95.0 - 30.0) / 10.0),
        sinr_targets=(10.0 ** (sinr_db / 10.0),) * n_ir,
        eh_params=(EH_TABLE,) * n_er,
    )
    channels = draw_channels(config, geometry, np.random.SeedSequence((seed,)))
    estimates, rho, ups = corrupt_estimates(
        channels, ErrorSpec(err_var, err_var), np.random.SeedSequence((seed, 7))
    )
    config = replace(config, ir_error_radii=tuple(rho), er_error_radii=tuple(ups))
    return config, estimates, (rho, ups)


def solved_unit_instances(count, start_seed=0, **kwargs):
    """Yield `count` solved max-min results on unit instances, skipping
    infeasible or numerically unresolved draws."""
    from swiptbeam import solve_maxmin

    seed = start_seed
    produced = 0
    while produced < count:
        config, estimates, radii = unit_instance(seed=seed, **kwargs)
        seed += 1
        try:
            result = solve_maxmin(config, estimates, radii)
        except Exception:
            continue
        if result.status != "solved":
            continue
        produced += 1
        yield config, estimates, radii, result
