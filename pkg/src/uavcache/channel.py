"""Air-to-ground channel: LoS probability, shadowed pathloss, SINR and rates.

Distances are meters, heights meters, ``fc`` in GHz. Pathloss follows the
3GPP-style UAV model valid for 22.5 m <= h <= 300 m.

With ``shadowing="off"`` a link carries no random draw at all: its pathloss is
the LoS-probability-weighted mean of the two branch means, which keeps the
pathloss a smooth, non-decreasing function of distance for unit tests and
oracle comparisons.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import HEIGHT_RANGE, ChannelParams
from .errors import DomainError, EvaluationError, LoadError, StateError
from .model import Scenario, rng_stream

NLOS_SHADOW_STD = 6.0


def _check_geometry(d3, h):
    d3 = np.asarray(d3, dtype=float)
    h = np.asarray(h, dtype=float)
    if ((h < HEIGHT_RANGE[0]) | (h > HEIGHT_RANGE[1])).any():
        raise DomainError(f"altitude outside validity range {HEIGHT_RANGE}: {h}")
    if (d3 < h * (1.0 - 1e-12)).any():
        raise DomainError("3-D distance cannot be shorter than the altitude")
    return d3, h


def horizontal_distance(d3, h):
    return np.sqrt(np.maximum(d3 * d3 - h * h, 0.0))


def los_breakpoint(h):
    """Distance ``d0`` below which the link is always LoS."""
    return np.maximum(295.05 * np.log10(h) - 432.94, 18.0)


def los_decay(h):
    return 233.98 * np.log10(h) - 0.95


def los_probability(d3, h):
    d3, h = _check_geometry(d3, h)
    r = horizontal_distance(d3, h)
    d0 = los_breakpoint(h)
    p1 = los_decay(h)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r > d0, d0 / np.where(r > 0, r, 1.0), 1.0)
        far = ratio + np.exp(-r / p1) * (1.0 - ratio)
    out = np.where(r <= d0, 1.0, far)
    return float(out) if out.ndim == 0 else out


def pathloss_los(d3, h, fc_ghz):
    return 30.9 + (22.25 - 0.5 * np.log10(h)) * np.log10(d3) + 20.0 * np.log10(fc_ghz)


def pathloss_nlos(d3, h, fc_ghz):
    nlos = 32.4 + (43.2 - 7.6 * np.log10(h)) * np.log10(d3) + 20.0 * np.log10(fc_ghz)
    return np.maximum(pathloss_los(d3, h, fc_ghz), nlos)


def shadow_std(h, los):
    return np.where(los, 4.64 * np.exp(-0.0066 * np.asarray(h, dtype=float)), NLOS_SHADOW_STD)


@dataclass(frozen=True)
class LinkRealization:
    los: bool
    pathloss_db: float
    shadow_db: float


def _realize(d3, h, fc_ghz, shadowing, los_rng, shadow_rng, force_los=None):
    """Vectorised core of ``sample_link``; returns ``(los, pathloss_db, shadow_db)``."""
    d3, h = _check_geometry(d3, h)
    d3, h = np.broadcast_arrays(d3, h)
    p_los = np.asarray(los_probability(d3, h))
    pl_los = pathloss_los(d3, h, fc_ghz)
    pl_nlos = pathloss_nlos(d3, h, fc_ghz)
    if force_los is not None:
        los = np.broadcast_to(np.asarray(force_los, dtype=bool), d3.shape)
        mean = np.where(los, pl_los, pl_nlos)
    elif shadowing == "off":
        los = p_los >= 0.5
        mean = p_los * pl_los + (1.0 - p_los) * pl_nlos
    else:
        los = los_rng.random(d3.shape) < p_los
        mean = np.where(los, pl_los, pl_nlos)
    if shadowing == "random":
        shadow = shadow_rng.standard_normal(d3.shape) * shadow_std(h, los)
    else:
        shadow = np.zeros(d3.shape)
    return los, mean + shadow, shadow


def sample_link(d3, h, rng, params: ChannelParams, los=None) -> LinkRealization:
    """Draw one link. ``los`` forces the branch; ``rng`` feeds both LoS and shadow draws."""
    los_arr, pl, shadow = _realize(d3, h, params.fc_ghz, params.shadowing, rng, rng, los)
    return LinkRealization(bool(los_arr), float(pl), float(shadow))


@dataclass(frozen=True)
class LinkTable:
    """Frozen per-replication link realizations.

    ``pl_access[n, k]`` is candidate ``n`` to user ``k``; ``pl_backhaul[n]`` is
    MBS to candidate ``n``.
    """

    pl_access: np.ndarray
    pl_backhaul: np.ndarray
    los_access: np.ndarray
    los_backhaul: np.ndarray

    def rx_access(self, params: ChannelParams) -> np.ndarray:
        return params.p_uav_w * db_to_linear(-self.pl_access)

    def rx_backhaul(self, params: ChannelParams) -> np.ndarray:
        return params.p_mbs_w * db_to_linear(-self.pl_backhaul)


def sample_links(scenario: Scenario, params: ChannelParams, seed: int) -> LinkTable:
    cand = scenario.candidates
    d_access = np.linalg.norm(cand[:, None, :] - scenario.users[None, :, :], axis=2)
    h_access = np.broadcast_to(cand[:, 2:3], d_access.shape)
    d_bh = np.linalg.norm(cand - scenario.mbs_position[None, :], axis=1)
    los_rng = rng_stream(seed, "los")
    shadow_rng = rng_stream(seed, "shadow")
    los_a, pl_a, _ = _realize(d_access, h_access, params.fc_ghz, params.shadowing, los_rng, shadow_rng)
    los_b, pl_b, _ = _realize(d_bh, cand[:, 2], params.fc_ghz, params.shadowing, los_rng, shadow_rng)
    for arr in (pl_a, pl_b, los_a, los_b):
        arr.setflags(write=False)
    return LinkTable(pl_a, pl_b, los_a, los_b)


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def access_sinr(links: LinkTable, params: ChannelParams, deployment) -> np.ndarray:
    """SINR ``(M, K)`` of each user from each deployed UAV.

    Interference is the sum over every other deployed UAV.
    """
    rx = links.rx_access(params)[np.asarray(deployment)]
    interference = rx.sum(axis=0, keepdims=True) - rx
    return rx / (interference + params.noise_access_w)


def access_snr(links: LinkTable, params: ChannelParams, candidates=None) -> np.ndarray:
    rx = links.rx_access(params)
    if candidates is not None:
        rx = rx[np.asarray(candidates)]
    return rx / params.noise_access_w


def backhaul_sinr(links: LinkTable, params: ChannelParams, deployment=None) -> np.ndarray:
    rx = links.rx_backhaul(params)
    if deployment is not None:
        rx = rx[np.asarray(deployment)]
    return rx / (params.mbs_interference_w + params.noise_backhaul_w)


def _check_placed(deployment, m):
    if not 0 <= m < len(deployment):
        raise StateError(f"UAV {m} is not deployed")


def sinr_user(links: LinkTable, params: ChannelParams, deployment, m: int, k: int) -> float:
    _check_placed(deployment, m)
    return float(access_sinr(links, params, deployment)[m, k])


def shannon_rate(bandwidth, load, sinr):
    load = np.asarray(load)
    if (load <= 0).any():
        raise LoadError("rates are only defined for UAVs serving at least one user")
    return bandwidth / load * np.log2(1.0 + np.asarray(sinr, dtype=float))


def rate_user(links: LinkTable, params: ChannelParams, state, m: int, k: int) -> float:
    _check_placed(state.deployment, m)
    sinr = sinr_user(links, params, state.deployment, m, k)
    return float(shannon_rate(params.bandwidth, state.load[m], sinr))


def rate_backhaul(links: LinkTable, params: ChannelParams, state, m: int) -> float:
    _check_placed(state.deployment, m)
    sinr = backhaul_sinr(links, params, state.deployment)[m]
    return float(shannon_rate(params.backhaul_bandwidth, state.load[m], sinr))


def spectral_efficiency(sinr):
    se = np.log2(1.0 + np.asarray(sinr, dtype=float))
    if (se <= 0).any():
        raise EvaluationError("zero spectral efficiency (SINR underflow)")
    return se
