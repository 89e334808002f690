"""Bundle of everything the solvers need for one replication."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .channel import LinkTable, backhaul_sinr, sample_links
from .config import ChannelParams, Config, MosParams, NetworkConfig
from .model import (
    ContentLibrary,
    RequestAssignment,
    Scenario,
    generate_requests,
    generate_scenario,
)


@dataclass(frozen=True)
class Problem:
    scenario: Scenario
    library: ContentLibrary
    requests: RequestAssignment
    links: LinkTable
    channel: ChannelParams
    mos: MosParams
    M: int
    capacity: int

    @property
    def K(self) -> int:
        return self.scenario.K

    @property
    def N(self) -> int:
        return self.scenario.N

    @property
    def F(self) -> int:
        return self.library.F

    @property
    def s(self) -> float:
        return self.library.size_bits

    @cached_property
    def rx_access(self) -> np.ndarray:
        """Received UAV power (W) ``(N, K)`` for every candidate-user pair."""
        return self.links.rx_access(self.channel)

    @cached_property
    def backhaul_se(self) -> np.ndarray:
        """Backhaul spectral efficiency per candidate ``(N,)``."""
        return np.log2(1.0 + backhaul_sinr(self.links, self.channel))


def build_problem(config: Config | NetworkConfig, seed: int, channel: ChannelParams | None = None,
                  mos: MosParams | None = None) -> Problem:
    if isinstance(config, Config):
        net, channel, mos = config.network, channel or config.channel, mos or config.mos
    else:
        net = config
    channel = channel or ChannelParams()
    mos = mos or MosParams()
    scenario = generate_scenario(net, seed)
    library = ContentLibrary.from_config(net)
    requests = generate_requests(library, net.K, seed)
    links = sample_links(scenario, channel, seed)
    return Problem(scenario, library, requests, links, channel, mos, net.M, net.capacity_items)
