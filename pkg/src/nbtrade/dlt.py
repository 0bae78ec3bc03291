"""Proof-of-work verification round: mining race, block propagation, energy."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

from .errors import ConfigError
from .link import DOWNLINK, UPLINK, LinkContext

MINER_SOFT_CAP = 20


@dataclass(frozen=True)
class DltParams:
    n_miners: int = 20
    scale_factor: float = 0.05
    miner_power_w: float = 6.0
    block_hash_bits: float = 512.0
    block_request_bits: float = 512.0
    block_body_bits: float = 16000.0
    # full nodes pay sync + random access per propagation message when True
    full_nodes_idle: bool = False
    flooding: bool = False
    fleet_energy: bool = False

    def __post_init__(self):
        if self.n_miners < 1:
            raise ConfigError("dlt.n_miners", "must be >= 1")
        if not self.computing_speed > 0:
            raise ConfigError("dlt.scale_factor", "computing speed must be > 0")
        for name in ("block_hash_bits", "block_request_bits", "block_body_bits"):
            if getattr(self, name) < 0:
                raise ConfigError(f"dlt.{name}", "must be >= 0")
        if self.n_miners > MINER_SOFT_CAP:
            warnings.warn(f"dlt.n_miners={self.n_miners} exceeds the modelled "
                          f"maximum of {MINER_SOFT_CAP}", stacklevel=3)

    @property
    def computing_speed(self) -> float:
        return self.scale_factor * self.miner_power_w


@dataclass(frozen=True)
class DltRoundCost:
    mining_latency_s: float
    propagation_latency_s: float
    total_latency_s: float
    energy_j: float
    fleet_energy_j: float


def mining_latency(params: DltParams) -> float:
    """Mean time until the first of ``n_miners`` exponential PoW races finishes."""
    return 1.0 / (params.computing_speed * params.n_miners)


def propagation_legs(params: DltParams, ctx: LinkContext):
    """Leg costs of the new-block hash, block request and block body messages."""
    idle = params.full_nodes_idle
    return {
        "newB": ctx.leg(UPLINK, params.block_hash_bits, sync=idle, reserve=idle),
        "getB": ctx.leg(DOWNLINK, params.block_request_bits, sync=idle, reserve=idle),
        "transB": ctx.leg(UPLINK, params.block_body_bits, sync=idle, reserve=idle),
    }


def flooding_factor(params: DltParams) -> int:
    return max(params.n_miners - 1, 1) if params.flooding else 1


def block_propagation_latency(params: DltParams, ctx: LinkContext) -> float:
    legs = propagation_legs(params, ctx)
    total = legs["newB"].latency_s + legs["getB"].latency_s + legs["transB"].latency_s
    return flooding_factor(params) * total


def dlt_round_cost(params: DltParams, ctx: LinkContext) -> DltRoundCost:
    l_w = mining_latency(params)
    l_tm = block_propagation_latency(params, ctx)
    energy = params.miner_power_w * l_w + ctx.energy.p_tx_w * l_tm
    fleet = params.n_miners * params.miner_power_w * l_w + ctx.energy.p_tx_w * l_tm
    return DltRoundCost(l_w, l_tm, l_w + l_tm, energy, fleet)
