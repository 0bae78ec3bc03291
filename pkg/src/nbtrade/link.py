"""Uplink/downlink queueing latency, power states and full per-message leg costs."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .access import (AccessParams, ContentionSolution, resource_reservation_energy,
                     resource_reservation_latency)
from .errors import ConfigError, UnstableQueueError

UPLINK = "uplink"
DOWNLINK = "downlink"
DIRECTIONS = (UPLINK, DOWNLINK)


@dataclass(frozen=True)
class TrafficModel:
    ul_pkt_moment1: float = 2000.0
    ul_pkt_moment2: float = 4.0e6
    dl_pkt_moment1: float = 2000.0
    dl_pkt_moment2: float = 4.0e6
    ul_rate_bps: float = 15000.0
    dl_rate_bps: float = 15000.0
    ul_subcarriers: float = 1.0
    dl_subcarriers: float = 1.0
    sched_fraction: float = 1.0
    ul_arrival_rate: float = 0.0
    dl_arrival_rate: float = 0.0
    npdcch_period_s: float = 0.1

    def __post_init__(self):
        for d in ("ul", "dl"):
            m1 = getattr(self, f"{d}_pkt_moment1")
            m2 = getattr(self, f"{d}_pkt_moment2")
            if not m1 > 0:
                raise ConfigError(f"traffic.{d}_pkt_moment1", "must be > 0")
            # relative slack so that m2 = m1**2 computed in floating point passes
            if not m2 >= m1 * m1 * (1 - 1e-12):
                raise ConfigError(f"traffic.{d}_pkt_moment2",
                                  "must be >= moment1**2")
        for name in ("ul_rate_bps", "dl_rate_bps", "ul_subcarriers", "dl_subcarriers",
                     "npdcch_period_s"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"traffic.{name}", "must be > 0")
        if not 0 < self.sched_fraction <= 1:
            raise ConfigError("traffic.sched_fraction", "must lie in (0, 1]")
        for name in ("ul_arrival_rate", "dl_arrival_rate"):
            if getattr(self, name) < 0:
                raise ConfigError(f"traffic.{name}", "must be >= 0")

    def with_rates(self, ul_arrival_rate, dl_arrival_rate):
        return replace(self, ul_arrival_rate=ul_arrival_rate,
                       dl_arrival_rate=dl_arrival_rate)

    # service-time moments of the aggregate traffic

    @property
    def ul_service_moments(self) -> tuple[float, float]:
        rw = self.ul_rate_bps * self.ul_subcarriers
        f = self.sched_fraction
        return f * self.ul_pkt_moment1 / rw, f * self.ul_pkt_moment2 / rw**2

    @property
    def dl_service_moments(self) -> tuple[float, float]:
        ry = self.dl_rate_bps * self.dl_subcarriers
        f = self.sched_fraction
        return f * self.dl_pkt_moment1 / ry, f * self.dl_pkt_moment2 / ry**2

    @property
    def ul_utilization(self) -> float:
        return self.sched_fraction * self.ul_arrival_rate * self.ul_service_moments[0]

    @property
    def dl_utilization(self) -> float:
        return self.sched_fraction * self.dl_arrival_rate * self.dl_service_moments[0]

    def service_time(self, direction, payload_bits=None) -> float:
        """Air time of one packet of ``payload_bits`` (mean packet if None)."""
        if direction == UPLINK:
            bits = self.ul_pkt_moment1 if payload_bits is None else payload_bits
            return bits / (self.ul_rate_bps * self.ul_subcarriers)
        bits = self.dl_pkt_moment1 if payload_bits is None else payload_bits
        return bits / (self.dl_rate_bps * self.dl_subcarriers)

    def check_stability(self):
        if self.ul_utilization >= 1:
            raise UnstableQueueError(UPLINK, self.ul_utilization)
        if self.dl_utilization >= 1:
            raise UnstableQueueError(DOWNLINK, self.dl_utilization)


@dataclass(frozen=True)
class EnergyProfile:
    p_listen_w: float = 0.1
    p_idle_w: float = 0.2
    p_tx_w: float = 0.2
    p_circuit_w: float = 0.01
    amp_efficiency: float = 1.0
    battery_j: float = 1000.0
    sync_latency_s: float = 0.33

    def __post_init__(self):
        for name in ("p_listen_w", "p_idle_w", "p_tx_w", "p_circuit_w",
                     "sync_latency_s"):
            if getattr(self, name) < 0:
                raise ConfigError(f"energy.{name}", "must be >= 0")
        if not 0 < self.amp_efficiency <= 1.5:
            raise ConfigError("energy.amp_efficiency", "must lie in (0, 1.5]")
        if not self.battery_j > 0:
            raise ConfigError("energy.battery_j", "must be > 0")

    @property
    def tx_chain_power_w(self) -> float:
        return self.p_circuit_w + self.amp_efficiency * self.p_tx_w

    @property
    def sync_energy_j(self) -> float:
        return self.p_listen_w * self.sync_latency_s


@dataclass(frozen=True)
class LegCost:
    latency_s: float
    energy_j: float
    breakdown: dict = field(default_factory=dict)

    @classmethod
    def from_phases(cls, phases):
        """Build from an ordered ``{phase: (latency_s, energy_j)}`` mapping."""
        lat = 0.0
        en = 0.0
        for p_lat, p_en in phases.values():
            lat += p_lat
            en += p_en
        return cls(lat, en, dict(phases))


def uplink_wait(tm: TrafficModel) -> float:
    """Mean queueing delay ahead of an uplink packet."""
    s1, s2 = tm.ul_service_moments
    f, lam = tm.sched_fraction, tm.ul_arrival_rate
    rho = f * lam * s1
    if rho >= 1:
        raise UnstableQueueError(UPLINK, rho)
    return f * lam * s1 * s2 / (2 * s1 * (1 - rho)) + f * lam * s1**2 / (2 * (1 - rho))


def downlink_wait(tm: TrafficModel) -> float:
    """Mean queueing delay ahead of a downlink packet.

    Built as the mirror image of :func:`uplink_wait` with the batch
    factor ``F = f * lambda_d * t`` spread over the NPDCCH period ``t``.
    """
    h1, h2 = tm.dl_service_moments
    t = tm.npdcch_period_s
    big_f = tm.sched_fraction * tm.dl_arrival_rate * t
    rho = big_f * h1 / t
    if rho >= 1:
        raise UnstableQueueError(DOWNLINK, rho)
    return 0.5 * big_f / t * h2 / (1 - rho) + 0.5 * big_f / t * h1**2 / (1 - rho)


def uplink_tx_latency(tm: TrafficModel, payload_bits=None) -> float:
    return uplink_wait(tm) + tm.service_time(UPLINK, payload_bits)


def downlink_rx_latency(tm: TrafficModel, payload_bits=None) -> float:
    return downlink_wait(tm) + tm.service_time(DOWNLINK, payload_bits)


def transfer_cost(direction, tm: TrafficModel, prof: EnergyProfile, wait_s,
                  payload_bits=None) -> tuple[float, float]:
    """Latency and energy of the data phase given the queueing delay ``wait_s``.

    Waiting is charged at idle power; air time at the transmit chain power
    (uplink) or listening power (downlink).
    """
    service = tm.service_time(direction, payload_bits)
    active = prof.tx_chain_power_w if direction == UPLINK else prof.p_listen_w
    return wait_s + service, wait_s * prof.p_idle_w + service * active


def leg_cost(direction: str, sol: ContentionSolution, params: AccessParams,
             tm: TrafficModel, prof: EnergyProfile, payload_bits=None, *,
             sync=True, reserve=True, rr_energy_mode="verbatim") -> LegCost:
    """Cost of one application message: sync, resource reservation, data phase.

    ``sync`` and ``reserve`` drop the respective phases for devices that are
    already RRC-connected.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    phases = {}
    if sync:
        phases["sync"] = (prof.sync_latency_s, prof.sync_energy_j)
    if reserve:
        phases["rr"] = (resource_reservation_latency(sol, params),
                        resource_reservation_energy(sol, params, prof, rr_energy_mode))
    if direction == UPLINK:
        phases["tx"] = transfer_cost(UPLINK, tm, prof, uplink_wait(tm), payload_bits)
    else:
        phases["rx"] = transfer_cost(DOWNLINK, tm, prof, downlink_wait(tm), payload_bits)
    return LegCost.from_phases(phases)


@dataclass(frozen=True)
class LinkContext:
    """Everything needed to cost a leg; shared by the trade and DLT models."""

    sol: ContentionSolution
    access: AccessParams
    traffic: TrafficModel
    energy: EnergyProfile
    rr_energy_mode: str = "verbatim"

    def leg(self, direction, payload_bits=None, *, sync=True, reserve=True) -> LegCost:
        return leg_cost(direction, self.sol, self.access, self.traffic, self.energy,
                        payload_bits, sync=sync, reserve=reserve,
                        rr_energy_mode=self.rr_energy_mode)
