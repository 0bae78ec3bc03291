"""Analytic engine: assembles the channel, access, link, DLT and trade models
from a :class:`~nbtrade.config.Config`."""

from __future__ import annotations

from dataclasses import dataclass, field

from .access import ContentionSolution, solve_contention
from .channel import arrival_rates, delivery_probability, mean_delivery_probability
from .config import Config
from .dlt import DltParams, DltRoundCost, dlt_round_cost
from .errors import ConfigError
from .link import LinkContext
from .trading import (ProtocolKind, ProtocolSpec, TradeContext, TradeOutcome,
                      battery_lifetime, device_energy_per_trade, protocol_from_dict,
                      protocol_sequence, trade_cost)

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class SystemModel:
    config: Config
    p_d: float
    lambda_s: float  # requests/day
    lambda_b: float
    link: LinkContext
    dlt: DltParams
    trade: TradeContext
    protocols: dict = field(default_factory=dict)

    @classmethod
    def from_config(cls, config: Config) -> "SystemModel":
        env, pop, access, traffic, energy, dlt = config.sections()
        data = config.data
        if data["channel"]["delivery_mode"] == "cell":
            p_d = mean_delivery_probability(env)
        else:
            p_d = delivery_probability(env, data["channel"]["reference_distance_m"])

        lam_s, lam_b = arrival_rates(pop, p_d)
        ul = (lam_s + lam_b) / SECONDS_PER_DAY
        dl = data["traffic"]["dl_per_ul"] * ul
        traffic = traffic.with_rates(ul, dl)
        traffic.check_stability()

        offered = (ul + dl) * access.nprach_period_s
        sol = solve_contention(p_d, offered, access, tol=data["access"]["solver_tol"])
        link = LinkContext(sol, access, traffic, energy, data["access"]["rr_energy_mode"])
        trade = TradeContext(link, dlt, data["trading"]["session_mode"],
                             dict(data["trading"]["payload_bits"]))
        return cls(config, p_d, lam_s, lam_b, link, dlt, trade,
                   _protocols(data))

    @property
    def contention(self) -> ContentionSolution:
        return self.link.sol

    @property
    def offered_load(self) -> float:
        t = self.link.traffic
        return (t.ul_arrival_rate + t.dl_arrival_rate) * self.link.access.nprach_period_s

    @property
    def buyer_share(self) -> float:
        return self.config.get("population.buyer_share")

    def protocol(self, name) -> ProtocolSpec:
        try:
            return self.protocols[name]
        except KeyError:
            raise ConfigError(f"protocols.{name}", "unknown protocol") from None

    def evaluate(self, protocol) -> TradeOutcome:
        spec = protocol if isinstance(protocol, ProtocolSpec) else self.protocol(protocol)
        return trade_cost(spec, self.trade)

    def dlt_round(self) -> DltRoundCost:
        return dlt_round_cost(self.dlt, self.link)

    def battery_days(self, outcome: TradeOutcome, trades_per_day=None) -> float:
        """Lifetime of an average participating device, in days."""
        if trades_per_day is None:
            trades_per_day = self.config.get("population.sessions_per_day")
        e_up, e_down = device_energy_per_trade(outcome, self.buyer_share)
        tr = self.config.data["trading"]
        return battery_lifetime(self.link.energy, trades_per_day, e_up, e_down,
                                tr["btl_p_up"], tr["btl_p_down"])


def _protocols(data):
    specs = {}
    overrides = data.get("protocols") or {}
    for kind in ProtocolKind:
        if kind.value in overrides:
            specs[kind.value] = protocol_from_dict(kind.value, overrides[kind.value])
        else:
            specs[kind.value] = protocol_sequence(kind)
    for name, raw in overrides.items():
        if name not in specs:
            specs[name] = protocol_from_dict(name, raw)
    delay = data["trading"]["sod_gather_delay_s"]
    if delay and "extra_delay_s" not in overrides.get("SoD", {}):
        sod = specs["SoD"]
        specs["SoD"] = ProtocolSpec(sod.name, sod.legs, sod.dlt_rounds, delay)
    return specs
