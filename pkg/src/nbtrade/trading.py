"""Trading protocols as message sequences, per-trade cost and battery lifetime."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .dlt import DltParams, DltRoundCost, dlt_round_cost
from .errors import ConfigError
from .link import DIRECTIONS, DOWNLINK, UPLINK, EnergyProfile, LegCost, LinkContext

BUYER = "buyer"
SELLER = "seller"
PARTIES = (BUYER, SELLER)


class ProtocolKind(str, enum.Enum):
    GT = "GT"
    BoD = "BoD"
    SoD = "SoD"


@dataclass(frozen=True)
class MessageLeg:
    name: str
    party: str
    direction: str
    payload_bits: float | None = None  # None: use the traffic model's mean packet

    def __post_init__(self):
        if self.party not in PARTIES:
            raise ConfigError(f"legs.{self.name}.party", f"must be one of {PARTIES}")
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"legs.{self.name}.direction",
                              f"must be one of {DIRECTIONS}")
        if self.payload_bits is not None and not self.payload_bits > 0:
            raise ConfigError(f"legs.{self.name}.payload_bits", "must be > 0")


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    legs: tuple[MessageLeg, ...]
    dlt_rounds: int = 1
    extra_delay_s: float = 0.0

    def __post_init__(self):
        if self.dlt_rounds < 0:
            raise ConfigError(f"protocols.{self.name}.dlt_rounds", "must be >= 0")
        if self.extra_delay_s < 0:
            raise ConfigError(f"protocols.{self.name}.extra_delay_s", "must be >= 0")

    def count(self, direction) -> int:
        return sum(1 for leg in self.legs if leg.direction == direction)

    @property
    def initiator(self) -> str:
        return self.legs[0].party if self.legs else BUYER


def _ul(name):
    return MessageLeg(name, name.split(".")[0], UPLINK)


def _dl(name):
    return MessageLeg(name, name.split(".")[0], DOWNLINK)


_SEQUENCES = {
    ProtocolKind.GT: (
        [_ul("buyer.add"), _ul("seller.add"), _ul("buyer.commit"),
         _dl("buyer.settle_rx"), _dl("seller.settle_rx"),
         _ul("buyer.confirm"), _ul("seller.confirm")],
        1,
    ),
    ProtocolKind.BoD: (
        [_ul("seller.add"), _dl("buyer.offer_rx"), _ul("buyer.accept"),
         _ul("buyer.commit"), _dl("buyer.settle_rx"), _dl("seller.settle_rx"),
         _ul("buyer.confirm"), _ul("seller.confirm")],
        2,
    ),
    ProtocolKind.SoD: (
        [_ul("buyer.add"), _dl("seller.ask_rx"), _ul("seller.respond"),
         _ul("seller.add"), _dl("buyer.payment_req_rx"), _ul("buyer.commit"),
         _dl("buyer.settle_rx"), _dl("seller.settle_rx"),
         _ul("buyer.confirm"), _ul("seller.confirm")],
        3,
    ),
}


def protocol_sequence(kind) -> ProtocolSpec:
    """Canonical message sequence of one of the three built-in protocols."""
    kind = ProtocolKind(kind)
    legs, rounds = _SEQUENCES[kind]
    return ProtocolSpec(kind.value, tuple(legs), rounds)


def protocol_to_dict(spec: ProtocolSpec) -> dict:
    legs = []
    for leg in spec.legs:
        d = {"name": leg.name, "party": leg.party, "direction": leg.direction}
        if leg.payload_bits is not None:
            d["payload_bits"] = leg.payload_bits
        legs.append(d)
    return {"dlt_rounds": spec.dlt_rounds, "extra_delay_s": spec.extra_delay_s,
            "legs": legs}


def protocol_from_dict(name, data) -> ProtocolSpec:
    path = f"protocols.{name}"
    if not isinstance(data, dict):
        raise ConfigError(path, "must be a mapping")
    unknown = set(data) - {"dlt_rounds", "extra_delay_s", "legs"}
    if unknown:
        raise ConfigError(f"{path}.{sorted(unknown)[0]}", "unknown key")
    if "legs" in data:
        legs = []
        for i, raw in enumerate(data["legs"]):
            try:
                legs.append(MessageLeg(raw["name"], raw["party"], raw["direction"],
                                       raw.get("payload_bits")))
            except KeyError as exc:
                raise ConfigError(f"{path}.legs[{i}].{exc.args[0]}", "missing") from None
            except TypeError:
                raise ConfigError(f"{path}.legs[{i}]", "must be a mapping") from None
        legs = tuple(legs)
    else:
        legs = protocol_sequence(name).legs
    default_rounds = protocol_sequence(name).dlt_rounds if name in ProtocolKind.__members__ else 1
    return ProtocolSpec(name, legs, int(data.get("dlt_rounds", default_rounds)),
                        float(data.get("extra_delay_s", 0.0)))


@dataclass(frozen=True)
class TradeContext:
    link: LinkContext
    dlt: DltParams
    session_mode: bool = False
    payload_bits: dict = field(default_factory=dict)

    def payload_for(self, leg: MessageLeg):
        if leg.payload_bits is not None:
            return leg.payload_bits
        return self.payload_bits.get(leg.name)


@dataclass(frozen=True)
class TradeOutcome:
    latency_s: float
    energy_buyer_j: float
    energy_seller_j: float
    energy_dlt_j: float
    legs: tuple = ()
    dlt: DltRoundCost | None = None
    failure_prob: float = 0.0

    @property
    def energy_total_j(self) -> float:
        return self.energy_buyer_j + self.energy_seller_j + self.energy_dlt_j

    def party_energy(self, party, direction=None) -> float:
        return sum(cost.energy_j for leg, cost in self.legs
                   if leg.party == party and (direction is None or leg.direction == direction))


def leg_syncs(spec: ProtocolSpec, session_mode: bool) -> list[bool]:
    """Whether each leg pays a synchronization phase.

    In session mode a device stays synchronized across its consecutive legs.
    """
    syncs = []
    prev = None
    for leg in spec.legs:
        syncs.append(not (session_mode and leg.party == prev))
        prev = leg.party
    return syncs


def trade_cost(spec: ProtocolSpec, ctx: TradeContext) -> TradeOutcome:
    legs = []
    latency = 0.0
    energy = {BUYER: 0.0, SELLER: 0.0}
    for leg, sync in zip(spec.legs, leg_syncs(spec, ctx.session_mode)):
        cost: LegCost = ctx.link.leg(leg.direction, ctx.payload_for(leg), sync=sync)
        legs.append((leg, cost))
        latency += cost.latency_s
        energy[leg.party] += cost.energy_j

    dlt = dlt_round_cost(ctx.dlt, ctx.link)
    round_energy = dlt.fleet_energy_j if ctx.dlt.fleet_energy else dlt.energy_j
    latency += spec.dlt_rounds * dlt.total_latency_s + spec.extra_delay_s
    n_access = len(spec.legs) + (3 * spec.dlt_rounds if ctx.dlt.full_nodes_idle else 0)
    p_fail = 1.0 - (1.0 - ctx.link.sol.p_access_failure) ** n_access
    return TradeOutcome(latency, energy[BUYER], energy[SELLER],
                        spec.dlt_rounds * round_energy, tuple(legs), dlt, p_fail)


def battery_lifetime(prof: EnergyProfile, trades_per_day, e_up_per_trade,
                     e_down_per_trade, p_u=1.0, p_d_frac=1.0) -> float:
    """Battery lifetime in days; ``math.inf`` when no energy is drawn."""
    if trades_per_day < 0 or e_up_per_trade < 0 or e_down_per_trade < 0:
        raise ValueError("trade rate and energies must be >= 0")
    daily = trades_per_day * p_u * e_up_per_trade + trades_per_day * p_d_frac * e_down_per_trade
    if daily <= 0:
        return math.inf
    return prof.battery_j / daily


def device_energy_per_trade(outcome: TradeOutcome, buyer_share) -> tuple[float, float]:
    """Uplink and downlink energy per trade of a device that is a buyer with
    probability ``buyer_share`` and a seller otherwise."""
    e_up = (buyer_share * outcome.party_energy(BUYER, UPLINK)
            + (1 - buyer_share) * outcome.party_energy(SELLER, UPLINK))
    e_down = (buyer_share * outcome.party_energy(BUYER, DOWNLINK)
              + (1 - buyer_share) * outcome.party_energy(SELLER, DOWNLINK))
    return e_up, e_down
