import dataclasses
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbtrade import trading
from nbtrade.access import ContentionSolution
from nbtrade.dlt import DltRoundCost
from nbtrade.errors import ConfigError
from nbtrade.link import DOWNLINK, UPLINK, EnergyProfile, LegCost
from nbtrade.model import SystemModel
from nbtrade.trading import (MessageLeg, ProtocolKind, ProtocolSpec, TradeContext,
                             battery_lifetime, device_energy_per_trade, leg_syncs,
                             protocol_from_dict, protocol_sequence, protocol_to_dict,
                             trade_cost)


@pytest.mark.parametrize("kind, n_ul, n_dl, rounds", [
    ("GT", 5, 2, 1), ("BoD", 5, 3, 2), ("SoD", 6, 4, 3),
])
def test_leg_counts(kind, n_ul, n_dl, rounds):
    spec = protocol_sequence(kind)
    assert spec.count(UPLINK) == n_ul
    assert spec.count(DOWNLINK) == n_dl
    assert spec.dlt_rounds == rounds
    assert len(spec.legs) == n_ul + n_dl


def test_initiators():
    assert protocol_sequence("GT").initiator == "buyer"
    assert protocol_sequence("BoD").initiator == "seller"
    assert protocol_sequence("SoD").initiator == "buyer"


class _StubLink:
    """Fixed 0.50 s uplink and 0.51 s downlink legs."""

    sol = ContentionSolution.certain()

    def leg(self, direction, payload_bits=None, *, sync=True, reserve=True):
        return LegCost(0.50 if direction == UPLINK else 0.51, 1.0)


def test_stub_leg_arithmetic(monkeypatch):
    monkeypatch.setattr(trading, "dlt_round_cost",
                        lambda params, link: DltRoundCost(0.5, 0.5, 1.0, 2.0, 2.0))
    ctx = TradeContext(_StubLink(), trading.DltParams())
    out = trade_cost(protocol_sequence("GT"), ctx)
    assert out.latency_s == pytest.approx(4.52, rel=1e-12)
    assert out.energy_buyer_j == 4.0 and out.energy_seller_j == 3.0
    assert out.energy_dlt_j == 2.0
    empty = trade_cost(ProtocolSpec("none", (), 3), ctx)
    assert empty.latency_s == 3.0


def test_gt_latency_hand_sum(default_model):
    # componentwise recomputation from the primitive formulas
    m = default_model
    p = m.contention.p_rr
    tm = m.link.traffic
    l_rr = sum(l * (1 - p) ** (l - 1) * p for l in range(1, 11)) * (0.04 + 0.01 + 0.05 + 0.01)
    s1 = 2000 / 15000
    lam_u, lam_d = tm.ul_arrival_rate, tm.dl_arrival_rate
    w_u = lam_u * (s1 * s1 + s1 * s1) / (2 * (1 - lam_u * s1))
    w_d = lam_d * (s1 * s1 + s1 * s1) / (2 * (1 - lam_d * s1))
    ul = 0.33 + l_rr + w_u + s1
    dl = 0.33 + l_rr + w_d + s1
    prop = (w_u + 512 / 15000) + (w_d + 512 / 15000) + (w_u + 16000 / 15000)
    dlt = 1 / (0.3 * 20) + prop
    expected = 5 * ul + 2 * dl + dlt
    out = m.evaluate("GT")
    assert out.latency_s == pytest.approx(expected, rel=1e-12)
    assert out.latency_s == pytest.approx(5.327913671254281, rel=1e-9)


def test_latency_decomposition(default_model):
    for kind in ProtocolKind:
        spec = default_model.protocol(kind.value)
        out = default_model.evaluate(spec)
        legs = sum(c.latency_s for _, c in out.legs)
        assert out.latency_s == pytest.approx(legs + spec.dlt_rounds * out.dlt.total_latency_s,
                                              rel=1e-12)
        assert out.energy_total_j == out.energy_buyer_j + out.energy_seller_j + out.energy_dlt_j


def test_protocol_ordering(default_model):
    outs = [default_model.evaluate(k.value) for k in ProtocolKind]
    lat = [o.latency_s for o in outs]
    en = [o.energy_total_j for o in outs]
    assert lat == sorted(lat) and len(set(lat)) == 3
    assert en == sorted(en) and len(set(en)) == 3


def test_latency_decreases_with_miners(default_config):
    lat = [SystemModel.from_config(default_config.with_value("dlt.n_miners", m))
           .evaluate("GT").latency_s for m in range(1, 21)]
    assert all(a > b for a, b in zip(lat, lat[1:]))


def test_removing_a_leg_is_cheaper(default_model):
    spec = default_model.protocol("SoD")
    full = default_model.evaluate(spec)
    for i in range(len(spec.legs)):
        shorter = dataclasses.replace(spec, legs=spec.legs[:i] + spec.legs[i + 1:])
        out = default_model.evaluate(shorter)
        assert out.latency_s < full.latency_s
        assert out.energy_total_j < full.energy_total_j


def test_session_mode_skips_repeat_syncs(default_model):
    spec = protocol_sequence("SoD")
    syncs = leg_syncs(spec, True)
    assert syncs[:5] == [True, True, False, False, True]
    assert all(leg_syncs(spec, False))
    ctx = dataclasses.replace(default_model.trade, session_mode=True)
    assert trade_cost(spec, ctx).latency_s < default_model.evaluate(spec).latency_s


def test_failure_probability(default_model):
    out = default_model.evaluate("GT")
    pf = default_model.contention.p_access_failure
    assert out.failure_prob == pytest.approx(1 - (1 - pf) ** 7)


def test_battery_examples():
    prof = EnergyProfile()
    assert battery_lifetime(prof, 1, 0.25, 0.0) == pytest.approx(4000.0)
    assert battery_lifetime(prof, 1, 0.25, 0.0) / 365 == pytest.approx(10.96, abs=0.01)
    assert battery_lifetime(prof, 8, 0.25, 0.0) / 365 == pytest.approx(1.37, abs=0.01)
    assert battery_lifetime(prof, 0, 0.25, 0.1) == math.inf
    assert battery_lifetime(prof, 3, 0.0, 0.0) == math.inf
    with pytest.raises(ValueError):
        battery_lifetime(prof, -1, 0.1, 0.1)


@given(st.floats(0.01, 100.0), st.floats(1e-4, 10.0), st.floats(0.0, 10.0),
       st.sampled_from([2, 4, 8]))
def test_battery_scales_inversely(t, e_up, e_down, k):
    prof = EnergyProfile()
    assert battery_lifetime(prof, k * t, e_up, e_down) == battery_lifetime(prof, t, e_up, e_down) / k


def test_device_energy_mix(default_model):
    out = default_model.evaluate("GT")
    up, down = device_energy_per_trade(out, 1.0)
    assert up + down == pytest.approx(out.energy_buyer_j)
    up, down = device_energy_per_trade(out, 0.0)
    assert up + down == pytest.approx(out.energy_seller_j)


def test_protocol_round_trip():
    for kind in ProtocolKind:
        spec = protocol_sequence(kind)
        assert protocol_from_dict(kind.value, protocol_to_dict(spec)) == spec
    custom = protocol_from_dict("Quick", {"dlt_rounds": 1, "legs": [
        {"name": "buyer.add", "party": "buyer", "direction": "uplink", "payload_bits": 800}]})
    assert custom.legs[0].payload_bits == 800


def test_invalid_legs():
    with pytest.raises(ConfigError):
        MessageLeg("x", "broker", UPLINK)
    with pytest.raises(ConfigError):
        MessageLeg("x", "buyer", UPLINK, payload_bits=0)
    with pytest.raises(ConfigError) as err:
        protocol_from_dict("GT", {"legs": [{"name": "a", "party": "buyer"}]})
    assert err.value.path == "protocols.GT.legs[0].direction"
    with pytest.raises(ConfigError):
        ProtocolSpec("bad", (), -1)
