import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nbtrade.access import AccessParams, ContentionSolution, resource_reservation_latency
from nbtrade.errors import ConfigError, UnstableQueueError
from nbtrade.link import (DOWNLINK, UPLINK, EnergyProfile, LinkContext, TrafficModel,
                          downlink_rx_latency, downlink_wait, leg_cost, transfer_cost,
                          uplink_tx_latency, uplink_wait)
from nbtrade.montecarlo import _BackgroundQueue, stream


def lindley_mean_wait(rate, mean, var, n=400_000, seed=11):
    """Oracle: FIFO waiting times by the Lindley recursion, Gamma service."""
    rng = np.random.default_rng(seed)
    gaps = rng.exponential(1 / rate, n)
    service = rng.gamma(mean * mean / var, var / mean, n)
    w = 0.0
    total = 0.0
    for i in range(1, n):
        w = max(0.0, w + service[i - 1] - gaps[i])
        total += w
    return total / (n - 1)


def test_uplink_wait_matches_pollaczek_khinchine():
    # moment2 enters as the service-time variance: E[S^2] = s2 + s1^2
    tm = TrafficModel(ul_pkt_moment2=6e6, ul_arrival_rate=3.0)
    s1, s2 = tm.ul_service_moments
    rho = 3.0 * s1
    pk = 3.0 * (s2 + s1 * s1) / (2 * (1 - rho))
    assert uplink_wait(tm) == pytest.approx(pk, rel=1e-12)


def test_uplink_wait_matches_queue_simulation():
    tm = TrafficModel(ul_pkt_moment2=6e6, ul_arrival_rate=3.0)
    s1, s2 = tm.ul_service_moments
    sim = lindley_mean_wait(3.0, s1, s2)
    assert sim == pytest.approx(uplink_wait(tm), rel=0.04)


def test_background_queue_reproduces_uplink_wait():
    tm = TrafficModel(ul_pkt_moment2=6e6, ul_arrival_rate=3.0)
    s1, s2 = tm.ul_service_moments
    q = _BackgroundQueue(3.0, s1, s2, 200_000.0, stream(5, 0, "q"))
    t = stream(5, 0, "probe").random(50_000) * 190_000.0 + 5_000.0
    observed = np.mean([q.wait(x) for x in t])
    assert observed == pytest.approx(uplink_wait(tm), rel=0.04)


def test_downlink_wait_mirrors_uplink():
    tm = TrafficModel(ul_arrival_rate=2.0, dl_arrival_rate=2.0, npdcch_period_s=0.25)
    assert downlink_wait(tm) == pytest.approx(uplink_wait(tm), rel=1e-12)
    # the NPDCCH period cancels out of the mean wait
    other = TrafficModel(ul_arrival_rate=2.0, dl_arrival_rate=2.0, npdcch_period_s=0.05)
    assert downlink_wait(other) == pytest.approx(downlink_wait(tm), rel=1e-12)


def test_uplink_latency_small_example():
    tm = TrafficModel(ul_pkt_moment1=1000.0, ul_pkt_moment2=1e6, ul_arrival_rate=1.0)
    s1 = 1000 / 15000
    s2 = s1 * s1
    wait = 1.0 * s1 * s2 / (2 * s1 * (1 - s1)) + 1.0 * s1**2 / (2 * (1 - s1))
    assert wait == pytest.approx(0.00476, abs=5e-6)
    assert uplink_tx_latency(tm) == pytest.approx(s1 + wait, rel=1e-12)
    assert uplink_tx_latency(tm) == pytest.approx(0.0715, abs=1e-4)


def test_downlink_latency_close_to_deterministic_queue():
    # fixed 1000-bit packets, one per second: the mirror form stays within 5%
    # of a brute-force M/D/1 queue on the total reception latency
    tm = TrafficModel(dl_pkt_moment1=1000.0, dl_pkt_moment2=1e6, dl_arrival_rate=1.0,
                      npdcch_period_s=0.1)
    h1, _ = tm.dl_service_moments
    md1 = lindley_mean_wait(1.0, h1, 1e-12 * h1 * h1, n=200_000) + h1
    assert downlink_rx_latency(tm) >= h1
    assert downlink_rx_latency(tm) == pytest.approx(md1, rel=0.05)


@pytest.mark.parametrize("direction", [UPLINK, DOWNLINK])
def test_latency_grows_towards_saturation(direction):
    s1 = 2000 / 15000
    vals = []
    for rho in (0.05, 0.5, 0.95):
        tm = TrafficModel().with_rates(rho / s1, rho / s1)
        vals.append(uplink_tx_latency(tm) if direction == UPLINK else downlink_rx_latency(tm))
    assert vals[0] < vals[1] < vals[2]


def test_ratio_invariance():
    tm = TrafficModel(ul_arrival_rate=2.0, dl_arrival_rate=1.0)
    k = 3.0
    big = TrafficModel(ul_pkt_moment1=2000 * k, ul_pkt_moment2=4e6 * k * k,
                       dl_pkt_moment1=2000 * k, dl_pkt_moment2=4e6 * k * k,
                       ul_rate_bps=15000 * k, dl_rate_bps=15000 * k,
                       ul_arrival_rate=2.0, dl_arrival_rate=1.0)
    assert uplink_tx_latency(big) == pytest.approx(uplink_tx_latency(tm), rel=1e-12)
    assert downlink_rx_latency(big) == pytest.approx(downlink_rx_latency(tm), rel=1e-12)


def test_faster_downlink_is_faster():
    slow = TrafficModel(dl_rate_bps=10000.0, dl_arrival_rate=1.0)
    fast = TrafficModel(dl_rate_bps=15000.0, dl_arrival_rate=1.0)
    assert downlink_rx_latency(fast) < downlink_rx_latency(slow)


def test_idle_queues_have_no_wait():
    tm = TrafficModel()
    assert uplink_wait(tm) == 0.0 and downlink_wait(tm) == 0.0
    assert uplink_tx_latency(tm) == pytest.approx(2000 / 15000)
    assert downlink_rx_latency(tm, 512) == pytest.approx(512 / 15000)


@settings(max_examples=50)
@given(st.floats(0.0, 6.0), st.floats(0.0, 6.0))
def test_wait_increases_with_load(a, b):
    lo, hi = sorted((a, b))
    assert uplink_wait(TrafficModel(ul_arrival_rate=lo)) <= uplink_wait(
        TrafficModel(ul_arrival_rate=hi))


def test_stability_guard():
    tm = TrafficModel(ul_arrival_rate=7.5)
    with pytest.raises(UnstableQueueError, match="uplink utilization 1"):
        tm.check_stability()
    with pytest.raises(UnstableQueueError):
        uplink_wait(tm)
    with pytest.raises(UnstableQueueError, match="downlink"):
        TrafficModel(dl_arrival_rate=8.0).check_stability()


def test_transfer_cost_split():
    tm, prof = TrafficModel(), EnergyProfile()
    lat, en = transfer_cost(UPLINK, tm, prof, 0.5)
    assert lat == pytest.approx(0.5 + 2000 / 15000)
    assert en == pytest.approx(0.5 * 0.2 + 2000 / 15000 * 0.21)
    lat, en = transfer_cost(DOWNLINK, tm, prof, 0.0, 1000)
    assert en == pytest.approx(1000 / 15000 * 0.1)
    assert prof.sync_energy_j == pytest.approx(0.033)


def test_leg_cost_phases():
    params, tm, prof = AccessParams(), TrafficModel(), EnergyProfile()
    sol = ContentionSolution(0.9, 1.0, (0.0,) * 10)
    full = leg_cost(UPLINK, sol, params, tm, prof)
    assert list(full.breakdown) == ["sync", "rr", "tx"]
    assert full.latency_s == pytest.approx(
        0.33 + resource_reservation_latency(sol, params) + 2000 / 15000)
    bare = leg_cost(UPLINK, sol, params, tm, prof, sync=False, reserve=False)
    assert list(bare.breakdown) == ["tx"]
    assert full.energy_j - bare.energy_j == pytest.approx(
        sum(e for _, e in (full.breakdown["sync"], full.breakdown["rr"])))
    ctx = LinkContext(sol, params, tm, prof)
    assert ctx.leg(DOWNLINK).breakdown.keys() == {"sync", "rr", "rx"}
    with pytest.raises(ValueError):
        leg_cost("sideways", sol, params, tm, prof)


def test_invalid_traffic_reports_field():
    with pytest.raises(ConfigError) as err:
        TrafficModel(ul_pkt_moment2=1.0)
    assert err.value.path == "traffic.ul_pkt_moment2"
    with pytest.raises(ConfigError) as err:
        TrafficModel(ul_rate_bps=0.0)
    assert err.value.path == "traffic.ul_rate_bps"
