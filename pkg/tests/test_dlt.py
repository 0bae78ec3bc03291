import dataclasses
import warnings

import pytest

from nbtrade.access import AccessParams, ContentionSolution, resource_reservation_latency
from nbtrade.dlt import (DltParams, block_propagation_latency, dlt_round_cost,
                         flooding_factor, mining_latency, propagation_legs)
from nbtrade.errors import ConfigError
from nbtrade.link import EnergyProfile, LinkContext, TrafficModel
from nbtrade.montecarlo import simulate_mining_race

EMPTY = LinkContext(ContentionSolution.certain(10), AccessParams(), TrafficModel(),
                    EnergyProfile())


def test_mining_latency_closed_form():
    assert DltParams().computing_speed == pytest.approx(0.3)
    assert mining_latency(DltParams(n_miners=1)) == pytest.approx(10 / 3)
    assert mining_latency(DltParams(n_miners=20)) == pytest.approx(1 / 6)
    for m in range(1, 11):
        assert mining_latency(DltParams(n_miners=2 * m)) == pytest.approx(
            mining_latency(DltParams(n_miners=m)) / 2, rel=1e-15)


@pytest.mark.parametrize("m", [1, 5, 20])
def test_mining_race_oracle(m):
    params = DltParams(n_miners=m)
    stats = simulate_mining_race(params, 100_000, seed=m)
    assert stats.mean == pytest.approx(mining_latency(params), rel=0.01)


def test_propagation_connected_nodes_hand_sum():
    rate = 15000.0
    expected = 512 / rate + 512 / rate + 16000 / rate
    assert block_propagation_latency(DltParams(), EMPTY) == pytest.approx(expected, rel=1e-12)


def test_propagation_idle_nodes_pay_sync_and_access():
    params = DltParams(full_nodes_idle=True, block_hash_bits=0.0,
                       block_request_bits=0.0, block_body_bits=0.0)
    floor = 3 * 0.33 + 3 * resource_reservation_latency(EMPTY.sol, EMPTY.access)
    assert block_propagation_latency(params, EMPTY) == pytest.approx(floor, rel=1e-12)
    legs = propagation_legs(params, EMPTY)
    assert set(legs["getB"].breakdown) == {"sync", "rr", "rx"}


def test_body_size_is_linear():
    a = DltParams(full_nodes_idle=True)
    b = dataclasses.replace(a, block_body_bits=2 * a.block_body_bits)
    delta = block_propagation_latency(b, EMPTY) - block_propagation_latency(a, EMPTY)
    assert delta == pytest.approx(a.block_body_bits / 15000.0, rel=1e-12)


def test_round_energy_components():
    cost = dlt_round_cost(DltParams(), EMPTY)
    assert cost.total_latency_s == pytest.approx(cost.mining_latency_s + cost.propagation_latency_s,
                                                 rel=1e-12)
    mining_energy = cost.energy_j - 0.2 * cost.propagation_latency_s
    assert mining_energy == pytest.approx(1.0)
    five = dlt_round_cost(DltParams(n_miners=5), EMPTY)
    assert five.energy_j - 0.2 * five.propagation_latency_s == pytest.approx(4.0)
    assert five.energy_j > cost.energy_j


def test_zero_propagation_energy():
    params = DltParams(n_miners=4, block_hash_bits=0.0, block_request_bits=0.0,
                       block_body_bits=0.0)
    cost = dlt_round_cost(params, EMPTY)
    assert cost.propagation_latency_s == 0.0
    assert cost.energy_j == pytest.approx(6.0 / (0.3 * 4), rel=1e-15)


def test_fleet_energy_is_flat_in_miners():
    costs = [dlt_round_cost(DltParams(n_miners=m), EMPTY) for m in (1, 5, 20)]
    mining_fleet = [c.fleet_energy_j - 0.2 * c.propagation_latency_s for c in costs]
    assert mining_fleet == pytest.approx([20.0] * 3)


def test_flooding_multiplies_propagation():
    base = DltParams(n_miners=6)
    flood = dataclasses.replace(base, flooding=True)
    assert flooding_factor(flood) == 5 and flooding_factor(base) == 1
    assert block_propagation_latency(flood, EMPTY) == pytest.approx(
        5 * block_propagation_latency(base, EMPTY))
    assert flooding_factor(DltParams(n_miners=1, flooding=True)) == 1


def test_miner_cap_is_a_warning():
    with pytest.warns(UserWarning, match="n_miners"):
        DltParams(n_miners=25)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        DltParams(n_miners=20)
    with pytest.raises(ConfigError) as err:
        DltParams(n_miners=0)
    assert err.value.path == "dlt.n_miners"
