"""Discrete-event Monte Carlo engine used to cross-check the analytic model.

Every replication draws from its own counter-based generators keyed by
``(seed, replication_index, stream_name)``, so results do not depend on
how replications are scheduled across workers.
"""

from __future__ import annotations

import heapq
import math
import zlib
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .access import AccessParams, ra_attempt_energy
from .channel import RadioEnvironment
from .dlt import DltParams, flooding_factor
from .errors import ConfigError
from .link import DOWNLINK, UPLINK, TrafficModel
from .model import SECONDS_PER_DAY, SystemModel
from .trading import BUYER, SELLER, ProtocolSpec, leg_syncs

Z_95 = 1.96
# background traffic is generated this long past the horizon so that trades
# started near the end of the day still see a populated queue
_TAIL_S = 3600.0


def stream(seed: int, replication: int, name: str) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=seed,
                                spawn_key=(replication, zlib.crc32(name.encode())))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class SampleStats:
    mean: float
    variance: float
    count: int

    @property
    def half_width(self) -> float:
        if self.count == 0:
            return math.nan
        return Z_95 * math.sqrt(self.variance / self.count)

    @property
    def ci(self) -> tuple[float, float]:
        return self.mean - self.half_width, self.mean + self.half_width

    def contains(self, value) -> bool:
        lo, hi = self.ci
        return lo <= value <= hi

    @classmethod
    def empty(cls):
        return cls(math.nan, math.nan, 0)

    @classmethod
    def of(cls, samples):
        x = np.asarray(samples, dtype=float)
        n = x.size
        if n == 0:
            return cls.empty()
        var = float(x.var(ddof=1)) if n > 1 else 0.0
        return cls(float(x.mean()), var, n)

    @classmethod
    def bernoulli(cls, successes, trials):
        if trials == 0:
            return cls.empty()
        p = successes / trials
        var = p * (1 - p) * trials / (trials - 1) if trials > 1 else 0.0
        return cls(p, var, int(trials))

    def merge(self, other: "SampleStats") -> "SampleStats":
        """Pooled statistics of two disjoint sample sets."""
        if other.count == 0:
            return self
        if self.count == 0:
            return other
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * other.count / n
        m2 = (self.variance * (self.count - 1) + other.variance * (other.count - 1)
              + delta * delta * self.count * other.count / n)
        return SampleStats(mean, m2 / (n - 1) if n > 1 else 0.0, n)

    @classmethod
    def combine(cls, items):
        out = cls.empty()
        for s in items:
            out = out.merge(s)
        return out


# -- PRACH contention ------------------------------------------------------

@dataclass(frozen=True)
class PrachStats:
    success: SampleStats  # per-attempt success indicator
    attempts_histogram: tuple[int, ...]  # successful requests by attempt number
    n_requests: int
    n_dropped: int
    mean_contenders: float
    probe: SampleStats = field(default_factory=SampleStats.empty)

    @property
    def p_rr(self) -> float:
        """Per-attempt success rate; falls back to the probe when nobody contended."""
        return self.success.mean if self.success.count else self.probe.mean

    @property
    def count(self) -> int:
        return self.success.count


def simulate_prach(p_d, offered_load, params: AccessParams, periods, seed,
                   backoff_window=1, deterministic=False) -> PrachStats:
    """Slotted preamble contention with retries.

    Each period receives ``Poisson(offered_load)`` fresh requests (exactly
    ``offered_load`` when ``deterministic``) plus scheduled retries. A
    contender succeeds when no one else picked its preamble and its link
    draw succeeds; failures back off uniformly over ``backoff_window``
    periods, up to ``max_attempts`` attempts.

    ``probe`` records, once per period, whether an observer arrival would
    have succeeded against the actual contenders. It does not contend, so
    it is defined even at zero load.
    """
    if periods < 1:
        raise ValueError("periods must be >= 1")
    rng = stream(seed, 0, "prach")
    probe_rng = stream(seed, 0, "prach-probe")
    probe_pre = probe_rng.integers(params.n_preambles, size=periods)
    probe_link = probe_rng.random(periods) < p_d
    probe_ok = 0
    k, n_max = params.n_preambles, params.max_attempts
    if deterministic:
        fresh = np.full(periods, int(offered_load), dtype=np.int64)
    else:
        fresh = rng.poisson(offered_load, size=periods)

    future = deque(np.zeros(0, dtype=np.int64) for _ in range(backoff_window))
    hist = np.zeros(n_max, dtype=np.int64)
    attempts = successes = dropped = contenders = 0
    for i, n_new in enumerate(fresh):
        carried = future.popleft()
        future.append(np.zeros(0, dtype=np.int64))
        c = np.concatenate([np.ones(n_new, dtype=np.int64), carried])
        m = c.size
        if m == 0:
            probe_ok += int(probe_link[i])
            continue
        contenders += m
        pre = rng.integers(k, size=m)
        used = np.bincount(pre, minlength=k)
        probe_ok += int(probe_link[i] and used[probe_pre[i]] == 0)
        ok = (used[pre] == 1) & (rng.random(m) < p_d)
        attempts += m
        s = int(ok.sum())
        successes += s
        if s:
            hist += np.bincount(c[ok] - 1, minlength=n_max)
        retry = c[~ok] + 1
        dropped += int((retry > n_max).sum())
        retry = retry[retry <= n_max]
        if retry.size:
            if backoff_window == 1:
                future[0] = np.concatenate([future[0], retry])
            else:
                delay = rng.integers(backoff_window, size=retry.size)
                for d in np.unique(delay):
                    future[d] = np.concatenate([future[d], retry[delay == d]])
    return PrachStats(SampleStats.bernoulli(successes, attempts), tuple(int(h) for h in hist),
                      int(fresh.sum()), dropped, contenders / periods,
                      SampleStats.bernoulli(probe_ok, periods))


def _prach_occupancy(periods, k, p_d, n_max, backoff_window, rng):
    """Sparse event-driven PRACH for background requests arriving at the given
    (sorted) period indices; returns occupied periods and contender counts."""
    n = periods.size
    if n == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    pre = rng.integers(k, size=(n, n_max))
    link = rng.random((n, n_max)) < p_d
    backoff = rng.integers(1, backoff_window + 1, size=(n, n_max))
    pending = {}
    for i, p in enumerate(periods.tolist()):
        pending.setdefault(p, []).append((i, 0))
    occ_p, occ_n = [], []
    heap = list(pending)
    heapq.heapify(heap)
    while heap:
        p = heapq.heappop(heap)
        group = pending.pop(p)
        occ_p.append(p)
        occ_n.append(len(group))
        if len(group) == 1:
            i, a = group[0]
            ok = [bool(link[i, a])]
        else:
            chosen = [pre[i, a] for i, a in group]
            ok = [chosen.count(ch) == 1 and bool(link[i, a])
                  for ch, (i, a) in zip(chosen, group)]
        for (i, a), good in zip(group, ok):
            if good or a + 1 >= n_max:
                continue
            nxt = p + int(backoff[i, a])
            if nxt not in pending:
                pending[nxt] = []
                heapq.heappush(heap, nxt)
            pending[nxt].append((i, a + 1))
    return np.asarray(occ_p, dtype=np.int64), np.asarray(occ_n, dtype=np.int64)


def _lookup_counts(occ_p, occ_n, periods):
    if occ_p.size == 0:
        return np.zeros(periods.shape, dtype=np.int64)
    idx = np.minimum(np.searchsorted(occ_p, periods), occ_p.size - 1)
    return np.where(occ_p[idx] == periods, occ_n[idx], 0)


# -- queues ---------------------------------------------------------------

class _BackgroundQueue:
    """FIFO single server fed by the aggregate Poisson traffic of one direction.

    Service times have mean ``s1`` and variance ``s2`` (the second moment of
    the scheduled transmission time); tagged packets observe the unfinished
    work at their arrival instant.
    """

    def __init__(self, rate, s1, s2, horizon, rng):
        n = rng.poisson(rate * horizon) if rate > 0 else 0
        self.arrivals = np.sort(rng.random(n) * horizon)
        if n:
            shape = s1 * s1 / s2
            service = rng.gamma(shape, s2 / s1, size=n)
            cum = np.cumsum(service)
            self.departures = cum + np.maximum.accumulate(self.arrivals - (cum - service))
        else:
            self.departures = np.zeros(0)

    def wait(self, t):
        if self.arrivals.size == 0:
            return np.zeros_like(t)
        i = np.searchsorted(self.arrivals, t, side="right") - 1
        d = self.departures[np.maximum(i, 0)]
        return np.where(i >= 0, np.maximum(d - t, 0.0), 0.0)


# -- mining race ----------------------------------------------------------

def _race(rng, params: DltParams, shape):
    draws = rng.exponential(1.0 / params.computing_speed, size=(*shape, params.n_miners))
    return draws.min(axis=-1)


def simulate_mining_race(params: DltParams, samples, seed) -> SampleStats:
    """Sample the time until the first of ``n_miners`` exponential races ends."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = stream(seed, 0, "mining")
    return SampleStats.of(_race(rng, params, (samples,)))


def simulate_cell_delivery(env: RadioEnvironment, samples, seed) -> float:
    """Fraction of devices placed uniformly on the cell disk whose shadowed
    received power clears the sensitivity."""
    rng = stream(seed, 0, "cell")
    r = env.cell_radius_m * np.sqrt(rng.random(samples))
    r = np.maximum(r, 1e-9)
    mean_db = env.power_at_1m_db - 10.0 * env.path_loss_exp * np.log10(r)
    rx = mean_db + rng.normal(0.0, env.shadow_sigma_db, size=samples)
    return float(np.mean(rx >= env.sensitivity_db))


# -- full trade replications ----------------------------------------------

@dataclass(frozen=True)
class SimConfig:
    model: SystemModel
    protocol: ProtocolSpec
    seed: int = 0
    n_replications: int = 1000
    n_prach_periods: int = 100000
    horizon_days: float = 1.0
    backoff_window: int = 1
    injected_trades: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.n_replications < 1:
            raise ConfigError("simulation.n_replications", "must be >= 1")
        if self.horizon_days <= 0:
            raise ConfigError("simulation.horizon_days", "must be > 0")

    @classmethod
    def from_model(cls, model: SystemModel, protocol, **overrides):
        sim = dict(model.config.data["simulation"])
        sim.update(overrides)
        spec = protocol if isinstance(protocol, ProtocolSpec) else model.protocol(protocol)
        return cls(model, spec, **sim)


@dataclass
class ReplicationSamples:
    """Per-trade samples of one replication (completed trades only)."""

    latency_s: np.ndarray
    energy_buyer_j: np.ndarray
    energy_seller_j: np.ndarray
    energy_dlt_j: np.ndarray
    mining_latency_s: np.ndarray
    n_trades: int
    n_failed: int
    ra_attempts: int
    ra_successes: int

    def stats(self) -> dict:
        return {
            "latency_s": SampleStats.of(self.latency_s),
            "energy_buyer_j": SampleStats.of(self.energy_buyer_j),
            "energy_seller_j": SampleStats.of(self.energy_seller_j),
            "energy_dlt_j": SampleStats.of(self.energy_dlt_j),
            "mining_latency_s": SampleStats.of(self.mining_latency_s),
            "p_rr": SampleStats.bernoulli(self.ra_successes, self.ra_attempts),
            "failure_prob": SampleStats.bernoulli(self.n_failed, self.n_trades),
        }


class _Replication:
    def __init__(self, cfg: SimConfig, index: int):
        m = cfg.model
        self.cfg = cfg
        self.index = index
        self.link = m.link
        self.access = m.link.access
        self.tm: TrafficModel = m.link.traffic
        self.prof = m.link.energy
        self.dlt = m.dlt
        self.p_d = m.p_d
        self.horizon = cfg.horizon_days * SECONDS_PER_DAY
        self.rng_ra = stream(cfg.seed, index, "ra")
        self.rng_mining = stream(cfg.seed, index, "mining")

        tm = self.tm
        span = self.horizon + _TAIL_S
        f = tm.sched_fraction
        self.queues = {
            UPLINK: _BackgroundQueue(f * tm.ul_arrival_rate, *tm.ul_service_moments,
                                     span, stream(cfg.seed, index, "queue_ul")),
            DOWNLINK: _BackgroundQueue(f * tm.dl_arrival_rate, *tm.dl_service_moments,
                                       span, stream(cfg.seed, index, "queue_dl")),
        }

        rng = stream(cfg.seed, index, "prach_bg")
        bg_rate = tm.ul_arrival_rate + tm.dl_arrival_rate
        n_bg = rng.poisson(bg_rate * span) if bg_rate > 0 else 0
        tau = self.access.nprach_period_s
        bg_periods = np.sort(np.floor(rng.random(n_bg) * span / tau).astype(np.int64))
        self.occ_p, self.occ_n = _prach_occupancy(
            bg_periods, self.access.n_preambles, self.p_d, self.access.max_attempts,
            cfg.backoff_window, rng)
        self.ra_attempts = 0
        self.ra_successes = 0

    def reserve(self, t, alive):
        """Random access for the trades in ``alive`` starting at times ``t``.

        Returns (latency, energy, succeeded) arrays aligned with ``t``.
        """
        acc = self.access
        unit = acc.attempt_latency_s
        e_ra, e_rar = ra_attempt_energy(acc, self.prof)
        weighted = self.link.rr_energy_mode == "weighted"
        n = t.size
        attempts = np.zeros(n, dtype=np.int64)
        done = ~alive.copy()
        success = np.zeros(n, dtype=bool)
        keep = 1.0 - 1.0 / acc.n_preambles
        for a in range(acc.max_attempts):
            pending = ~done
            if not pending.any():
                break
            idx = np.flatnonzero(pending)
            when = t[idx] + a * unit
            period = np.floor(when / acc.nprach_period_s).astype(np.int64)
            others = _lookup_counts(self.occ_p, self.occ_n, period)
            u = self.rng_ra.random((2, idx.size))
            ok = (u[0] < keep ** others) & (u[1] < self.p_d)
            attempts[idx] += 1
            self.ra_attempts += idx.size
            self.ra_successes += int(ok.sum())
            success[idx[ok]] = True
            done[idx[ok]] = True
        latency = attempts * unit
        per = e_ra + e_rar
        energy = np.where(success, (attempts if weighted else 1) * per, attempts * per)
        energy = np.where(alive, energy, 0.0)
        latency = np.where(alive, latency, 0.0)
        return latency, energy, success | ~alive

    def transfer(self, direction, t, payload_bits):
        wait = self.queues[direction].wait(t)
        service = self.tm.service_time(direction, payload_bits)
        active = self.prof.tx_chain_power_w if direction == UPLINK else self.prof.p_listen_w
        return wait + service, wait * self.prof.p_idle_w + service * active

    def leg(self, direction, t, alive, payload_bits, sync=True, reserve=True):
        lat = np.zeros(t.size)
        en = np.zeros(t.size)
        if sync:
            lat += self.prof.sync_latency_s
            en += self.prof.sync_energy_j
        ok = alive.copy()
        if reserve:
            r_lat, r_en, r_ok = self.reserve(t + lat, alive)
            lat += r_lat
            en += r_en
            ok &= r_ok
        x_lat, x_en = self.transfer(direction, t + lat, payload_bits)
        lat += x_lat
        en += x_en
        return np.where(ok, lat, 0.0), np.where(ok, en, 0.0), ok

    def dlt_round(self, t, alive):
        p = self.dlt
        mining = _race(self.rng_mining, p, (t.size,))
        now = t + mining
        idle = p.full_nodes_idle
        prop = np.zeros(t.size)
        ok = alive.copy()
        for direction, bits in ((UPLINK, p.block_hash_bits), (DOWNLINK, p.block_request_bits),
                                (UPLINK, p.block_body_bits)):
            lat, _, ok = self.leg(direction, now + prop, ok, bits, sync=idle, reserve=idle)
            prop += lat
        prop *= flooding_factor(p)
        energy = p.miner_power_w * mining + self.prof.p_tx_w * prop
        if p.fleet_energy:
            energy = energy + (p.n_miners - 1) * p.miner_power_w * mining
        return mining + prop, energy, mining, ok

    def run(self) -> ReplicationSamples:
        cfg = self.cfg
        spec = cfg.protocol
        m = cfg.model
        rate = (m.lambda_b if spec.initiator == BUYER else m.lambda_s) / SECONDS_PER_DAY
        rng = stream(cfg.seed, self.index, "arrivals")
        n = rng.poisson(rate * self.horizon) if rate > 0 else 0
        n += cfg.injected_trades
        t0 = np.sort(rng.random(n) * self.horizon)

        t = t0.copy()
        alive = np.ones(n, dtype=bool)
        energy = {BUYER: np.zeros(n), SELLER: np.zeros(n)}
        e_dlt = np.zeros(n)
        mining_all = []
        for leg, sync in zip(spec.legs, leg_syncs(spec, m.trade.session_mode)):
            lat, en, alive = self.leg(leg.direction, t, alive, m.trade.payload_for(leg),
                                      sync=sync)
            t = t + lat
            energy[leg.party] += en
        for _ in range(spec.dlt_rounds):
            lat, en, mining, alive = self.dlt_round(t, alive)
            t = t + np.where(alive, lat, 0.0)
            e_dlt += en
            mining_all.append(mining)
        t = t + spec.extra_delay_s

        done = alive
        mining = np.concatenate(mining_all) if mining_all else np.zeros(0)
        return ReplicationSamples(
            latency_s=(t - t0)[done],
            energy_buyer_j=energy[BUYER][done],
            energy_seller_j=energy[SELLER][done],
            energy_dlt_j=e_dlt[done],
            mining_latency_s=mining,
            n_trades=n,
            n_failed=int((~done).sum()),
            ra_attempts=self.ra_attempts,
            ra_successes=self.ra_successes,
        )


def run_replication(cfg: SimConfig, replication_index: int) -> ReplicationSamples:
    """One simulated horizon of the full device population."""
    cfg.model.link.traffic.check_stability()
    return _Replication(cfg, replication_index).run()


def _replication_stats(args):
    cfg, index = args
    return run_replication(cfg, index).stats()


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    analytic: float
    sim: SampleStats

    @property
    def rel_error(self) -> float:
        if self.sim.count == 0 or self.analytic == 0:
            return 0.0 if self.sim.mean == self.analytic else math.nan
        return abs(self.sim.mean - self.analytic) / abs(self.analytic)

    @property
    def within_ci(self) -> bool:
        if self.sim.count == 0:
            return False
        if self.sim.half_width == 0:
            return math.isclose(self.sim.mean, self.analytic, rel_tol=1e-9, abs_tol=1e-12)
        return self.sim.contains(self.analytic)


@dataclass(frozen=True)
class CampaignResult:
    protocol: str
    stats: dict
    comparison: tuple[ComparisonRow, ...] = field(default=())

    def row(self, metric) -> ComparisonRow:
        for r in self.comparison:
            if r.metric == metric:
                return r
        raise KeyError(metric)


def analytic_reference(model: SystemModel, spec: ProtocolSpec) -> dict:
    out = model.evaluate(spec)
    return {
        "latency_s": out.latency_s,
        "energy_buyer_j": out.energy_buyer_j,
        "energy_seller_j": out.energy_seller_j,
        "energy_dlt_j": out.energy_dlt_j,
        "mining_latency_s": out.dlt.mining_latency_s,
        "p_rr": model.contention.p_rr,
        "failure_prob": out.failure_prob,
    }


def run_campaign(cfg: SimConfig) -> CampaignResult:
    """Run all replications and compare the pooled statistics with the analytic model."""
    cfg.model.link.traffic.check_stability()
    jobs = [(cfg, i) for i in range(cfg.n_replications)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            per_rep = list(pool.map(_replication_stats, jobs, chunksize=16))
    else:
        per_rep = [_replication_stats(j) for j in jobs]

    # merged in replication order so the result is independent of scheduling
    stats = {key: SampleStats.combine(r[key] for r in per_rep) for key in per_rep[0]}
    ref = analytic_reference(cfg.model, cfg.protocol)
    rows = tuple(ComparisonRow(k, ref[k], stats[k]) for k in stats)
    return CampaignResult(cfg.protocol.name, stats, rows)
