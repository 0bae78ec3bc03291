"""NB-IoT random-access contention (drift approximation) and reservation costs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy import optimize

from .errors import ConfigError, NumericError

RR_ENERGY_MODES = ("verbatim", "weighted")


@dataclass(frozen=True)
class AccessParams:
    n_preambles: int = 48
    max_attempts: int = 10
    nprach_period_s: float = 0.01
    npdcch_interval_s: float = 0.1
    ra_msg_offset_s: float = 0.08
    rar_unit_s: float = 0.01
    backlog_q: float = 0.0
    sched_fraction: float = 1.0

    def __post_init__(self):
        if not 1 <= self.n_preambles <= 48:
            raise ConfigError("access.n_preambles", "must lie in [1, 48]")
        if self.max_attempts < 1:
            raise ConfigError("access.max_attempts", "must be >= 1")
        for name in ("nprach_period_s", "npdcch_interval_s", "ra_msg_offset_s",
                     "rar_unit_s"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"access.{name}", "must be > 0")
        if self.backlog_q < 0:
            raise ConfigError("access.backlog_q", "must be >= 0")
        if not 0 < self.sched_fraction <= 1:
            raise ConfigError("access.sched_fraction", "must lie in (0, 1]")

    @property
    def ra_latency_s(self) -> float:
        return 0.5 * self.ra_msg_offset_s + self.nprach_period_s

    @property
    def rar_latency_s(self) -> float:
        return (0.5 * self.npdcch_interval_s
                + 0.5 * self.backlog_q * self.sched_fraction * self.rar_unit_s
                + self.rar_unit_s)

    @property
    def attempt_latency_s(self) -> float:
        """Latency of one RA request/response exchange."""
        return self.ra_latency_s + self.rar_latency_s


@dataclass(frozen=True)
class ContentionSolution:
    p_rr: float
    lambda_tot: float
    lambda_by_attempt: tuple[float, ...] = field(default=())
    p_access_failure: float = 0.0

    @property
    def max_attempts(self) -> int:
        return len(self.lambda_by_attempt)

    @classmethod
    def certain(cls, max_attempts=1):
        """Contention-free reservation: every first attempt succeeds."""
        return cls(1.0, 0.0, (0.0,) * max_attempts, 0.0)


def collision_probability(lambda_tot: float, k: int) -> float:
    """Preamble collision probability, exponential form."""
    if lambda_tot < 0 or k < 1:
        raise ValueError("need lambda_tot >= 0 and k >= 1")
    return -math.expm1(-lambda_tot / k)


def collision_probability_exact(lambda_tot: float, k: int) -> float:
    """Finite-population form ``1 - (1 - 1/k)**(lambda_tot - 1)``."""
    if lambda_tot < 0 or k < 1:
        raise ValueError("need lambda_tot >= 0 and k >= 1")
    if k == 1:
        return 1.0 if lambda_tot > 1 else 0.0
    return 1.0 - (1.0 - 1.0 / k) ** max(lambda_tot - 1.0, 0.0)


def _retry_factor(p, n):
    # sum_{l=1..n} (1-p)^(l-1) = (1 - (1-p)^n) / p, with the p -> 0 limit n
    if p <= 0:
        return float(n)
    return -math.expm1(n * math.log1p(-p)) / p if p < 1 else 1.0


def solve_contention(p_d: float, offered_load: float, params: AccessParams,
                     tol: float = 1e-9) -> ContentionSolution:
    """Steady-state reservation success probability under retries.

    ``offered_load`` is the mean number of fresh access requests per NPRACH
    period. The total contending load ``x`` satisfies
    ``x = offered_load * (1 - (1-P)^N) / P`` with ``P = p_d * exp(-x/K)``;
    the root is bracketed by ``[offered_load, N * offered_load]``.
    """
    if offered_load < 0:
        raise ValueError("offered_load must be >= 0")
    if not 0.0 <= p_d <= 1.0:
        raise ValueError("p_d must lie in [0, 1]")
    k, n = params.n_preambles, params.max_attempts

    if p_d == 0.0:
        lam = (offered_load,) * n
        return ContentionSolution(0.0, offered_load * n, lam, 1.0)
    if offered_load == 0.0:
        return ContentionSolution(p_d, 0.0, (0.0,) * n, (1.0 - p_d) ** n)

    def success(x):
        return p_d * math.exp(-x / k)

    def residual(x):
        return offered_load * _retry_factor(success(x), n) - x

    lo, hi = offered_load, n * offered_load
    if n == 1 or residual(hi) >= 0:
        x = hi if n > 1 else lo
    else:
        try:
            # floor keeps xtol positive for subnormal loads
            xtol = max(1e-15 * hi, 1e-300)
            x = optimize.brentq(residual, lo, hi, xtol=xtol, rtol=1e-15, maxiter=200)
        except (RuntimeError, ValueError) as exc:
            raise NumericError(
                f"contention solver failed for offered_load={offered_load}, "
                f"p_d={p_d}: {exc}") from exc
    if abs(residual(x)) / max(x, 1.0) > tol:
        raise NumericError(
            f"contention fixed point residual {abs(residual(x)):.3g} exceeds {tol}")

    p = success(x)
    lam = tuple(offered_load * (1.0 - p) ** (l - 1) for l in range(1, n + 1))
    return ContentionSolution(p, x, lam, (1.0 - p) ** n)


def _attempt_weights(p, n, weighted):
    return sum((1.0 - p) ** (l - 1) * p * (l if weighted else 1)
               for l in range(1, n + 1))


def resource_reservation_latency(sol: ContentionSolution, params: AccessParams) -> float:
    """Expected reservation latency over successful outcomes (unnormalized)."""
    w = _attempt_weights(sol.p_rr, params.max_attempts, weighted=True)
    return w * params.attempt_latency_s


def ra_attempt_energy(params: AccessParams, prof) -> tuple[float, float]:
    """Energy of one RA transmission and one RAR reception, in joules."""
    e_ra = ((params.ra_latency_s - params.nprach_period_s) * prof.p_idle_w
            + params.nprach_period_s * prof.tx_chain_power_w)
    e_rar = prof.p_listen_w * params.rar_latency_s
    return e_ra, e_rar


def resource_reservation_energy(sol: ContentionSolution, params: AccessParams, prof,
                                mode: str = "verbatim") -> float:
    """Expected reservation energy.

    ``verbatim`` charges a single RA exchange per successful reservation;
    ``weighted`` charges every attempt, mirroring the latency expectation.
    """
    if mode not in RR_ENERGY_MODES:
        raise ValueError(f"unknown energy mode {mode!r}")
    e_ra, e_rar = ra_attempt_energy(params, prof)
    w = _attempt_weights(sol.p_rr, params.max_attempts, weighted=mode == "weighted")
    return w * (e_ra + e_rar)
