"""Log-distance shadowing propagation, link outage and request arrival rates."""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, special

from .errors import ConfigError, NumericError

SPEED_OF_LIGHT = 3e8


def q_function(x: float) -> float:
    """Gaussian tail probability P(Z > x)."""
    return 0.5 * special.erfc(x / math.sqrt(2.0))


@dataclass(frozen=True)
class RadioEnvironment:
    tx_power_w: float = 0.2
    carrier_hz: float = 900e6
    gain_tx: float = 1.0
    gain_rx: float = 1.0
    path_loss_exp: float = 2.7
    shadow_sigma_db: float = 6.0
    sensitivity_w: float = 3.65e-10
    cell_radius_m: float = 50.0

    def __post_init__(self):
        for name in ("tx_power_w", "carrier_hz", "sensitivity_w", "cell_radius_m",
                     "gain_tx", "gain_rx"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"channel.{name}", "must be > 0")
        if not 1.5 <= self.path_loss_exp <= 6.0:
            raise ConfigError("channel.path_loss_exp", "must lie in [1.5, 6]")
        if self.shadow_sigma_db < 0:
            raise ConfigError("channel.shadow_sigma_db", "must be >= 0")

    @property
    def power_at_1m_db(self) -> float:
        num = self.tx_power_w * self.gain_tx * self.gain_rx * SPEED_OF_LIGHT**2
        return 10.0 * math.log10(num / (4.0 * math.pi * self.carrier_hz) ** 2)

    @property
    def sensitivity_db(self) -> float:
        return 10.0 * math.log10(self.sensitivity_w)

    @property
    def median_range_m(self) -> float:
        """Distance at which the mean received power equals the sensitivity."""
        return 10.0 ** ((self.power_at_1m_db - self.sensitivity_db)
                        / (10.0 * self.path_loss_exp))


@dataclass(frozen=True)
class PopulationModel:
    n_sellers: int = 5000
    n_buyers: int = 5000
    sessions_per_day: float = 1.0
    p_sell: float = 0.05
    p_buy: float = 0.1

    def __post_init__(self):
        for name in ("n_sellers", "n_buyers", "sessions_per_day"):
            if getattr(self, name) < 0:
                raise ConfigError(f"population.{name}", "must be >= 0")
        for name in ("p_sell", "p_buy"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"population.{name}", "must lie in [0, 1]")

    @property
    def buyer_share(self) -> float:
        total = self.n_sellers + self.n_buyers
        return self.n_buyers / total if total else 0.5


def _check_distance(distance_m):
    if not distance_m > 0:
        raise ValueError(f"distance must be > 0, got {distance_m!r}")


def received_power_db(env: RadioEnvironment, distance_m: float) -> float:
    """Mean received power in dBW at ``distance_m`` (no shadowing draw)."""
    _check_distance(distance_m)
    return env.power_at_1m_db - 10.0 * env.path_loss_exp * math.log10(distance_m)


def outage_margin_db(env: RadioEnvironment, distance_m: float) -> float:
    # positive when the mean received power is below the sensitivity
    return env.sensitivity_db - received_power_db(env, distance_m)


def delivery_probability(env: RadioEnvironment, distance_m: float) -> float:
    """Probability that the shadowed received power clears the sensitivity.

    With ``shadow_sigma_db == 0`` this degenerates to a step at the median
    range.
    """
    margin = outage_margin_db(env, distance_m)
    if env.shadow_sigma_db == 0:
        return 1.0 if margin <= 0 else 0.0
    return float(q_function(margin / env.shadow_sigma_db))


def mean_delivery_probability(env: RadioEnvironment) -> float:
    """Average delivery probability over devices placed uniformly on the cell disk."""
    radius = env.cell_radius_m

    def integrand(r):
        if r <= 0:
            return 0.0
        return delivery_probability(env, r) * 2.0 * r / radius**2

    points = None
    if env.median_range_m < radius:
        points = [env.median_range_m]
    value, abserr = integrate.quad(integrand, 0.0, radius, points=points,
                                   epsabs=1e-12, epsrel=1e-10, limit=200)
    if not math.isfinite(value) or abserr > 1e-8:
        raise NumericError(
            f"delivery-probability integration did not converge: value={value!r}, "
            f"abserr={abserr:.3g}, radius={radius}"
        )
    return min(1.0, max(0.0, value))


def arrival_rates(pop: PopulationModel, p_d: float) -> tuple[float, float]:
    """Daily selling and buying request rates ``(lambda_s, lambda_b)``."""
    if not 0.0 <= p_d <= 1.0:
        raise ValueError(f"p_d must lie in [0, 1], got {p_d!r}")
    lam_s = pop.n_sellers * pop.sessions_per_day * pop.p_sell * p_d
    lam_b = pop.n_buyers * pop.sessions_per_day * pop.p_buy * p_d
    return lam_s, lam_b
