"""Scenario files, parameter sweeps and CSV reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .config import Config
from .errors import ConfigError
from .link import LegCost
from .model import SystemModel
from .montecarlo import CampaignResult, SimConfig, run_campaign
from .reference import GWEI_PER_ETHER, REFERENCE_COSTS
from .trading import BUYER, SELLER, ProtocolKind, TradeOutcome

ENGINES = ("analytic", "simulation", "both")
_ENGINE_ALIASES = {"sim": "simulation"}

TRADE_COLUMNS = ("sweep_value", "protocol", "latency_s", "energy_buyer_j",
                 "energy_seller_j", "energy_dlt_j", "battery_days", "p_rr",
                 "failure_prob")
SIM_COLUMNS = ("sim_mean", "sim_ci_halfwidth")
DLT_COLUMNS = ("sweep_value", "n_miners", "mining_latency_s", "propagation_latency_s",
               "total_latency_s", "energy_j", "fleet_energy_j")
ACCESS_COLUMNS = ("sweep_value", "p_d", "lambda_s_per_day", "lambda_b_per_day",
                  "offered_load", "lambda_tot", "p_rr", "p_access_failure",
                  "ul_utilization", "dl_utilization")
COMPARISON_COLUMNS = ("sweep_value", "protocol", "metric", "analytic", "sim_mean",
                      "sim_ci_halfwidth", "sim_count", "rel_error", "within_ci")
REFERENCE_COLUMNS = ("protocol", "operation", "ether", "gwei", "gas", "usd")


def normalize_engine(engine) -> str:
    engine = _ENGINE_ALIASES.get(engine, engine)
    if engine not in ENGINES:
        raise ConfigError("scenario.engine", f"must be one of {ENGINES} or 'sim'")
    return engine


@dataclass(frozen=True)
class Sweep:
    path: str
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ConfigError("scenario.sweep.values", "must be nonempty")
        for v in self.values:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError("scenario.sweep.values", f"non-numeric value {v!r}")

    @classmethod
    def parse(cls, text):
        """Parse ``PATH=v1,v2,...``."""
        path, sep, rest = text.partition("=")
        if not sep or not path:
            raise ConfigError("sweep", f"expected PATH=v1,v2,... got {text!r}")
        values = []
        for item in rest.split(","):
            item = item.strip()
            if not item:
                continue
            values.append(_parse_number(item, f"sweep.{path}"))
        return cls(path.strip(), tuple(values))


def _parse_number(text, path):
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        value = None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"not a number: {text!r}")
    return value


@dataclass(frozen=True)
class Scenario:
    name: str
    engine: str = "analytic"
    sweep: Sweep | None = None
    output_dir: str = "."
    protocols: tuple = tuple(k.value for k in ProtocolKind)
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "engine", normalize_engine(self.engine))
        if not self.protocols:
            raise ConfigError("scenario.protocols", "must be nonempty")

    @property
    def uses_simulation(self) -> bool:
        return self.engine != "analytic"

    @classmethod
    def from_dict(cls, data, default_name="scenario"):
        if not isinstance(data, dict):
            raise ConfigError("scenario", "must be a mapping")
        known = {"name", "engine", "sweep", "output_dir", "protocols", "overrides"}
        for key in data:
            if key not in known:
                raise ConfigError(f"scenario.{key}", "unknown key")
        sweep = None
        if data.get("sweep") is not None:
            raw = data["sweep"]
            if not isinstance(raw, dict) or "path" not in raw or "values" not in raw:
                raise ConfigError("scenario.sweep", "needs 'path' and 'values'")
            sweep = Sweep(str(raw["path"]), tuple(raw["values"] or ()))
        overrides = data.get("overrides") or {}
        if not isinstance(overrides, dict):
            raise ConfigError("scenario.overrides", "must be a mapping of path: value")
        return cls(
            name=str(data.get("name", default_name)),
            engine=data.get("engine", "analytic"),
            sweep=sweep,
            output_dir=str(data.get("output_dir", data.get("name", default_name))),
            protocols=tuple(data.get("protocols") or (k.value for k in ProtocolKind)),
            overrides=dict(overrides),
        )

    def replace(self, **changes) -> "Scenario":
        fields = {k: getattr(self, k) for k in
                  ("name", "engine", "sweep", "output_dir", "protocols", "overrides")}
        fields.update(changes)
        return Scenario(**fields)


def bundled_scenarios() -> list[str]:
    root = resources.files("nbtrade").joinpath("data/scenarios")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def load_scenario(name_or_path) -> Scenario:
    """Load a scenario file, or a bundled scenario by name."""
    path = Path(name_or_path)
    if path.is_file():
        text = path.read_text()
        default_name = path.stem
    else:
        res = resources.files("nbtrade").joinpath(f"data/scenarios/{name_or_path}.yaml")
        if not res.is_file():
            raise ConfigError("scenario", f"no scenario file or bundled scenario "
                                          f"named {name_or_path!r}")
        text = res.read_text()
        default_name = str(name_or_path)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("scenario", f"cannot parse scenario: {exc}") from None
    return Scenario.from_dict(data, default_name)


# -- formatting ------------------------------------------------------------

def fmt(value) -> str:
    """Locale-independent shortest round-trip text for CSV cells."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(row.get(c)) for c in columns])
    return buf.getvalue()


# -- evaluation --------------------------------------------------------------

@dataclass
class ScenarioResult:
    scenario: Scenario
    trades: list = field(default_factory=list)
    dlt: list = field(default_factory=list)
    access: list = field(default_factory=list)
    comparison: list = field(default_factory=list)

    @property
    def trade_columns(self):
        return TRADE_COLUMNS + (SIM_COLUMNS if self.scenario.uses_simulation else ())

    def tables(self) -> dict:
        out = {
            "trades.csv": csv_text(self.trade_columns, self.trades),
            "dlt.csv": csv_text(DLT_COLUMNS, self.dlt),
            "access.csv": csv_text(ACCESS_COLUMNS, self.access),
        }
        if self.scenario.uses_simulation:
            out["comparison.csv"] = csv_text(COMPARISON_COLUMNS, self.comparison)
        return out

    def summary(self) -> str:
        lines = [f"scenario {self.scenario.name} (engine: {self.scenario.engine})"]
        label = self.scenario.sweep.path if self.scenario.sweep else "-"
        lines.append(f"{label:>24} {'protocol':>8} {'latency_s':>10} "
                     f"{'E_buyer_J':>10} {'E_seller_J':>10} {'btl_years':>9}")
        for row in self.trades:
            years = row["battery_days"] / 365.0
            lines.append(f"{fmt(row['sweep_value']):>24} {row['protocol']:>8} "
                         f"{row['latency_s']:10.4f} {row['energy_buyer_j']:10.4f} "
                         f"{row['energy_seller_j']:10.4f} {years:9.3f}")
        outside = [r for r in self.comparison if not r["within_ci"]]
        if self.comparison:
            lines.append(f"{len(outside)} of {len(self.comparison)} analytic values "
                         f"outside the simulated 95% CI")
            for r in outside:
                lines.append(f"  outside CI: {fmt(r['sweep_value'])} {r['protocol']} "
                             f"{r['metric']} analytic={r['analytic']:.6g} "
                             f"sim={r['sim_mean']:.6g}+-{r['sim_ci_halfwidth']:.3g}")
        return "\n".join(lines) + "\n"


def _sim_battery(model: SystemModel, outcome: TradeOutcome, e_buyer, e_seller):
    # keep the analytic uplink/downlink split of each party, rescaled to the sim energy
    def scaled(party, total):
        ref = outcome.party_energy(party)
        return 1.0 if ref == 0 else total / ref

    kb, ks = scaled(BUYER, e_buyer), scaled(SELLER, e_seller)
    legs = tuple((leg, LegCost(cost.latency_s,
                               cost.energy_j * (kb if leg.party == BUYER else ks)))
                 for leg, cost in outcome.legs)
    rescaled = TradeOutcome(outcome.latency_s, e_buyer, e_seller, outcome.energy_dlt_j,
                            legs, outcome.dlt, outcome.failure_prob)
    return model.battery_days(rescaled)


def evaluate_point(scenario: Scenario, config: Config, sweep_value="",
                   replications=None, workers=None):
    """All report rows for one sweep point."""
    model = SystemModel.from_config(config)
    sol = model.contention
    traffic = model.link.traffic
    access = {
        "sweep_value": sweep_value, "p_d": model.p_d,
        "lambda_s_per_day": model.lambda_s, "lambda_b_per_day": model.lambda_b,
        "offered_load": model.offered_load, "lambda_tot": sol.lambda_tot,
        "p_rr": sol.p_rr, "p_access_failure": sol.p_access_failure,
        "ul_utilization": traffic.ul_utilization, "dl_utilization": traffic.dl_utilization,
    }
    rnd = model.dlt_round()
    dlt = {
        "sweep_value": sweep_value, "n_miners": model.dlt.n_miners,
        "mining_latency_s": rnd.mining_latency_s,
        "propagation_latency_s": rnd.propagation_latency_s,
        "total_latency_s": rnd.total_latency_s, "energy_j": rnd.energy_j,
        "fleet_energy_j": rnd.fleet_energy_j,
    }

    trades, comparison = [], []
    for name in scenario.protocols:
        spec = model.protocol(name)
        out = model.evaluate(spec)
        row = {
            "sweep_value": sweep_value, "protocol": spec.name,
            "latency_s": out.latency_s, "energy_buyer_j": out.energy_buyer_j,
            "energy_seller_j": out.energy_seller_j, "energy_dlt_j": out.energy_dlt_j,
            "battery_days": model.battery_days(out), "p_rr": sol.p_rr,
            "failure_prob": out.failure_prob,
        }
        if scenario.uses_simulation:
            overrides = {}
            if replications is not None:
                overrides["n_replications"] = replications
            if workers is not None:
                overrides["workers"] = workers
            camp: CampaignResult = run_campaign(SimConfig.from_model(model, spec, **overrides))
            lat = camp.stats["latency_s"]
            row["sim_mean"] = lat.mean
            row["sim_ci_halfwidth"] = lat.half_width
            if scenario.engine == "simulation":
                for key in ("latency_s", "energy_buyer_j", "energy_seller_j",
                            "energy_dlt_j", "p_rr", "failure_prob"):
                    row[key] = camp.stats[key].mean
                row["battery_days"] = _sim_battery(model, out, row["energy_buyer_j"],
                                                   row["energy_seller_j"])
            for r in camp.comparison:
                comparison.append({
                    "sweep_value": sweep_value, "protocol": spec.name,
                    "metric": r.metric, "analytic": r.analytic, "sim_mean": r.sim.mean,
                    "sim_ci_halfwidth": r.sim.half_width, "sim_count": r.sim.count,
                    "rel_error": r.rel_error, "within_ci": r.within_ci,
                })
        trades.append(row)
    return trades, dlt, access, comparison


def run_scenario(scenario: Scenario, config: Config, replications=None,
                 workers=None) -> ScenarioResult:
    """Evaluate every sweep point; raises before any work if a point is invalid."""
    base = config.with_values(scenario.overrides) if scenario.overrides else config
    if scenario.sweep is None:
        points = [("", base)]
    else:
        base.check_numeric_path(scenario.sweep.path)
        points = [(v, base.with_value(scenario.sweep.path, v))
                  for v in scenario.sweep.values]
    # stability and contention checks for every point before any simulation
    for _, cfg in points:
        SystemModel.from_config(cfg)

    result = ScenarioResult(scenario)
    for value, cfg in points:
        trades, dlt, access, comparison = evaluate_point(scenario, cfg, value,
                                                         replications, workers)
        result.trades.extend(trades)
        result.dlt.append(dlt)
        result.access.append(access)
        result.comparison.extend(comparison)
    return result


def write_result(result: ScenarioResult, output_dir) -> list[Path]:
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in result.tables().items():
        path = out / name
        path.write_text(text, encoding="utf-8", newline="")
        written.append(path)
    path = out / "report.txt"
    path.write_text(result.summary(), encoding="utf-8", newline="")
    written.append(path)
    return written


def compare_engines(config: Config, protocols=("GT",), replications=None,
                    workers=None) -> ScenarioResult:
    """Analytic vs simulated values for the given protocols at one config."""
    scenario = Scenario("compare", engine="both", protocols=tuple(protocols))
    return run_scenario(scenario, config, replications, workers)


def reference_rows() -> list[dict]:
    return [{"protocol": c.protocol, "operation": c.operation, "ether": c.ether,
             "gwei": round(c.ether * GWEI_PER_ETHER), "gas": c.gas, "usd": c.usd}
            for c in REFERENCE_COSTS]


def reference_costs_csv() -> str:
    return csv_text(REFERENCE_COLUMNS, reference_rows())
