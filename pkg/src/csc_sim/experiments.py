"""Scenario configs, seeded bet sampling, parameter sweeps and figure CSVs.

Config files are flat ``key = value`` text (``#`` starts a comment)::

    n = 30
    award = 100
    e_max = 2.0
    gamma = 0.35            # or cost_factor_c, never both
    fee_delta = 0.1
    scheme = square
    theta = 1.0             # total bets / award after rescaling
    spread_ratio = 10       # bet_max / bet_min of the uniform draw
    replicates = 50
    seed = 20240601
    sweep_parameter = theta
    sweep_from = 0.2
    sweep_to = 2.0
    sweep_steps = 19

Optional keys: ``bets`` (comma list, overrides sampling), ``distribution``
(only ``uniform``), ``ir_threshold`` (``2delta``, ``-2delta`` or a number),
and for figure panels ``schemes`` plus ``series_parameter`` /
``series_values`` naming an outer loop.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import ConfigError, CSCError
from .mechanism import BUDGET_TOL, ir_threshold, payments
from .model import GameParams, RewardScheme, TypeProfile, cost, normalize_types

SWEEPABLE = ("theta", "gamma", "cost_factor_c", "n", "e_max", "fee_delta", "award")
_INT_KEYS = {"n", "replicates", "seed", "sweep_steps"}
_FLOAT_KEYS = {"award", "e_max", "gamma", "cost_factor_c", "fee_delta", "theta", "spread_ratio",
               "sweep_from", "sweep_to"}


class InvariantViolation(CSCError):
    """A sweep replicate broke a mechanism invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    n: int = 30
    award: float = 100.0
    e_max: float = 2.0
    gamma: Optional[float] = 0.35
    cost_factor_c: Optional[float] = None
    fee_delta: float = 0.1
    scheme: RewardScheme = RewardScheme.SQUARE
    bets: Optional[tuple[float, ...]] = None
    distribution: str = "uniform"
    spread_ratio: float = 10.0
    theta: float = 1.0
    replicates: int = 50
    seed: int = 20240601
    sweep_parameter: str = "theta"
    sweep_from: float = 0.2
    sweep_to: float = 2.0
    sweep_steps: int = 19
    ir_threshold: str = "2delta"
    schemes: Optional[tuple[RewardScheme, ...]] = None
    series_parameter: Optional[str] = None
    series_values: Optional[tuple[float, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "scheme", RewardScheme.coerce(self.scheme))
        if self.schemes is not None:
            object.__setattr__(self, "schemes", tuple(RewardScheme.coerce(s) for s in self.schemes))
        if (self.gamma is None) == (self.cost_factor_c is None):
            raise ConfigError("specify exactly one of gamma / cost_factor_c")
        if self.n < 1:
            raise ConfigError(f"n must be positive, got {self.n}")
        if self.replicates < 1:
            raise ConfigError(f"replicates must be >= 1, got {self.replicates}")
        if self.sweep_steps < 1:
            raise ConfigError("sweep range must contain at least one point")
        if self.sweep_parameter not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {self.sweep_parameter!r}; choose from {SWEEPABLE}")
        if self.series_parameter is not None and self.series_parameter not in SWEEPABLE:
            raise ConfigError(f"cannot vary {self.series_parameter!r}; choose from {SWEEPABLE}")
        if self.distribution != "uniform":
            raise ConfigError(f"unsupported bet distribution {self.distribution!r}")
        if not self.theta > 0:
            raise ConfigError(f"theta must be positive, got {self.theta}")
        ratio = self.spread_ratio
        if not ratio > 0:
            raise ConfigError(f"spread_ratio must be positive, got {ratio}")
        if ratio < 1:
            # a ratio written as bet_min/bet_max (e.g. 1/10) means the same spread
            object.__setattr__(self, "spread_ratio", 1.0 / ratio)

    def game_params(self) -> GameParams:
        try:
            if self.gamma is not None:
                return GameParams.from_gamma(self.gamma, award=self.award, e_max=self.e_max,
                                             fee_delta=self.fee_delta)
            return GameParams(award=self.award, e_max=self.e_max, cost_factor_c=self.cost_factor_c,
                              fee_delta=self.fee_delta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def with_value(self, parameter: str, value: float) -> "ScenarioConfig":
        if parameter == "n":
            return dataclasses.replace(self, n=int(round(value)))
        if parameter == "gamma":
            return dataclasses.replace(self, gamma=float(value), cost_factor_c=None)
        if parameter == "cost_factor_c":
            return dataclasses.replace(self, cost_factor_c=float(value), gamma=None)
        return dataclasses.replace(self, **{parameter: float(value)})

    def axis(self) -> list[float]:
        values = np.linspace(self.sweep_from, self.sweep_to, self.sweep_steps)
        if self.sweep_parameter == "n":
            return [float(int(round(v))) for v in values]
        return [float(v) for v in values]


def _split_list(text: str) -> list[str]:
    return [part.strip() for part in text.split(",") if part.strip()]


def parse_config(text: str, **overrides) -> ScenarioConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), comment_prefixes=("#",))
    try:
        parser.read_string("[scenario]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    raw = dict(parser["scenario"])
    known = {f.name for f in dataclasses.fields(ScenarioConfig)} | {"min_to_max_ratio", "theta_target"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "min_to_max_ratio" in raw:
        raw.setdefault("spread_ratio", raw.pop("min_to_max_ratio"))
    if "theta_target" in raw:
        raw.setdefault("theta", raw.pop("theta_target"))

    kwargs: dict = {}
    try:
        for key, value in raw.items():
            if key in _INT_KEYS:
                kwargs[key] = int(value)
            elif key in _FLOAT_KEYS:
                kwargs[key] = float(value)
            elif key == "bets":
                kwargs[key] = tuple(float(v) for v in _split_list(value))
            elif key == "series_values":
                kwargs[key] = tuple(float(v) for v in _split_list(value))
            elif key == "schemes":
                kwargs[key] = tuple(_split_list(value))
            else:
                kwargs[key] = value.strip()
    except ValueError as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    if "cost_factor_c" in kwargs and "gamma" not in kwargs:
        kwargs["gamma"] = None
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ScenarioConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str | Path, **overrides) -> ScenarioConfig:
    return parse_config(Path(path).read_text(), **overrides)


def default_config_text(name: str) -> str:
    return resources.files("csc_sim").joinpath("configs", f"{name}.cfg").read_text()


def sample_bets(config: ScenarioConfig, replicate_index: int) -> TypeProfile:
    """Draw one bet profile, rescaled so that total bets equal theta * award.

    The stream depends only on ``(seed, replicate_index)``: every point of a
    sweep sees the same underlying draws.
    """
    if config.bets is not None:
        return normalize_types(config.bets, config.award)
    rng = np.random.default_rng([config.seed & 0xFFFFFFFFFFFFFFFF, replicate_index])
    raw = rng.uniform(1.0, config.spread_ratio, size=config.n)
    bets = raw * (config.theta * config.award / raw.sum())
    if np.any(bets >= config.award) or np.any(bets <= 0):
        raise ConfigError(
            f"theta={config.theta} with n={config.n} forces a bet of {bets.max():.6g} "
            f">= award {config.award} (replicate {replicate_index})"
        )
    return TypeProfile(tuple(float(b) for b in bets / config.award))


@dataclass(frozen=True)
class ReplicateMetrics:
    attack_result: float
    raw_total: float
    payment_share: float
    d_rms: float
    ir_fraction: float
    cost_ratio: float
    profit_to_bet: float


def evaluate_profile(
    profile: TypeProfile, scheme: RewardScheme | str, params: GameParams, ir_rule: str | float | None = None
) -> ReplicateMetrics:
    """Equilibrium, payments and the derived metrics of one profile."""
    out = payments(profile, scheme, params)
    pay = np.asarray(out.payments)
    efforts = np.asarray(out.equilibrium.efforts)
    delivered = np.asarray(out.equilibrium.delivered)
    bets = profile.bets(params.award)
    if not out.total_payment <= params.award + BUDGET_TOL:
        raise InvariantViolation(f"budget exceeded: total payment {out.total_payment} > award {params.award}")
    if np.any(pay < -bets - BUDGET_TOL):
        raise InvariantViolation("a payment fell below minus the bet")
    utility = pay - np.asarray(cost(efforts, params)) - params.fee_delta
    spent = np.asarray(cost(delivered, params))
    fair = params.award * delivered * out.attack_result
    return ReplicateMetrics(
        attack_result=out.attack_result,
        raw_total=out.equilibrium.raw_total,
        payment_share=out.total_payment / params.award,
        d_rms=float(np.sqrt(np.mean((pay - fair) ** 2))),
        ir_fraction=float(np.mean(utility >= ir_threshold(params, ir_rule))),
        cost_ratio=float(spent.sum() / params.award),
        profit_to_bet=float(utility.mean() / bets.mean()),
    )


@dataclass(frozen=True)
class SweepRow:
    parameter: str
    value: float
    attack_result: float
    raw_total: float
    payment_share: float
    award_paid: float
    d_rms: float
    ir_fraction: float
    cost_ratio: float
    profit_to_bet: float
    replicates: int
    seed: int


SWEEP_COLUMNS = tuple(f.name for f in dataclasses.fields(SweepRow))


def _sweep_point(config: ScenarioConfig, parameter: str, value: float) -> SweepRow:
    cfg = config.with_value(parameter, value)
    params = cfg.game_params()
    metrics = []
    for r in range(cfg.replicates):
        try:
            metrics.append(evaluate_profile(sample_bets(cfg, r), cfg.scheme, params, cfg.ir_threshold))
        except CSCError as exc:
            raise type(exc)(f"{exc} [seed={cfg.seed} replicate={r} {parameter}={value}]") from exc
    mean = {f: math.fsum(getattr(m, f) for m in metrics) / len(metrics)
            for f in ("attack_result", "raw_total", "payment_share", "d_rms", "ir_fraction",
                      "cost_ratio", "profit_to_bet")}
    award_paid = math.fsum(max(m.payment_share, 0.0) for m in metrics) / len(metrics)
    return SweepRow(parameter=parameter, value=value, award_paid=award_paid,
                    replicates=cfg.replicates, seed=cfg.seed, **mean)


def sweep(config: ScenarioConfig, workers: int = 1) -> list[SweepRow]:
    """One averaged row per axis value, in axis order."""
    values = config.axis()
    param = config.sweep_parameter
    if workers <= 1:
        return [_sweep_point(config, param, v) for v in values]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda v: _sweep_point(config, param, v), values))


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    if isinstance(x, RewardScheme):
        return x.value
    return str(x)


def rows_to_csv(rows: Iterable[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def sweep_to_csv(rows: Iterable[SweepRow]) -> str:
    return rows_to_csv((dataclasses.asdict(r) for r in rows), SWEEP_COLUMNS)


def series_sweep(config: ScenarioConfig, workers: int = 1) -> list[dict]:
    """Sweep every (scheme, series value) combination named in the config.

    Returns flat dicts: ``scheme``, the series parameter (when set) and all
    :class:`SweepRow` fields.
    """
    schemes = config.schemes or (config.scheme,)
    series = config.series_values if config.series_parameter else (None,)
    tasks = []
    for scheme in schemes:
        for s in series:
            cfg = dataclasses.replace(config, scheme=scheme)
            if s is not None:
                cfg = cfg.with_value(config.series_parameter, s)
            for v in cfg.axis():
                tasks.append((scheme, s, cfg, v))

    def run(task):
        scheme, s, cfg, v = task
        row = dataclasses.asdict(_sweep_point(cfg, cfg.sweep_parameter, v))
        row["scheme"] = scheme
        if config.series_parameter:
            row[config.series_parameter] = s
        return row

    if workers <= 1:
        return [run(t) for t in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, tasks))


# panel name -> (source config, columns)
PANELS = {
    "fig3a": ("fig3", ("scheme", "value", "attack_result")),
    "fig3b": ("fig3", ("scheme", "value", "payment_share", "award_paid")),
    "fig3c": ("fig3", ("scheme", "value", "attack_result", "d_rms")),
    "fig4a": ("fig4", ("scheme", "gamma", "value", "attack_result")),
    "fig4b": ("fig4", ("scheme", "gamma", "value", "profit_to_bet", "ir_fraction")),
    "fig5": ("fig5", ("scheme", "n", "value", "attack_result")),
    "fig5_cost": ("fig4", ("scheme", "gamma", "value", "cost_ratio", "attack_result")),
}
FIGURE_CONFIGS = ("fig3", "fig4", "fig5")


def _panel_header(columns: Sequence[str], sweep_parameter: str) -> list[str]:
    return [sweep_parameter if c == "value" else c for c in columns]


def figure_data(config_dir: str | Path | None = None, workers: int = 1, seed: Optional[int] = None) -> dict[str, str]:
    """CSV text of every figure panel, keyed by panel name."""
    results = {}
    for name in FIGURE_CONFIGS:
        if config_dir is None:
            text = default_config_text(name)
        else:
            text = (Path(config_dir) / f"{name}.cfg").read_text()
        cfg = parse_config(text, seed=seed)
        results[name] = (cfg, series_sweep(cfg, workers=workers))
    panels = {}
    for panel, (source, columns) in PANELS.items():
        cfg, rows = results[source]
        header = _panel_header(columns, cfg.sweep_parameter)
        renamed = [{h: row[c] for h, c in zip(header, columns)} for row in rows]
        panels[panel] = rows_to_csv(renamed, header)
    return panels


def figure_suite(
    config_dir: str | Path | None = None,
    out_dir: str | Path = "figures",
    workers: int = 1,
    seed: Optional[int] = None,
) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = {}
    for panel, text in figure_data(config_dir, workers=workers, seed=seed).items():
        path = out / f"{panel}.csv"
        path.write_text(text)
        written[panel] = path
    return written


def required_theta(rows: Sequence[dict], level: float = 0.99) -> float:
    """Smallest swept theta whose mean attack result reaches ``level``."""
    for row in sorted(rows, key=lambda r: r["value"]):
        if row["attack_result"] >= level:
            return row["value"]
    return math.inf


def random_profile(
    rng: np.random.Generator,
    n: int,
    theta_range: tuple[float, float] = (0.2, 2.0),
    spread_ratio: float = 10.0,
    max_tries: int = 10_000,
) -> TypeProfile:
    """Uniform bets with a random theta; draws that need a bet >= award are redrawn."""
    lo, hi = theta_range
    for _ in range(max_tries):
        theta = rng.uniform(lo, hi)
        raw = rng.uniform(1.0, spread_ratio, size=n)
        types = raw * (theta / raw.sum())
        if types.max() < 1.0:
            return TypeProfile(tuple(float(t) for t in types))
    raise ConfigError(f"no feasible profile for n={n} in theta range {theta_range}")


def property_suite(config: ScenarioConfig, count: int = 200) -> list:
    """Budget, payment identity, payment floor, split-proofness and dominance
    on ``count`` seeded random scenarios; one :class:`CheckRow` per check."""
    from .equilibrium import verify_dominance
    from .mechanism import CheckRow, check_budget, check_dsic_split

    rows = []
    for k in range(count):
        rng = np.random.default_rng([config.seed & 0xFFFFFFFFFFFFFFFF, k, 1])
        profile = random_profile(rng, config.n, spread_ratio=config.spread_ratio)
        params = GameParams.from_gamma(rng.uniform(0.3, 0.5), award=config.award, e_max=config.e_max,
                                       fee_delta=config.fee_delta)
        for scheme in RewardScheme:
            sid = f"{k}-{scheme.value}"
            out = payments(profile, scheme, params)
            budget = check_budget(out, params)
            rows.append(CheckRow(sid, "budget", budget.ok, budget.slack))
            expected = (out.bet_total + params.award) * out.attack_result - out.bet_total
            gap = abs(out.total_payment - expected)
            rows.append(CheckRow(sid, "payment_identity", gap <= BUDGET_TOL, gap))
            floor = min(p + b for p, b in zip(out.payments, profile.bets(params.award)))
            rows.append(CheckRow(sid, "payment_floor", floor >= -BUDGET_TOL, floor))
        sid = f"{k}-linear"
        i = int(rng.integers(profile.n))
        parts = int(rng.integers(2, 6))
        split = check_dsic_split(profile, i, [profile.types[i] / parts] * parts, RewardScheme.LINEAR, params)
        err = abs(split.delta_gap - (parts - 1) * params.fee_delta)
        rows.append(CheckRow(sid, "split_proof", err <= 1e-9, err))
        opponents = rng.uniform(0.0, 1.0, size=profile.n - 1)
        dom = verify_dominance(profile, i, opponents, params, grid_step=1e-3)
        rows.append(CheckRow(sid, "dominance", dom.dominant, dom.max_violation))
    return rows
