"""Monte Carlo sweeps over the number of vehicles.

Every trial draws from its own stream seeded by (master_seed, N, trial_index),
so results do not depend on execution order or worker count.
"""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from . import __version__
from .asymptotics import (
    IncrementSupport,
    expected_e2_orthogonal_leading,
    expected_e2_uniform_leading,
    increment_cdf,
)
from .estimators import (
    DegenerateWeightsError,
    GridSpec,
    closed_form_orthogonal_e2,
    directional_extremes,
    exact_error,
    feasible_region,
    mc_integration_error,
    weighted_error,
)
from .scenario import NoiseModel, RoadKind, RoadModel, sample_scenario

log = logging.getLogger(__name__)

CSV_COLUMNS = (
    "config_id",
    "road_model",
    "sigma",
    "w",
    "estimator",
    "N",
    "trials_run",
    "trials_feasible",
    "mean_e2",
    "std_error",
    "asymptote_e2",
    "infeasible_rate",
)


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class Estimator(enum.Enum):
    EXACT = "exact"
    MC_INTEGRATION = "mc"
    WEIGHTED = "weighted"
    CLOSED_FORM_ORTHOGONAL = "closed_form"


class InfeasiblePolicy(enum.Enum):
    # average over feasible trials, report the rate alongside
    EXCLUDE = "exclude"
    # any infeasible trial makes the row's mean missing
    COUNT_AS_MISSING = "count_as_missing"


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep. ``n_values`` are total vehicle counts; orthogonal runs split them evenly over four directions."""

    road_model: RoadKind
    n_values: tuple[int, ...]
    sigma: float = 0.3
    half_width: float = 2.0
    trials: int = 5000
    mc_samples: int = 10_000
    estimator: Estimator = Estimator.EXACT
    seed: int = 2017
    infeasible_policy: InfeasiblePolicy = InfeasiblePolicy.EXCLUDE
    grid: GridSpec = field(default_factory=GridSpec)
    name: str = ""

    def __post_init__(self):
        if not self.n_values:
            raise ConfigError("n_values", "need at least one N")
        for n in self.n_values:
            if self.road_model is RoadKind.ORTHOGONAL and (n < 4 or n % 4):
                raise ConfigError("n_values", f"orthogonal N must be a positive multiple of 4, got {n}")
            if self.road_model is RoadKind.UNIFORM and n < 3:
                raise ConfigError("n_values", f"uniform N must be >= 3, got {n}")
        if self.trials < 1:
            raise ConfigError("trials", f"must be >= 1, got {self.trials}")
        if self.mc_samples < 1:
            raise ConfigError("mc_samples", f"must be >= 1, got {self.mc_samples}")
        if not (math.isfinite(self.half_width) and self.half_width > 0):
            raise ConfigError("half_width", f"must be > 0, got {self.half_width}")
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ConfigError("sigma", f"must be >= 0, got {self.sigma}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed", "must be an unsigned 64-bit integer")
        if self.estimator is Estimator.CLOSED_FORM_ORTHOGONAL and self.road_model is not RoadKind.ORTHOGONAL:
            raise ConfigError("estimator", "closed_form only applies to orthogonal roads")
        object.__setattr__(self, "n_values", tuple(sorted(int(n) for n in self.n_values)))

    def road(self, n: int) -> RoadModel:
        if self.road_model is RoadKind.ORTHOGONAL:
            return RoadModel.orthogonal(n // 4)
        return RoadModel.uniform(n)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["road_model"] = self.road_model.value
        d["estimator"] = self.estimator.value
        d["infeasible_policy"] = self.infeasible_policy.value
        d["n_values"] = list(self.n_values)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        d = dict(d)
        try:
            d["road_model"] = RoadKind(d["road_model"])
        except KeyError:
            raise ConfigError("road_model", "missing") from None
        except ValueError:
            raise ConfigError("road_model", f"unknown road model {d['road_model']!r}") from None
        for key, enum_cls in (("estimator", Estimator), ("infeasible_policy", InfeasiblePolicy)):
            if key in d:
                try:
                    d[key] = enum_cls(d[key])
                except ValueError:
                    choices = ", ".join(e.value for e in enum_cls)
                    raise ConfigError(key, f"{d[key]!r} is not one of {choices}") from None
        if "grid" in d and not isinstance(d["grid"], GridSpec):
            d["grid"] = GridSpec(**d["grid"])
        if "n_values" not in d:
            raise ConfigError("n_values", "missing")
        if not isinstance(d["n_values"], (list, tuple)) or not all(_is_int(v) for v in d["n_values"]):
            raise ConfigError("n_values", "must be a list of integers")
        d["n_values"] = tuple(d["n_values"])
        for key in ("trials", "mc_samples", "seed"):
            if key in d and not _is_int(d[key]):
                raise ConfigError(key, f"must be an integer, got {d[key]!r}")
        for key in ("sigma", "half_width"):
            if key in d and (isinstance(d[key], bool) or not isinstance(d[key], (int, float))):
                raise ConfigError(key, f"must be a number, got {d[key]!r}")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        return cls(**d)

    @property
    def config_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


@dataclass(frozen=True)
class ExperimentRow:
    N: int
    trials_run: int
    trials_feasible: int
    mean_e2: float | None
    std_error: float | None
    asymptote_e2: float | None
    infeasible_rate: float


def trial_rng(seed: int, n: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, n, index]))


def run_trial(config: ExperimentConfig, n: int, trial_index: int) -> float:
    """Square error of one trial; NaN marks an infeasible or degenerate trial."""
    rng = trial_rng(config.seed, n, trial_index)
    sc = sample_scenario(config.road(n), NoiseModel(config.sigma), config.half_width, rng)
    est = config.estimator
    if est is Estimator.EXACT:
        return exact_error(sc).square_error
    if est is Estimator.CLOSED_FORM_ORTHOGONAL:
        return closed_form_orthogonal_e2(directional_extremes(sc))
    if est is Estimator.MC_INTEGRATION:
        return mc_integration_error(sc, config.mc_samples, rng, region=feasible_region(sc)).square_error
    try:
        return weighted_error(sc, config.grid, rng).square_error
    except DegenerateWeightsError:
        return math.nan


def _trial_block(args) -> list[float]:
    config, n, start, stop = args
    return [run_trial(config, n, i) for i in range(start, stop)]


def run_trials(config: ExperimentConfig, n: int, threads: int = 1) -> np.ndarray:
    """All trial values for one N, in trial-index order."""
    if threads <= 1:
        return np.array(_trial_block((config, n, 0, config.trials)))
    size = math.ceil(config.trials / (4 * threads))
    blocks = [(config, n, s, min(s + size, config.trials)) for s in range(0, config.trials, size)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(_trial_block, blocks))
    return np.array([v for part in parts for v in part])


def asymptote(config: ExperimentConfig, n: int) -> float | None:
    if config.estimator is Estimator.WEIGHTED:
        return None
    if config.road_model is RoadKind.ORTHOGONAL:
        nj = n // 4
        if nj < 2:
            return None
        return expected_e2_orthogonal_leading([nj] * 4, config.sigma)
    return expected_e2_uniform_leading(n, config.half_width, config.sigma)


def aggregate(
    values: Sequence[float],
    n: int,
    policy: InfeasiblePolicy = InfeasiblePolicy.EXCLUDE,
    asymptote_e2: float | None = None,
) -> ExperimentRow:
    v = np.asarray(values, dtype=float)
    ok = np.isfinite(v)
    run, feas = len(v), int(ok.sum())
    rate = 1.0 - feas / run if run else 1.0
    if feas == 0 or (policy is InfeasiblePolicy.COUNT_AS_MISSING and feas < run):
        return ExperimentRow(n, run, feas, None, None, asymptote_e2, rate)
    good = v[ok]
    mean = float(good.mean())
    se = float(good.std(ddof=1) / math.sqrt(feas)) if feas > 1 else 0.0
    return ExperimentRow(n, run, feas, mean, se, asymptote_e2, rate)


def run_experiment(
    config: ExperimentConfig, threads: int = 1, progress: Callable[[int], None] | None = None
) -> list[ExperimentRow]:
    rows = []
    for n in config.n_values:
        values = run_trials(config, n, threads)
        rows.append(aggregate(values, n, config.infeasible_policy, asymptote(config, n)))
        log.info("N=%d mean_e2=%s infeasible=%.4f", n, rows[-1].mean_e2, rows[-1].infeasible_rate)
        if progress is not None:
            progress(n)
    return rows


def compare_slopes(rows_a: Sequence[ExperimentRow], rows_b: Sequence[ExperimentRow]) -> tuple[float, float]:
    """Least-squares slopes of log(mean_e2) against log(N)."""
    return loglog_slope(rows_a), loglog_slope(rows_b)


def loglog_slope(rows: Sequence[ExperimentRow]) -> float:
    pts = [(r.N, r.mean_e2) for r in rows if r.mean_e2 is not None and r.mean_e2 > 0]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 valid rows for a slope, got {len(pts)}")
    x, y = np.log(np.array(pts, dtype=float)).T
    return float(np.polyfit(x, y, 1)[0])


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def write_csv(rows: Sequence[ExperimentRow], config: ExperimentConfig, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    config.config_id,
                    config.road_model.value,
                    _fmt(float(config.sigma)),
                    _fmt(float(config.half_width)),
                    config.estimator.value,
                    r.N,
                    r.trials_run,
                    r.trials_feasible,
                    _fmt(r.mean_e2),
                    _fmt(r.std_error),
                    _fmt(r.asymptote_e2),
                    _fmt(r.infeasible_rate),
                ]
            )


class SchemaError(ValueError):
    pass


def read_csv(path: Path) -> list[dict]:
    """Rows of an experiment CSV with numeric columns parsed (empty cells become None)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise SchemaError(f"{path}: header {reader.fieldnames} does not match {list(CSV_COLUMNS)}")
        out = []
        for line_no, raw in enumerate(reader, start=2):
            try:
                row = dict(raw)
                for key in ("sigma", "w", "mean_e2", "std_error", "asymptote_e2", "infeasible_rate"):
                    row[key] = float(raw[key]) if raw[key] != "" else None
                for key in ("N", "trials_run", "trials_feasible"):
                    row[key] = int(raw[key])
            except (TypeError, ValueError) as exc:
                raise SchemaError(f"{path}:{line_no}: {exc}") from None
            out.append(row)
    return out


def resolve_increment_density(n: int = 10, samples: int = 100_000, seed: int = 29, alpha: float = 0.01) -> dict:
    """KS test of one sorted angular gap against both candidate densities.

    Draws ``samples`` worlds of ``n`` uniform angles and keeps the first
    non-wrapping gap of each. Returns p-values per support and the single
    support not rejected at ``alpha`` (None when zero or both survive).
    """
    rng = np.random.default_rng(seed)
    angles = rng.uniform(0.0, 2 * np.pi, size=(samples, n))
    gaps = _first_gaps(angles)
    pvals = {}
    for support in IncrementSupport:
        res = stats.kstest(gaps, lambda t, s=support: increment_cdf(t, n, s))
        pvals[support.value] = float(res.pvalue)
    survivors = [k for k, p in pvals.items() if p >= alpha]
    return {
        "n": n,
        "samples": samples,
        "alpha": alpha,
        "p_values": pvals,
        "winner": survivors[0] if len(survivors) == 1 else None,
    }


def _first_gaps(angles: np.ndarray) -> np.ndarray:
    s = np.sort(angles, axis=1)
    return s[:, 1] - s[:, 0]


def write_manifest(config: ExperimentConfig, path: Path, extra: dict | None = None) -> dict:
    manifest = {
        "config_id": config.config_id,
        "package_version": __version__,
        "config": config.to_dict(),
        "csv_columns": list(CSV_COLUMNS),
        "increment_density": resolve_increment_density(),
    }
    if extra:
        manifest.update(extra)
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
