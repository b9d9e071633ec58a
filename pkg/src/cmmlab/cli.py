"""Command-line entry point: ``cmmlab {run,predict,compare,plot-data,demo}``.

Exit codes: 0 success, 2 usage or validation error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .asymptotics import (
    DomainError,
    build_linearized_model,
    centroid_curvature,
    expected_e2_orthogonal,
    expected_e2_orthogonal_leading,
    expected_e2_uniform_leading,
    gumbel_params,
    linearized_expected_e2,
    second_order_expected_e2,
)
from .estimators import exact_error
from .experiments import (
    ConfigError,
    Estimator,
    ExperimentConfig,
    ExperimentRow,
    SchemaError,
    loglog_slope,
    read_csv,
    run_experiment,
    write_csv,
    write_manifest,
)
from .geometry import area_and_centroid, intersect_halfplanes
from .scenario import NoiseModel, RoadModel, Scenario, full_frame_constraints, sample_scenario, synthesize_observations

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
DEMO_SEED = 7


class UsageError(Exception):
    pass


def _field_line(text: str, field: str) -> int | None:
    pat = re.compile(rf"^\s*{re.escape(field)}\s*=")
    for i, line in enumerate(text.splitlines(), start=1):
        if pat.match(line):
            return i
    return None


def load_config(path: Path) -> ExperimentConfig:
    """Parse and validate a TOML experiment file; errors carry ``path:line``."""
    text = Path(path).read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}") from None
    try:
        return ExperimentConfig.from_dict(data)
    except ConfigError as exc:
        line = _field_line(text, exc.field)
        where = f"{path}:{line}" if line else str(path)
        raise UsageError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_run(args) -> int:
    if not args.config:
        raise UsageError("run needs --config")
    config = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.estimator is not None:
        overrides["estimator"] = args.estimator
    if overrides:
        try:
            config = ExperimentConfig.from_dict({**config.to_dict(), **overrides})
        except ConfigError as exc:
            raise UsageError(f"override {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = run_experiment(config, threads=args.threads)
    stem = config.name or config.config_id
    write_csv(rows, config, out / f"{stem}.csv")
    write_manifest(config, out / f"{stem}.manifest.json")
    print(f"wrote {out / (stem + '.csv')}")
    return EXIT_OK


def _read_angles(path: Path) -> np.ndarray:
    vals = Path(path).read_text().replace(",", " ").split()
    try:
        return np.array([float(v) for v in vals])
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def cmd_predict(args) -> int:
    case = args.case
    sigma = args.sigma
    w = args.w
    try:
        if case == "linearized":
            if not args.angles:
                raise UsageError("linearized prediction needs --angles FILE")
            angles = _read_angles(args.angles)
            model = build_linearized_model(angles, w, sigma)
            curv = centroid_curvature(angles, w)
            print(f"N={len(angles)}  e0^2={model.e0.norm2():.8g}  S0={model.S0:.8g}")
            print(f"linearized E[e^2]={linearized_expected_e2(model):.8g}")
            print(f"with curvature term E[e^2]={second_order_expected_e2(model, curv):.8g}")
            return EXIT_OK
        ns = args.n or ([250] if case.startswith("orthogonal") else [30])
        label = "N_j" if case.startswith("orthogonal") else "N"
        vals = []
        for n in ns:
            if case == "orthogonal":
                vals.append(expected_e2_orthogonal_leading([n] * 4, sigma))
            elif case == "orthogonal-full":
                vals.append(expected_e2_orthogonal([gumbel_params(n, sigma)] * 4))
            else:
                vals.append(expected_e2_uniform_leading(int(n), w, sigma))
    except DomainError as exc:
        raise UsageError(str(exc)) from None
    print(f"{label:>8}  E[e^2] (m^2)")
    for n, val in zip(ns, vals):
        print(f"{n:>8g}  {val:.6g}")
    return EXIT_OK


def _fmt(x) -> str:
    return "nan" if x is None else f"{x:.6g}"


def cmd_compare(args) -> int:
    tables = [(p, _load_rows(p)) for p in args.csv]
    for path, rows in tables:
        print(f"# {path}")
        print(f"{'N':>6} {'mean_e2':>12} {'std_error':>12} {'asymptote':>12} {'diff':>12} {'rel':>8} {'z':>7}")
        for r in rows:
            m, se, a = r["mean_e2"], r["std_error"], r["asymptote_e2"]
            diff = rel = z = None
            if m is not None and a is not None:
                diff = m - a
                rel = diff / a
                z = diff / se if se else None
            print(f"{r['N']:>6} {_fmt(m):>12} {_fmt(se):>12} {_fmt(a):>12} {_fmt(diff):>12} {_fmt(rel):>8} {_fmt(z):>7}")
    if len(tables) >= 2:
        print("# log-log slopes of mean_e2 vs N")
        for path, rows in tables:
            try:
                slope = loglog_slope([_as_row(r) for r in rows])
            except ValueError as exc:
                raise UsageError(f"{path}: {exc}") from None
            print(f"{slope:+.4f}  {path}")
    return EXIT_OK


def _as_row(r):
    return ExperimentRow(r["N"], r["trials_run"], r["trials_feasible"], r["mean_e2"], r["std_error"], r["asymptote_e2"], r["infeasible_rate"])


def _load_rows(path) -> list[dict]:
    try:
        return read_csv(Path(path))
    except SchemaError as exc:
        raise UsageError(str(exc)) from None


def _series(rows, key="mean_e2"):
    return {r["N"]: r[key] for r in rows}


def _pick(tables, **want):
    for path, rows in tables:
        if rows and all(rows[0][k] in v for k, v in want.items()):
            return path, rows
    desc = ", ".join(f"{k} in {sorted(v)}" for k, v in want.items())
    raise UsageError(f"no input CSV with {desc}")


def _aligned(series: dict[str, dict[int, float]]):
    grids = {name: set(s) for name, s in series.items()}
    union = set().union(*grids.values())
    common = set.intersection(*grids.values())
    missing = sorted(union - common)
    if missing:
        raise UsageError(f"inputs do not share N values: {missing}")
    return sorted(common)


def cmd_plot_data(args) -> int:
    tables = [(p, _load_rows(p)) for p in args.csv]
    fig = args.figure
    if fig == "fig2":
        _, closed = _pick(tables, road_model={"orthogonal"}, estimator={"closed_form", "exact"})
        _, mc = _pick(tables, road_model={"orthogonal"}, estimator={"mc"})
        series = {
            "closed_form": _series(closed),
            "mc_integration": _series(mc),
            "asymptote": _series(closed, "asymptote_e2"),
        }
    elif fig in ("fig3", "fig4"):
        try:
            _, rows = _pick(tables, road_model={"uniform"}, estimator={"mc"})
        except UsageError:
            _, rows = _pick(tables, road_model={"uniform"}, estimator={"exact"})
        if fig == "fig3":
            series = {"simulation": _series(rows), "asymptote": _series(rows, "asymptote_e2")}
        else:
            diff = {}
            for r in rows:
                m, a = r["mean_e2"], r["asymptote_e2"]
                diff[r["N"]] = None if m is None or a is None else m - a
            series = {"difference": diff}
    elif fig == "fig5":
        _, uni = _pick(tables, road_model={"uniform"}, estimator={"weighted"})
        _, orth = _pick(tables, road_model={"orthogonal"}, estimator={"weighted"})
        series = {"uniform": _series(uni), "orthogonal": _series(orth)}
    else:
        raise UsageError(f"unknown figure {fig}")
    grid = _aligned(series)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{fig}.dat"
    names = list(series)
    with open(path, "w") as fh:
        fh.write("# N " + " ".join(names) + "\n")
        for n in grid:
            vals = [series[k][n] for k in names]
            fh.write(f"{n} " + " ".join("nan" if v is None else f"{v:.17g}" for v in vals) + "\n")
    print(f"wrote {path}")
    return EXIT_OK


def demo_transcript(seed: int = DEMO_SEED, common_error=(3.0, -2.0)) -> tuple[str, dict]:
    """Full-frame walkthrough on a small random scene; returns the text and key numbers."""
    rng = np.random.default_rng(seed)
    w = 2.0
    sc = sample_scenario(RoadModel.uniform(8), NoiseModel(0.3), w, rng, common_error=common_error)
    lanes = rng.uniform(-200.0, 200.0, size=(sc.n, 2))
    # lateral offset within the lane, along each road normal
    lateral = rng.uniform(-0.5, 0.5, size=sc.n)
    deviations = sc.normals() * lateral[:, None]
    obs = synthesize_observations(sc, lanes, deviations, rng)

    lines = [f"scene: {sc.n} vehicles, lane half-width w = {w} m, true common error x_C = {tuple(sc.common_error)}"]
    lines.append("vehicle  heading(rad)  lane point           deviation         non-common        GNSS fix")
    for i, o in enumerate(obs):
        lines.append(
            f"{i:>7}  {sc.angles[i]:>12.4f}  ({o.lane_point.x:8.3f},{o.lane_point.y:8.3f})  "
            f"({o.deviation.x:6.3f},{o.deviation.y:6.3f})  ({o.noncommon.x:6.3f},{o.noncommon.y:6.3f})  "
            f"({o.gnss.x:8.3f},{o.gnss.y:8.3f})"
        )
    region = intersect_halfplanes(full_frame_constraints(obs, sc.angles, w))
    result = {"status": region.status.value}
    lines.append(f"full-frame feasible set of x_C: {region.status.value}, {len(region.vertices)} vertices")
    if region.bounded:
        area, xhat = area_and_centroid(region)
        e_full = sc.common_error - xhat
        reduced = exact_error(Scenario(sc.angles, sc.projections, w, sc.common_error))
        lines.append(f"area S = {area:.6f} m^2")
        lines.append(f"estimate x_C_hat = ({xhat.x:.6f}, {xhat.y:.6f})")
        lines.append(f"error e = x_C - x_C_hat = ({e_full.x:.6f}, {e_full.y:.6f}), |e|^2 = {e_full.norm2():.6f} m^2")
        lines.append(
            f"reduced-frame centroid error     ({reduced.error.x:.6f}, {reduced.error.y:.6f})"
        )
        result.update(error=e_full, reduced_error=reduced.error, estimate=xhat)
    return "\n".join(lines), result


def cmd_demo(args) -> int:
    text, _ = demo_transcript(args.seed if args.seed is not None else DEMO_SEED)
    print(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path)
    common.add_argument("--out", type=Path, default=Path("results"))
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--estimator", choices=[e.value for e in Estimator])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cmmlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run an experiment sweep from a TOML config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("predict", parents=[common], help="print asymptotic predictions")
    p.add_argument("case", choices=["orthogonal", "orthogonal-full", "uniform", "linearized"])
    p.add_argument("--n", type=float, nargs="+", help="N_j per direction (orthogonal) or total N (uniform)")
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--w", type=float, default=2.0)
    p.add_argument("--angles", type=Path, help="whitespace-separated road angles in radians")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("compare", parents=[common], help="simulation vs prediction tables and slopes")
    p.add_argument("csv", nargs="+", type=Path)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("plot-data", parents=[common], help="emit plot-ready series for fig2..fig5")
    p.add_argument("--figure", required=True, choices=["fig2", "fig3", "fig4", "fig5"])
    p.add_argument("csv", nargs="+", type=Path)
    p.set_defaults(func=cmd_plot_data)

    p = sub.add_parser("demo", parents=[common], help="walk through one full-frame scene")
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
