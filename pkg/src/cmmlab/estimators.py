"""Common-error estimators and their error evaluators.

All of them work in the reduced frame: a hypothesis ``tau`` is a candidate
value of the estimation error, and the true common error only shifts the
reported estimate (``estimate = common_error - error``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, logsumexp

from .geometry import (
    ConvexRegion,
    HalfPlane,
    RegionStatus,
    Vec2,
    area_and_centroid,
    bounding_box,
    intersect_halfplanes,
)
from .scenario import ORTHOGONAL_ANGLES, Scenario, ScenarioError, build_constraints

DEFAULT_MC_SAMPLES = 10_000
DEGENERATE_WEIGHT = 1e-300


class DegenerateWeightsError(RuntimeError):
    pass


@dataclass(frozen=True)
class EstimateResult:
    estimate: Vec2 | None
    error: Vec2 | None
    square_error: float
    feasible: bool
    region_area: float
    status: RegionStatus
    diagnostics: dict = field(default_factory=dict)

    @classmethod
    def infeasible(cls, status: RegionStatus, **diagnostics) -> EstimateResult:
        return cls(None, None, math.nan, False, 0.0, status, dict(diagnostics))

    @classmethod
    def from_error(cls, scenario: Scenario, error, area: float, status=RegionStatus.BOUNDED, **diag):
        e = Vec2(float(error[0]), float(error[1]))
        return cls(scenario.common_error - e, e, e.norm2(), True, float(area), status, dict(diag))


def _dedup_constraints(scenario: Scenario, perturbed: bool = True) -> list[HalfPlane]:
    """Keep only the tightest constraint per distinct road direction."""
    offsets = scenario.half_width - scenario.projections if perturbed else np.full(scenario.n, scenario.half_width)
    uniq, inverse = np.unique(scenario.angles, return_inverse=True)
    if len(uniq) == scenario.n:
        return build_constraints(scenario, perturbed)
    tight = np.full(len(uniq), np.inf)
    np.minimum.at(tight, inverse, offsets)
    return [HalfPlane.from_angle(a, o) for a, o in zip(uniq.tolist(), tight.tolist())]


def feasible_region(scenario: Scenario, perturbed: bool = True) -> ConvexRegion:
    return intersect_halfplanes(_dedup_constraints(scenario, perturbed))


def exact_error(scenario: Scenario) -> EstimateResult:
    """Error as the exact centroid of the perturbed feasible polygon."""
    region = feasible_region(scenario)
    if not region.bounded:
        return EstimateResult.infeasible(region.status)
    area, c = area_and_centroid(region)
    return EstimateResult.from_error(scenario, c, area, vertices=len(region.vertices))


def exact_errors_fixed_angles(angles, projections, half_width: float):
    """Vectorised exact errors for many noise draws over one set of road angles.

    ``projections`` is (M, N). When every constraint contributes an edge the
    polygon's vertices are the intersections of angularly consecutive lines;
    rows where that fails (or directions repeat) go through the clipping path.
    Returns (errors (M, 2), areas (M,), feasible (M,)); infeasible rows are NaN.
    """
    angles = np.asarray(angles, dtype=float)
    proj = np.atleast_2d(np.asarray(projections, dtype=float))
    m, n = proj.shape
    errors = np.full((m, 2), np.nan)
    areas = np.zeros(m)
    feasible = np.zeros(m, dtype=bool)

    order = np.argsort(angles)
    a = angles[order]
    gaps = np.append(np.diff(a), a[0] - a[-1] + 2 * np.pi)
    fast = np.zeros(m, dtype=bool)
    if n >= 3 and np.all(gaps > 1e-12) and np.all(gaps < np.pi):
        c, s = np.cos(a), np.sin(a)
        c1, s1 = np.roll(c, -1), np.roll(s, -1)
        det = c * s1 - s * c1
        o = half_width - proj[:, order]
        o1 = np.roll(o, -1, axis=1)
        # vertex k joins line k and line k+1
        vx = (o * s1 - o1 * s) / det
        vy = (c * o1 - c1 * o) / det
        # edge along line k+1 runs from vertex k to vertex k+1
        tx, ty = -s1, c1
        length = (np.roll(vx, -1, axis=1) - vx) * tx + (np.roll(vy, -1, axis=1) - vy) * ty
        fast = np.all(length > 1e-9, axis=1)
        if fast.any():
            x, y = vx[fast], vy[fast]
            x0, y0 = x[:, :1], y[:, :1]
            xs, ys = x - x0, y - y0
            xn, yn = np.roll(xs, -1, axis=1), np.roll(ys, -1, axis=1)
            cross = xs * yn - xn * ys
            a2 = cross.sum(axis=1)
            cx = ((xs + xn) * cross).sum(axis=1) / (3 * a2) + x0[:, 0]
            cy = ((ys + yn) * cross).sum(axis=1) / (3 * a2) + y0[:, 0]
            ok = 0.5 * a2 >= 1e-12
            idx = np.flatnonzero(fast)
            errors[idx[ok]] = np.column_stack([cx, cy])[ok]
            areas[idx[ok]] = 0.5 * a2[ok]
            feasible[idx[ok]] = True
            fast[idx[~ok]] = False

    for row in np.flatnonzero(~fast):
        res = exact_error(Scenario(angles, proj[row], half_width))
        if res.feasible:
            errors[row] = res.error
            areas[row] = res.region_area
            feasible[row] = True
    return errors, areas, feasible


@dataclass(frozen=True)
class DirectionalExtremes:
    """Largest normal projection per orthogonal direction (0, pi/2, pi, 3pi/2)."""

    maxima: tuple[float, float, float, float]
    counts: tuple[int, int, int, int]

    def __post_init__(self):
        if len(self.maxima) != 4 or len(self.counts) != 4 or min(self.counts) < 1:
            raise ValueError("need four maxima over four non-empty directions")


def directional_extremes(scenario: Scenario) -> DirectionalExtremes:
    maxima, counts = [], []
    for ref in ORTHOGONAL_ANGLES:
        mask = np.abs(scenario.angles - ref) < 1e-9
        if not mask.any():
            raise ScenarioError(f"no vehicle on direction {ref:.4f}")
        maxima.append(float(scenario.projections[mask].max()))
        counts.append(int(mask.sum()))
    if sum(counts) != scenario.n:
        raise ScenarioError("scenario has non-orthogonal road directions")
    return DirectionalExtremes(tuple(maxima), tuple(counts))


def closed_form_orthogonal_error(extremes: DirectionalExtremes) -> Vec2:
    x1, x2, x3, x4 = extremes.maxima
    return Vec2((x3 - x1) / 2.0, (x4 - x2) / 2.0)


def closed_form_orthogonal_e2(extremes: DirectionalExtremes) -> float:
    x1, x2, x3, x4 = extremes.maxima
    return ((x3 - x1) ** 2 + (x4 - x2) ** 2) / 4.0


def mc_integration_error(
    scenario: Scenario, sample_count: int, rng: np.random.Generator, region: ConvexRegion | None = None
) -> EstimateResult:
    """Centroid of the feasible set by uniform rejection sampling over a proposal box.

    The proposal is the exact polygon's bounding box when it is bounded,
    otherwise a square of half-side ``w + max|projection|``.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    if region is None:
        region = feasible_region(scenario)
    if region.bounded:
        xmin, xmax, ymin, ymax = bounding_box(region)
    else:
        h = scenario.half_width + float(np.max(np.abs(scenario.projections)))
        xmin, xmax, ymin, ymax = -h, h, -h, h
    pts = rng.uniform(size=(sample_count, 2))
    pts[:, 0] = xmin + (xmax - xmin) * pts[:, 0]
    pts[:, 1] = ymin + (ymax - ymin) * pts[:, 1]
    offsets = scenario.half_width - scenario.projections
    inside = np.all(pts @ scenario.normals().T <= offsets, axis=1)
    k = int(inside.sum())
    box_area = (xmax - xmin) * (ymax - ymin)
    if k == 0 or not region.bounded:
        return EstimateResult.infeasible(region.status, accepted=k, proposal_area=box_area)
    acc = pts[inside]
    mean = acc.mean(axis=0)
    stderr = acc.std(axis=0, ddof=1) / math.sqrt(k) if k > 1 else np.zeros(2)
    return EstimateResult.from_error(
        scenario,
        mean,
        box_area * k / sample_count,
        accepted=k,
        proposal_area=box_area,
        stderr=(float(stderr[0]), float(stderr[1])),
    )


@dataclass(frozen=True)
class GridSpec:
    """Hypothesis set for the weighted estimator.

    A regular ``resolution`` x ``resolution`` grid over ``[-extent, extent]^2``,
    or ``particles`` uniform random hypotheses over the same square. ``extent``
    defaults to ``3 * max(w, 3 * sigma_max)``.
    """

    extent: float | None = None
    resolution: int = 201
    particles: int | None = None

    def __post_init__(self):
        if self.extent is not None and not self.extent > 0:
            raise ValueError("grid extent must be positive")
        if self.particles is None and self.resolution < 2:
            raise ValueError("grid resolution must be >= 2")
        if self.particles is not None and self.particles < 1:
            raise ValueError("particle count must be >= 1")

    def hypotheses(self, half_width: float, sigma_max: float, rng: np.random.Generator | None) -> np.ndarray:
        b = self.extent if self.extent is not None else 3.0 * max(half_width, 3.0 * sigma_max)
        if self.particles is not None:
            if rng is None:
                raise ValueError("random hypotheses need an rng")
            return rng.uniform(-b, b, size=(self.particles, 2))
        g = np.linspace(-b, b, self.resolution)
        gx, gy = np.meshgrid(g, g, indexing="xy")
        return np.column_stack([gx.ravel(), gy.ravel()])


def weighted_log_weights(scenario: Scenario, hyp: np.ndarray) -> np.ndarray:
    """log prod_i Phi((w - projection_i - tau . n_i) / sigma_i) for each hypothesis tau."""
    sig = scenario.sigmas if scenario.sigmas is not None else np.zeros(scenario.n)
    margin0 = scenario.half_width - scenario.projections
    logw = np.zeros(len(hyp))
    hx, hy = hyp[:, 0], hyp[:, 1]
    for a, m0, s in zip(scenario.angles.tolist(), margin0.tolist(), sig.tolist()):
        margin = m0 - (hx * math.cos(a) + hy * math.sin(a))
        if s > 0:
            logw += log_ndtr(margin / s)
        else:
            logw[margin < 0] = -np.inf
    return logw


def weighted_error(
    scenario: Scenario, grid: GridSpec | None = None, rng: np.random.Generator | None = None
) -> EstimateResult:
    """Soft-constraint estimate: hypotheses weighted by the chance every vehicle is on-road."""
    grid = grid or GridSpec()
    sig = scenario.sigmas if scenario.sigmas is not None else np.zeros(scenario.n)
    hyp = grid.hypotheses(scenario.half_width, float(np.max(sig, initial=0.0)), rng)
    logw = weighted_log_weights(scenario, hyp)
    total = logsumexp(logw)
    if not total >= math.log(DEGENERATE_WEIGHT):
        raise DegenerateWeightsError(f"total hypothesis weight exp({total:.1f}) underflows; widen the grid")
    p = np.exp(logw - total)
    mean = p @ hyp
    ess = 1.0 / float(np.sum(p * p))
    return EstimateResult.from_error(scenario, mean, math.nan, RegionStatus.BOUNDED, effective_weight=ess)
