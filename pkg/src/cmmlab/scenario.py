"""Sampled worlds: road directions, composite non-common errors, constraint sets.

Only the projection of each vehicle's composite non-common error onto its
road normal enters the feasible set, so scenarios carry those scalars and
never sample the tangential component.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geometry import HalfPlane, Vec2, unit

TWO_PI = 2.0 * math.pi
ORTHOGONAL_ANGLES = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)


class ScenarioError(ValueError):
    pass


class RoadKind(enum.Enum):
    ORTHOGONAL = "orthogonal"
    UNIFORM = "uniform"


@dataclass(frozen=True)
class RoadModel:
    kind: RoadKind
    counts: tuple[int, int, int, int] | None = None
    n: int | None = None

    def __post_init__(self):
        if self.kind is RoadKind.ORTHOGONAL:
            if self.counts is None or len(self.counts) != 4 or min(self.counts) < 1:
                raise ScenarioError(f"orthogonal model needs four counts >= 1, got {self.counts}")
        elif self.n is None or self.n < 3:
            raise ScenarioError(f"uniform model needs n >= 3, got {self.n}")

    @classmethod
    def orthogonal(cls, *counts: int) -> RoadModel:
        if len(counts) == 1:
            counts = counts * 4
        return cls(RoadKind.ORTHOGONAL, counts=tuple(int(c) for c in counts))

    @classmethod
    def uniform(cls, n: int) -> RoadModel:
        return cls(RoadKind.UNIFORM, n=int(n))

    @property
    def total(self) -> int:
        return sum(self.counts) if self.kind is RoadKind.ORTHOGONAL else self.n


@dataclass(frozen=True)
class NoiseModel:
    """Composite non-common error standard deviation, shared or per vehicle."""

    sigma: float | tuple[float, ...]

    def __post_init__(self):
        vals = (self.sigma,) if np.isscalar(self.sigma) else self.sigma
        if any(not math.isfinite(s) or s < 0 for s in vals):
            raise ScenarioError(f"sigmas must be finite and >= 0, got {self.sigma}")

    def sigmas(self, n: int) -> np.ndarray:
        if np.isscalar(self.sigma):
            return np.full(n, float(self.sigma))
        if len(self.sigma) != n:
            raise ScenarioError(f"noise model has {len(self.sigma)} sigmas, need {n}")
        return np.asarray(self.sigma, dtype=float)


@dataclass(frozen=True, eq=False)
class Scenario:
    angles: np.ndarray
    projections: np.ndarray
    half_width: float
    common_error: Vec2 = Vec2(0.0, 0.0)
    # per-vehicle noise scale; only the weighted estimator reads it
    sigmas: np.ndarray | None = field(default=None)

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        proj = np.asarray(self.projections, dtype=float)
        if angles.shape != proj.shape or angles.ndim != 1:
            raise ScenarioError("angles and projections must be 1-D of equal length")
        if not self.half_width > 0:
            raise ScenarioError(f"half width must be positive, got {self.half_width}")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "projections", proj)
        object.__setattr__(self, "common_error", Vec2(*map(float, self.common_error)))
        if self.sigmas is not None:
            sig = np.broadcast_to(np.asarray(self.sigmas, dtype=float), angles.shape).copy()
            object.__setattr__(self, "sigmas", sig)

    @property
    def n(self) -> int:
        return len(self.angles)

    def normals(self) -> np.ndarray:
        return np.column_stack([np.cos(self.angles), np.sin(self.angles)])


def sample_angles(model: RoadModel, rng: np.random.Generator) -> np.ndarray:
    if model.kind is RoadKind.ORTHOGONAL:
        return np.repeat(np.array(ORTHOGONAL_ANGLES), model.counts)
    return rng.uniform(0.0, TWO_PI, size=model.n)


def sample_projections(n: int, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    sig = noise.sigmas(n)
    return rng.standard_normal(n) * sig


def sample_scenario(
    model: RoadModel,
    noise: NoiseModel,
    half_width: float,
    rng: np.random.Generator,
    common_error: Sequence[float] = (0.0, 0.0),
) -> Scenario:
    angles = sample_angles(model, rng)
    proj = sample_projections(len(angles), noise, rng)
    return Scenario(angles, proj, half_width, Vec2(*common_error), noise.sigmas(len(angles)))


def build_constraints(scenario: Scenario, perturbed: bool = True) -> list[HalfPlane]:
    """Half-planes on the error hypothesis: normal (cos t, sin t), offset w - projection."""
    w = scenario.half_width
    if perturbed:
        offsets = w - scenario.projections
    else:
        offsets = np.full(scenario.n, w)
    return [HalfPlane.from_angle(a, o) for a, o in zip(scenario.angles.tolist(), offsets.tolist())]


def sorted_increments(angles: Sequence[float]) -> np.ndarray:
    """Gaps between consecutive sorted angles, the last one wrapping through 2*pi."""
    a = np.sort(np.asarray(angles, dtype=float))
    if a.size < 2:
        raise ScenarioError("need at least two angles")
    inc = np.empty_like(a)
    inc[:-1] = np.diff(a)
    inc[-1] = a[0] - a[-1] + TWO_PI
    return inc


@dataclass(frozen=True)
class VehicleObservation:
    lane_point: Vec2
    deviation: Vec2
    common: Vec2
    noncommon: Vec2
    gnss: Vec2


def synthesize_observations(
    scenario: Scenario,
    lane_points: Sequence[Sequence[float]],
    deviations: Sequence[Sequence[float]],
    rng: np.random.Generator,
    tangential_sigma: float = 1.0,
) -> list[VehicleObservation]:
    """Full-frame GNSS fixes whose composite error projects onto each normal as in ``scenario``.

    The receiver error gets whatever normal component is left after the lane
    deviation, plus a random tangential component that the estimator never sees.
    """
    n = scenario.n
    if len(lane_points) != n or len(deviations) != n:
        raise ScenarioError(f"expected {n} lane points and deviations")
    xc = scenario.common_error
    out = []
    for i in range(n):
        nrm = unit(scenario.angles[i])
        tan = Vec2(-nrm.y, nrm.x)
        dev = Vec2(*map(float, deviations[i]))
        along = float(scenario.projections[i]) - dev.dot(nrm)
        xn = nrm.scale(along) + tan.scale(tangential_sigma * rng.standard_normal())
        lane = Vec2(*map(float, lane_points[i]))
        gnss = lane + dev + xc + xn
        out.append(VehicleObservation(lane, dev, xc, xn, gnss))
    return out


def full_frame_constraints(
    observations: Sequence[VehicleObservation], angles: Sequence[float], half_width: float
) -> list[HalfPlane]:
    """Constraints on the common-error hypothesis built from raw fixes and lane geometry.

    Requiring ``(gnss - tau - lane) . n <= w`` gives normal ``-n`` and offset
    ``w - (gnss - lane) . n``.
    """
    out = []
    for obs, a in zip(observations, angles):
        nrm = unit(a)
        out.append(HalfPlane(Vec2(-nrm.x, -nrm.y), half_width - (obs.gnss - obs.lane_point).dot(nrm)))
    return out
