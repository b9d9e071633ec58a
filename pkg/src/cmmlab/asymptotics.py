"""Closed-form predictions for the mean square error of the centroid estimator.

Orthogonal roads: Gumbel limit of the directional maxima gives a 1/log(N)
law. Uniform roads: linearising the centroid in the noise gives a 1/N law.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .estimators import exact_errors_fixed_angles
from .geometry import HalfPlane, RegionStatus, Vec2, area_and_centroid, intersect_halfplanes
from .scenario import TWO_PI, sorted_increments

EULER_GAMMA = float(np.euler_gamma)


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class GumbelParams:
    mu: float
    beta: float

    def __post_init__(self):
        if self.beta < 0:
            raise DomainError(f"Gumbel scale must be non-negative, got {self.beta}")

    @property
    def mean(self) -> float:
        return self.mu + EULER_GAMMA * self.beta

    @property
    def variance(self) -> float:
        return math.pi**2 / 6.0 * self.beta**2


def gumbel_params(n: float, sigma: float) -> GumbelParams:
    """Leading-order location and scale of the max of ``n`` iid N(0, sigma^2)."""
    if n < 2:
        raise DomainError(f"need n >= 2, got {n}")
    if not sigma > 0:
        raise DomainError(f"need sigma > 0, got {sigma}")
    root = math.sqrt(2.0 * math.log(n))
    return GumbelParams(sigma * root, sigma / root)


def expected_e2_orthogonal(params: Sequence[GumbelParams]) -> float:
    if len(params) != 4:
        raise DomainError("need Gumbel parameters for exactly four directions")
    p1, p2, p3, p4 = params
    spread = math.pi**2 / 24.0 * sum(p.beta**2 for p in params)
    bias_x = p1.mu - p3.mu + EULER_GAMMA * (p1.beta - p3.beta)
    bias_y = p2.mu - p4.mu + EULER_GAMMA * (p2.beta - p4.beta)
    return spread + 0.25 * bias_x**2 + 0.25 * bias_y**2


def expected_e2_orthogonal_leading(counts: Sequence[float], sigma: float) -> float:
    """(pi^2 sigma^2 / 48) * sum_j 1 / ln N_j."""
    if len(counts) != 4:
        raise DomainError("need four direction counts")
    if min(counts) < 2:
        raise DomainError(f"every direction needs N_j >= 2, got {tuple(counts)}")
    return math.pi**2 * sigma**2 / 48.0 * sum(1.0 / math.log(c) for c in counts)


def expected_e2_uniform_leading(n: int, half_width: float, sigmas: float | Sequence[float]) -> float:
    """2 w^2 / (9 N) + 3 sum(sigma_i^2) / (2 N^2)."""
    if n < 3:
        raise DomainError(f"need n >= 3, got {n}")
    if np.isscalar(sigmas):
        total = n * float(sigmas) ** 2
    else:
        total = float(np.sum(np.square(sigmas)))
    return 2.0 * half_width**2 / (9.0 * n) + 3.0 * total / (2.0 * n**2)


@dataclass(frozen=True, eq=False)
class LinearizedModel:
    e0: Vec2
    S0: float
    C: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        if not self.S0 > 0:
            raise DomainError("unperturbed area must be positive")
        if self.C.shape != (2, len(self.sigmas)):
            raise DomainError(f"sensitivity matrix shape {self.C.shape} does not match {len(self.sigmas)} sigmas")

    def predict_error(self, projections: np.ndarray) -> np.ndarray:
        """First-order error for projections of shape (N,) or (M, N)."""
        return np.asarray(self.e0) + np.asarray(projections) @ self.C.T / self.S0


def _centroid(angles, offsets):
    region = intersect_halfplanes([HalfPlane.from_angle(a, o) for a, o in zip(angles, offsets)])
    if region.status is not RegionStatus.BOUNDED:
        raise DomainError(f"unperturbed feasible set is {region.status.value}")
    return area_and_centroid(region)


def build_linearized_model(angles: Sequence[float], half_width: float, sigmas) -> LinearizedModel:
    """e0 and S0 from the noise-free polygon; C by central differences of its centroid."""
    angles = np.asarray(angles, dtype=float)
    n = len(angles)
    sig = np.broadcast_to(np.asarray(sigmas, dtype=float), (n,)).copy()
    w = float(half_width)
    base = np.full(n, w)
    s0, e0 = _centroid(angles, base)
    h = 1e-6 * w
    C = np.empty((2, n))
    for i in range(n):
        plus = base.copy()
        plus[i] -= h
        minus = base.copy()
        minus[i] += h
        # projection +h shrinks the offset by h
        _, cp = _centroid(angles, plus)
        _, cm = _centroid(angles, minus)
        C[:, i] = s0 * (np.asarray(cp) - np.asarray(cm)) / (2.0 * h)
    return LinearizedModel(e0, s0, C, sig)


def linearized_expected_e2(model: LinearizedModel) -> float:
    trace = float(np.sum(model.sigmas**2 * np.sum(model.C**2, axis=0)))
    return model.e0.norm2() + trace / model.S0**2


def centroid_curvature(angles: Sequence[float], half_width: float, step: float | None = None) -> np.ndarray:
    """Second derivatives d^2 e / dX_i^2 of the noise-free centroid, shape (2, N)."""
    angles = np.asarray(angles, dtype=float)
    n = len(angles)
    h = 1e-4 * half_width if step is None else step
    proj = np.zeros((2 * n + 1, n))
    proj[1 : n + 1] = h * np.eye(n)
    proj[n + 1 :] = -h * np.eye(n)
    e, _, ok = exact_errors_fixed_angles(angles, proj, half_width)
    if not ok.all():
        raise DomainError("perturbed polygon left the bounded regime")
    return ((e[1 : n + 1] + e[n + 1 :] - 2.0 * e[0]) / h**2).T


def second_order_expected_e2(model: LinearizedModel, curvature: np.ndarray) -> float:
    """Linearized prediction plus the O(sigma^2) cross term 2 e0 . E[second-order shift].

    The mean of the quadratic part of the centroid is (1/2) sum_i sigma_i^2 d^2e/dX_i^2;
    it pairs with e0 at the same order as the trace term whenever e0 != 0.
    """
    shift = 0.5 * curvature @ model.sigmas**2
    return linearized_expected_e2(model) + 2.0 * float(np.dot(np.asarray(model.e0), shift))


def _increments_checked(angles, half_width):
    a = np.sort(np.asarray(angles, dtype=float))
    inc = sorted_increments(a)
    if np.any(inc >= math.pi):
        raise DomainError("an angular gap of pi or more leaves the polygon unbounded")
    return a, inc


def tangential_area(angles: Sequence[float], half_width: float) -> float:
    """Area of the polygon circumscribed about the radius-w circle: sum w^2 tan(gap/2)."""
    _, inc = _increments_checked(angles, half_width)
    return float(half_width**2 * np.sum(np.tan(inc / 2.0)))


def e0_squared_geometric(angles: Sequence[float], half_width: float) -> float:
    """Squared centroid of the noise-free polygon from its tangential geometry.

    The polygon splits into one kite per angular gap (centre, two tangent
    points, corner). A kite with half-gap t has area w^2 tan t and first moment
    (w^3/3) tan t (cos t + sec t) along its bisector; the leading term of that
    moment is (2/3) w^3 tan t.
    """
    a, inc = _increments_checked(angles, half_width)
    w = float(half_width)
    t = inc / 2.0
    mid = a + t
    area = w * w * np.sum(np.tan(t))
    weight = w**3 / 3.0 * np.tan(t) * (np.cos(t) + 1.0 / np.cos(t))
    mx = np.sum(weight * np.cos(mid))
    my = np.sum(weight * np.sin(mid))
    return float((mx * mx + my * my) / area**2)


def e0_squared_leading(angles: Sequence[float], half_width: float) -> float:
    """Leading-order e0^2: kite moments (2/3) w^3 tan(gap/2) over the large-N area (pi w^2)^2.

    Each moment points along its gap's bisector. Only a large-N approximation;
    finite-N comparisons should use :func:`e0_squared_geometric`.
    """
    a, inc = _increments_checked(angles, half_width)
    w = float(half_width)
    mid = a + inc / 2.0
    weight = 2.0 / 3.0 * w**3 * np.tan(inc / 2.0)
    mx = np.sum(weight * np.cos(mid))
    my = np.sum(weight * np.sin(mid))
    return float((mx * mx + my * my) / (math.pi * w * w) ** 2)


class IncrementSupport(enum.Enum):
    PAPER_PI = "paper_pi"
    FULL_TWO_PI = "full_two_pi"

    @property
    def span(self) -> float:
        return math.pi if self is IncrementSupport.PAPER_PI else TWO_PI


def increment_density(theta, n: int, support: IncrementSupport = IncrementSupport.PAPER_PI):
    """(n/L) (1 - theta/L)^(n-1) on [0, L] with L = pi or 2*pi."""
    span = support.span
    th = np.asarray(theta, dtype=float)
    upper_ok = th <= span if support is IncrementSupport.PAPER_PI else th < span
    if np.any(th < 0) or not np.all(upper_ok):
        raise DomainError(f"theta outside the {support.value} support")
    out = n / span * (1.0 - th / span) ** (n - 1)
    return float(out) if out.ndim == 0 else out


def increment_cdf(theta, n: int, support: IncrementSupport):
    span = support.span
    th = np.clip(np.asarray(theta, dtype=float), 0.0, span)
    return 1.0 - (1.0 - th / span) ** n


def expected_tan2_half_increment(n: int) -> float:
    """Leading order of E[tan^2(gap/2)]: pi^2 / (2 n^2)."""
    if n < 3:
        raise DomainError(f"need n >= 3, got {n}")
    return math.pi**2 / (2.0 * n * n)


def sample_gaussian_maxima(n: int, reps: int, rng: np.random.Generator, method: str = "inverse") -> np.ndarray:
    """Draw ``reps`` values of max of ``n`` iid standard normals.

    ``inverse`` uses P(max <= x) = Phi(x)^n, i.e. max = Phi^-1(U^(1/n)), computed
    through the upper tail to keep precision for large n. ``brute`` draws all
    n * reps normals in chunks.
    """
    if method == "inverse":
        u = rng.uniform(size=reps)
        upper = -np.expm1(np.log(u) / n)
        return -ndtri(upper)
    if method == "brute":
        out = np.empty(reps)
        chunk = max(1, 2_000_000 // n)
        for start in range(0, reps, chunk):
            stop = min(reps, start + chunk)
            out[start:stop] = rng.standard_normal((stop - start, n)).max(axis=1)
        return out
    raise ValueError(f"unknown method {method!r}")
