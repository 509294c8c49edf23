"""Domains, densities, and the conformal cost field.

Two ambient spaces are supported: axis-aligned Euclidean boxes and flat tori
(per-axis wraparound).  A density f with declared positive lower/upper bounds
induces the conformal cost f^((1-p)/d), the integrand of the deformed distance
that the path-length limit converges to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import erf, gamma

from .errors import DensityContractError, DomainError, ParameterError

BOX = "box"
TORUS = "torus"

# Anchors in a box should keep this fraction of the smallest side away from
# the boundary so that measured paths do not feel the boundary.
DEFAULT_ANCHOR_MARGIN = 0.25


@dataclass(frozen=True)
class Domain:
    """Ambient space: a Euclidean box or a flat torus with given side lengths."""

    kind: str
    extent: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in (BOX, TORUS):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        object.__setattr__(self, "extent", tuple(float(s) for s in self.extent))
        if len(self.extent) < 2:
            raise DomainError("dimension must be at least 2")
        if any(not (s > 0) for s in self.extent):
            raise DomainError("all side lengths must be strictly positive")

    @property
    def dimension(self) -> int:
        return len(self.extent)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def diameter(self) -> float:
        """Largest possible base distance between two points of the domain."""
        ext = np.asarray(self.extent)
        if self.kind == TORUS:
            ext = ext / 2.0
        return float(np.linalg.norm(ext))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of rows of ``pts`` lying inside the extent."""
        pts = np.atleast_2d(pts)
        ext = np.asarray(self.extent)
        return np.all((pts >= 0.0) & (pts <= ext), axis=1)

    def require_inside(self, *points: np.ndarray) -> None:
        for pt in points:
            pt = np.asarray(pt, dtype=float)
            if pt.shape != (self.dimension,):
                raise DomainError(f"point shape {pt.shape} does not match dimension {self.dimension}")
            if not self.contains(pt)[0]:
                raise DomainError(f"point {pt} outside domain extent {self.extent}")

    def displacement(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Per-axis displacement y - x, reduced to the minimal image on a torus."""
        delta = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        if self.kind == TORUS:
            ext = np.asarray(self.extent)
            delta = np.remainder(delta + ext / 2.0, ext) - ext / 2.0
        return delta


def base_distance(domain: Domain, x, y) -> float:
    """Distance under the base metric: Euclidean, with wraparound on a torus."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    domain.require_inside(x, y)
    return float(np.linalg.norm(domain.displacement(x, y)))


def power_edge_weight(domain: Domain, p: float, u, v) -> float:
    """Edge weight base_distance(u, v)**p."""
    if p < 1:
        raise ParameterError(f"power must be >= 1, got {p}")
    return base_distance(domain, u, v) ** p


@dataclass(frozen=True)
class ConformalParams:
    """Power p and dimension d; alpha = 1/(d + 2p) is always derived."""

    p: float
    d: int

    def __post_init__(self):
        if self.d < 2:
            raise ParameterError(f"dimension must be >= 2, got {self.d}")
        if self.p < 1:
            raise ParameterError(f"power must be >= 1, got {self.p}")

    @property
    def alpha(self) -> float:
        return 1.0 / (self.d + 2.0 * self.p)

    @property
    def cost_exponent(self) -> float:
        return (1.0 - self.p) / self.d


@dataclass(frozen=True)
class DensityField:
    """Sampling density with point evaluation and declared inf/sup bounds."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    inf_bound: float
    sup_bound: float
    normalization_tolerance: float = 1e-3
    label: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (0 < self.inf_bound <= self.sup_bound < math.inf):
            raise ParameterError(
                f"need 0 < inf_bound <= sup_bound < inf, got [{self.inf_bound}, {self.sup_bound}]"
            )

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = np.asarray(self.evaluate(pts), dtype=float)
        return vals

    def check_bounds(self, vals: np.ndarray) -> None:
        """Opportunistic contract check on already-evaluated values."""
        tol = 1e-9 * max(1.0, self.sup_bound)
        if vals.size and (vals.min() < self.inf_bound - tol or vals.max() > self.sup_bound + tol):
            raise DensityContractError(
                f"density values [{vals.min():g}, {vals.max():g}] escape declared "
                f"bounds [{self.inf_bound:g}, {self.sup_bound:g}]"
            )

    @property
    def is_constant(self) -> bool:
        return self.inf_bound == self.sup_bound


def conformal_cost(f: DensityField, params: ConformalParams, x) -> float:
    """Pointwise cost f(x)**((1-p)/d); exactly 1 when p == 1."""
    val = float(f(np.asarray(x, dtype=float))[0])
    if val <= 0:
        raise DensityContractError(f"density nonpositive ({val}) at {x}")
    if params.p == 1:
        return 1.0
    return val ** params.cost_exponent


def conformal_cost_array(f: DensityField, params: ConformalParams, pts: np.ndarray) -> np.ndarray:
    """Vectorized conformal cost at many points."""
    vals = f(pts)
    if np.any(vals <= 0):
        raise DensityContractError("density nonpositive at some queried points")
    if params.p == 1:
        return np.ones(len(np.atleast_2d(pts)))
    return vals ** params.cost_exponent


# ---------------------------------------------------------------------------
# Built-in densities: uniform, truncated-Gaussian bump, two-bump mixture.
# All carry analytically known inf/sup bounds and exact normalization.
# ---------------------------------------------------------------------------

def uniform_density(domain: Domain) -> DensityField:
    val = 1.0 / domain.volume
    d = domain.dimension

    def _eval(pts: np.ndarray) -> np.ndarray:
        return np.full(len(np.atleast_2d(pts)), val)

    return DensityField(_eval, val, val, label="uniform", params={"value": val})


def _truncated_gaussian_mass(d: int, sigma: float, radius: float) -> float:
    """Integral over R^d of (exp(-r^2/2s^2) - exp(-R^2/2s^2))_+ restricted to r < R."""
    tail = math.exp(-radius**2 / (2 * sigma**2))
    if d == 2:
        return 2 * math.pi * sigma**2 * (1 - tail) - math.pi * radius**2 * tail
    if d == 3:
        core = 4 * math.pi * (
            sigma**3 * math.sqrt(math.pi / 2) * float(erf(radius / (sigma * math.sqrt(2))))
            - sigma**2 * radius * tail
        )
        return core - (4.0 / 3.0) * math.pi * radius**3 * tail
    raise ParameterError(f"truncated-Gaussian bump only implemented for d in {{2, 3}}, got {d}")


def _bump_profile(domain: Domain, center: np.ndarray, sigma: float, radius: float,
                  pts: np.ndarray) -> np.ndarray:
    """Continuous truncated-Gaussian profile, zero outside radius."""
    delta = pts - center
    if domain.kind == TORUS:
        ext = np.asarray(domain.extent)
        delta = np.remainder(delta + ext / 2.0, ext) - ext / 2.0
    r2 = np.einsum("ij,ij->i", delta, delta)
    tail = math.exp(-radius**2 / (2 * sigma**2))
    prof = np.exp(-r2 / (2 * sigma**2)) - tail
    prof[r2 >= radius**2] = 0.0
    return prof


def bump_density(domain: Domain, center=None, amplitude: float = 0.5,
                 width: float | None = None) -> DensityField:
    """Uniform background plus one truncated-Gaussian bump.

    ``amplitude`` is the bump height relative to the uniform level;
    ``width`` is the Gaussian sigma (support is truncated at 3 sigma).
    """
    d = domain.dimension
    ext = np.asarray(domain.extent)
    if center is None:
        center = ext / 2.0
    center = np.asarray(center, dtype=float)
    if width is None:
        width = float(min(domain.extent)) / 8.0
    radius = 3.0 * width
    if domain.kind == BOX:
        if np.any(center - radius < 0) or np.any(center + radius > ext):
            raise ParameterError("bump support must lie inside the box")
    elif radius > min(domain.extent) / 2.0:
        raise ParameterError("bump support must fit inside a half-period of the torus")
    if amplitude <= 0:
        raise ParameterError("bump amplitude must be positive")

    base = 1.0 / domain.volume
    b = amplitude * base
    mass = b * _truncated_gaussian_mass(d, width, radius)
    a = (1.0 - mass) / domain.volume
    if a <= 0:
        raise ParameterError("bump too heavy: background level would be nonpositive")

    def _eval(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return a + b * _bump_profile(domain, center, width, radius, pts)

    sup = a + b * (1.0 - math.exp(-radius**2 / (2 * width**2)))
    return DensityField(
        _eval, a, sup, label="bump",
        params={"center": tuple(center), "amplitude": amplitude, "width": width},
    )


def two_bump_density(domain: Domain, centers=None, amplitudes=(0.5, 0.5),
                     width: float | None = None) -> DensityField:
    """Uniform background plus two disjoint truncated-Gaussian bumps."""
    d = domain.dimension
    ext = np.asarray(domain.extent)
    if width is None:
        width = float(min(domain.extent)) / 12.0
    radius = 3.0 * width
    if centers is None:
        centers = (ext * 0.25, ext * 0.75)
    centers = [np.asarray(c, dtype=float) for c in centers]
    if len(centers) != 2 or len(amplitudes) != 2:
        raise ParameterError("two-bump mixture needs exactly two centers and amplitudes")
    sep = base_distance(domain, centers[0], centers[1])
    if sep < 2 * radius:
        raise ParameterError("bump supports overlap; sup bound would not be analytic")

    base = 1.0 / domain.volume
    heights = [float(amp) * base for amp in amplitudes]
    if any(h <= 0 for h in heights):
        raise ParameterError("bump amplitudes must be positive")
    mass = sum(h * _truncated_gaussian_mass(d, width, radius) for h in heights)
    a = (1.0 - mass) / domain.volume
    if a <= 0:
        raise ParameterError("bumps too heavy: background level would be nonpositive")

    def _eval(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.full(len(pts), a)
        for c, h in zip(centers, heights):
            out += h * _bump_profile(domain, c, width, radius, pts)
        return out

    peak = 1.0 - math.exp(-radius**2 / (2 * width**2))
    sup = a + max(heights) * peak
    return DensityField(
        _eval, a, sup, label="two_bump",
        params={"centers": [tuple(c) for c in centers],
                "amplitudes": tuple(float(x) for x in amplitudes), "width": width},
    )


def density_from_spec(domain: Domain, spec: dict) -> DensityField:
    """Build a built-in density from a JSON-style description.

    ``spec["kind"]`` selects uniform / bump / two_bump; remaining keys are the
    builder's keyword arguments.  Used by the CLI config loader and by
    parallel workers, which reconstruct densities instead of pickling them.
    """
    spec = dict(spec)
    kind = spec.pop("kind", None)
    builders = {"uniform": uniform_density, "bump": bump_density,
                "two_bump": two_bump_density}
    if kind not in builders:
        raise ParameterError(f"unknown density kind {kind!r}; expected one of {sorted(builders)}")
    for key in ("center",):
        if key in spec and spec[key] is not None:
            spec[key] = np.asarray(spec[key], dtype=float)
    if "centers" in spec and spec["centers"] is not None:
        spec["centers"] = [np.asarray(c, dtype=float) for c in spec["centers"]]
    try:
        return builders[kind](domain, **spec)
    except TypeError as exc:
        raise ParameterError(f"bad arguments for density kind {kind!r}: {exc}")


def domain_from_spec(spec: dict) -> Domain:
    """Build a domain from a JSON-style description ({kind, d, side} or {kind, extent})."""
    kind = spec.get("kind")
    if kind not in (BOX, TORUS):
        raise DomainError(f"unknown domain kind {kind!r}")
    if "extent" in spec:
        try:
            extent = tuple(float(s) for s in spec["extent"])
        except (TypeError, ValueError):
            raise DomainError(f"extent must be a sequence of numbers, got {spec['extent']!r}")
    elif "d" in spec:
        d = int(spec["d"])
        side = float(spec.get("side", 1.0))
        extent = (side,) * d
    else:
        raise DomainError("domain spec needs either 'extent' or 'd'")
    return Domain(kind, extent)


def unit_ball_volume(d: int) -> float:
    return math.pi ** (d / 2.0) / float(gamma(d / 2.0 + 1.0))


def anchor_margin_ok(domain: Domain, *points, margin: float = DEFAULT_ANCHOR_MARGIN) -> bool:
    """True if anchors keep the configured margin from a box boundary.

    A torus has no boundary, so every interior point qualifies.
    """
    if domain.kind == TORUS:
        return all(domain.contains(np.asarray(p, dtype=float))[0] for p in points)
    gap = margin * min(domain.extent)
    ext = np.asarray(domain.extent)
    for p in points:
        p = np.asarray(p, dtype=float)
        if np.any(p < gap) or np.any(p > ext - gap):
            return False
    return True
