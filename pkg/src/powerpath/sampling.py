"""Random point-cloud generation: i.i.d. samples, Poisson processes, thinning.

All generators are pure functions of (seed, parameters); identical inputs
reproduce identical clouds bit-for-bit.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import rng
from .errors import DensityContractError, DomainError, ParameterError, UnsupportedDomainError
from .geometry import BOX, TORUS, DensityField, Domain

_REJECTION_BATCH = 4096


@dataclass(frozen=True)
class PointCloud:
    """Ordered finite point set with the RNG provenance that produced it."""

    points: np.ndarray           # (n, d), read-only
    domain: Domain
    seed: int
    generator_tag: str           # "iid" | "poisson" | "thinned"

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, copy=True)
        pts = pts.reshape(-1, self.domain.dimension)
        if pts.size and not np.all(self.domain.contains(pts)):
            raise DomainError("cloud contains points outside the domain extent")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return len(self.points)

    def replace_points(self, pts: np.ndarray, tag: str | None = None) -> "PointCloud":
        return PointCloud(pts, self.domain, self.seed, tag or self.generator_tag)


@dataclass(frozen=True)
class Tube:
    """Union of radius-b balls along the closed segment [x, y] (Euclidean only)."""

    x: np.ndarray
    y: np.ndarray
    b: float

    def __post_init__(self):
        if self.b <= 0:
            raise ParameterError(f"tube radius must be positive, got {self.b}")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))


def segment_distances(x: np.ndarray, y: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Euclidean distance of each point to the closed segment [x, y]."""
    pts = np.atleast_2d(pts)
    axis = y - x
    denom = float(axis @ axis)
    if denom == 0.0:
        return np.linalg.norm(pts - x, axis=1)
    s = np.clip((pts - x) @ axis / denom, 0.0, 1.0)
    foot = x + s[:, None] * axis
    return np.linalg.norm(pts - foot, axis=1)


def sample_iid(f: DensityField, domain: Domain, n: int, seed: int, *,
               stream_index: int = 0) -> PointCloud:
    """Draw n i.i.d. points from f by rejection against the uniform proposal.

    The envelope is the declared sup bound; observing f above it is a
    contract violation.
    """
    if n < 0:
        raise ParameterError(f"sample count must be >= 0, got {n}")
    gen = rng.stream(seed, 0, stream_index)
    ext = np.asarray(domain.extent)
    envelope = f.sup_bound
    accepted = []
    remaining = n
    while remaining > 0:
        m = max(_REJECTION_BATCH, 2 * remaining)
        props = gen.random((m, domain.dimension)) * ext
        vals = f(props)
        if np.any(vals > envelope * (1 + 1e-12)):
            raise DensityContractError("observed density above declared sup bound during sampling")
        if np.any(vals < f.inf_bound * (1 - 1e-12)):
            raise DensityContractError("observed density below declared inf bound during sampling")
        keep = gen.random(m) * envelope < vals
        accepted.append(props[keep][:remaining])
        remaining -= len(accepted[-1])
    pts = np.concatenate(accepted) if accepted else np.empty((0, domain.dimension))
    return PointCloud(pts, domain, seed, "iid")


def sample_poisson(lam: float, region, seed: int, *, stream_index: int = 0) -> PointCloud:
    """Homogeneous Poisson process of intensity lam on a domain or a tube.

    On a tube the process is realized by restriction of a Poisson process on
    the bounding box, which leaves the law on the tube unchanged.
    """
    if lam <= 0:
        raise ParameterError(f"intensity must be positive, got {lam}")
    gen = rng.stream(seed, 1, stream_index)
    if isinstance(region, Domain):
        n = int(gen.poisson(lam * region.volume))
        pts = gen.random((n, region.dimension)) * np.asarray(region.extent)
        return PointCloud(pts, region, seed, "poisson")
    if isinstance(region, Tube):
        x, y, b = region.x, region.y, region.b
        lo = np.minimum(x, y) - b
        hi = np.maximum(x, y) + b
        side = hi - lo
        vol = float(np.prod(side))
        n = int(gen.poisson(lam * vol))
        props = lo + gen.random((n, len(x))) * side
        keep = segment_distances(x, y, props) < b if n else np.zeros(0, bool)
        pts = props[keep] - lo
        box = Domain(BOX, tuple(side))
        return PointCloud(pts, box, seed, "poisson")
    raise ParameterError(f"unsupported region type {type(region).__name__}")


def thin(cloud: PointCloud, f: DensityField, floor: float, seed: int, *,
         stream_index: int = 0) -> PointCloud:
    """Keep each point independently with probability floor / f(X_i).

    Applied to an i.i.d.-f cloud this yields a uniform-intensity cloud with a
    random count.
    """
    if len(cloud) == 0:
        return cloud.replace_points(cloud.points, "thinned")
    vals = f(cloud.points)
    if np.any(vals < floor * (1 - 1e-12)):
        raise DensityContractError("thinning floor exceeds observed density")
    gen = rng.stream(seed, 2, stream_index)
    keep = gen.random(len(cloud)) < floor / vals
    return cloud.replace_points(cloud.points[keep], "thinned")


def tube_restrict(cloud: PointCloud, x, y, b: float) -> PointCloud:
    """Retain exactly the points at distance < b from the closed segment [x, y]."""
    if cloud.domain.kind == TORUS:
        raise UnsupportedDomainError("tube restriction is defined for Euclidean domains only")
    if b <= 0:
        raise ParameterError(f"tube radius must be positive, got {b}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(cloud) == 0:
        return cloud
    keep = segment_distances(x, y, cloud.points) < b
    return cloud.replace_points(cloud.points[keep])


# ---------------------------------------------------------------------------
# CSV round trip: "# d=<d> domain=<kind> seed=<seed>" header, 17 significant
# digits per coordinate so binary64 values survive exactly.
# ---------------------------------------------------------------------------

def cloud_to_csv(cloud: PointCloud) -> str:
    buf = io.StringIO()
    buf.write(f"# d={cloud.domain.dimension} domain={cloud.domain.kind} seed={cloud.seed}\n")
    for row in cloud.points:
        buf.write(",".join(format(v, ".17g") for v in row) + "\n")
    return buf.getvalue()


def cloud_from_csv(text: str, domain: Domain, generator_tag: str = "iid") -> PointCloud:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ParameterError("missing cloud CSV header")
    header = dict(kv.split("=") for kv in lines[0].lstrip("# ").split())
    if int(header["d"]) != domain.dimension or header["domain"] != domain.kind:
        raise DomainError("cloud CSV header does not match the supplied domain")
    pts = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if pts.size == 0:
        pts = np.empty((0, domain.dimension))
    return PointCloud(pts, domain, int(header["seed"]), generator_tag)
