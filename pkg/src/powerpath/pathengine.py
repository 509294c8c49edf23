"""Exact power-weighted shortest paths through a point cloud plus anchors.

Two modes compute the same quantity:

* exact - Dijkstra over the complete graph on cloud + anchors, the O(n^2)
  reference (capped at 5000 cloud points).
* pruned - Dijkstra restricted to edges shorter than a radius r taken from a
  growing schedule, with a certificate: any path using an excluded edge
  (base length > r) costs at least r^p from that edge alone, so once the
  tentative answer L satisfies L <= r^p no excluded edge can improve it and
  the restricted answer is globally optimal.  If certification keeps failing
  the radius reaches the domain diameter, where the graph is complete and the
  result is exact by construction.

Vertex convention: cloud points are 0..n-1, the anchor x is n, the anchor y
is n+1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra as _sparse_dijkstra
from scipy.spatial import cKDTree

from .errors import ParameterError
from .geometry import TORUS, ConformalParams, Domain
from .sampling import PointCloud

EXACT_MODE_CAP = 5000
DEFAULT_RADIUS_FACTOR = 2.0

EXACT = "exact"
PRUNED = "pruned"

CERT_EXACT = "exact_mode"
CERT_VERIFIED = "pruned_verified"
CERT_UNVERIFIED = "pruned_unverified"


@dataclass(frozen=True)
class PathQuery:
    x: np.ndarray
    y: np.ndarray
    p: float
    cloud: PointCloud
    mode: str = EXACT
    prune_radius_schedule: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ParameterError(f"power must be >= 1, got {self.p}")
        if self.mode not in (EXACT, PRUNED):
            raise ParameterError(f"unknown mode {self.mode!r}")
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        self.cloud.domain.require_inside(self.x, self.y)


@dataclass(frozen=True)
class PathResult:
    length: float
    node_sequence: tuple[int, ...]
    cardinality: int
    max_edge: float
    certificate: str
    nodes: np.ndarray            # (#L, d) coordinates along the path
    radius: float | None = None  # last pruning radius (pruned mode only)
    attempts: int = 1            # number of radius expansions tried
    hit_diameter_fallback: bool = False

    def to_json_dict(self) -> dict:
        return {
            "length": self.length,
            "cardinality": self.cardinality,
            "max_edge": self.max_edge,
            "certificate": self.certificate,
            "nodes": [list(map(float, row)) for row in self.nodes],
        }


def _stack_vertices(q: PathQuery) -> np.ndarray:
    return np.vstack([q.cloud.points.reshape(-1, q.cloud.domain.dimension),
                      q.x[None, :], q.y[None, :]])


def _row_base_distances(pts: np.ndarray, u: int, domain: Domain) -> np.ndarray:
    delta = pts - pts[u]
    if domain.kind == TORUS:
        ext = np.asarray(domain.extent)
        delta = np.remainder(delta + ext / 2.0, ext) - ext / 2.0
    return np.sqrt(np.einsum("ij,ij->i", delta, delta))


def _pair_base_distances(pts: np.ndarray, i: np.ndarray, j: np.ndarray,
                         domain: Domain) -> np.ndarray:
    delta = pts[i] - pts[j]
    if domain.kind == TORUS:
        ext = np.asarray(domain.extent)
        delta = np.remainder(delta + ext / 2.0, ext) - ext / 2.0
    return np.sqrt(np.einsum("ij,ij->i", delta, delta))


def _finish(q: PathQuery, pts: np.ndarray, sequence: list[int], certificate: str,
            **extra) -> PathResult:
    """Recompute length as an ordered fold along the path.

    Both modes share this accumulation, so identical node sequences yield
    bit-identical lengths.
    """
    domain = q.cloud.domain
    edges = _pair_base_distances(pts, np.asarray(sequence[:-1]), np.asarray(sequence[1:]),
                                 domain) if len(sequence) > 1 else np.zeros(0)
    total = 0.0
    for e in edges:
        total += float(e) ** q.p
    return PathResult(
        length=total,
        node_sequence=tuple(sequence),
        cardinality=len(sequence),
        max_edge=float(edges.max()) if len(edges) else 0.0,
        certificate=certificate,
        nodes=pts[np.asarray(sequence)],
        **extra,
    )


def shortest_path_exact(q: PathQuery) -> PathResult:
    """Globally optimal path over the complete graph, deterministic tie-breaking.

    Ties in length prefer fewer hops, then the smaller predecessor index.
    """
    n = len(q.cloud)
    if n > EXACT_MODE_CAP:
        raise ParameterError(
            f"exact mode capped at {EXACT_MODE_CAP} cloud points (got {n}); use pruned mode"
        )
    pts = _stack_vertices(q)
    domain = q.cloud.domain
    m = len(pts)
    start, target = n, n + 1

    dist = np.full(m, np.inf)
    hops = np.full(m, np.iinfo(np.int64).max, dtype=np.int64)
    pred = np.full(m, -1, dtype=np.int64)
    settled = np.zeros(m, dtype=bool)
    dist[start] = 0.0
    hops[start] = 0

    while True:
        masked = np.where(settled, np.inf, dist)
        u = int(np.argmin(masked))
        if not np.isfinite(masked[u]):
            break
        ties = np.flatnonzero(masked == masked[u])
        if len(ties) > 1:
            u = int(min(ties, key=lambda v: (hops[v], v)))
        if u == target:
            break
        settled[u] = True
        w = _row_base_distances(pts, u, domain) ** q.p
        nd = dist[u] + w
        live = ~settled
        better = live & (nd < dist)
        equal = live & (nd == dist) & (
            (hops[u] + 1 < hops) | ((hops[u] + 1 == hops) & (u < pred))
        )
        upd = better | equal
        dist[upd] = nd[upd]
        hops[upd] = hops[u] + 1
        pred[upd] = u

    sequence = _backtrack(pred, start, target)
    return _finish(q, pts, sequence, CERT_EXACT)


def _backtrack(pred: np.ndarray, start: int, target: int) -> list[int]:
    seq = [target]
    v = target
    while v != start:
        v = int(pred[v])
        if v < 0:
            raise ParameterError("target unreachable; graph construction is broken")
        seq.append(v)
    seq.reverse()
    return seq


def dominated(u, v, w, p: float, domain: Domain) -> bool:
    """True iff the two-hop path u -> w -> v strictly beats the direct edge (u, v).

    Such an edge can never lie on any shortest path.
    """
    if p < 1:
        raise ParameterError(f"power must be >= 1, got {p}")
    pts = np.vstack([np.asarray(u, float), np.asarray(v, float), np.asarray(w, float)])
    duw = _pair_base_distances(pts, np.array([0]), np.array([2]), domain)[0]
    dwv = _pair_base_distances(pts, np.array([2]), np.array([1]), domain)[0]
    duv = _pair_base_distances(pts, np.array([0]), np.array([1]), domain)[0]
    return duw**p + dwv**p - duv**p < 0


def dominated_edge_mask(pts: np.ndarray, p: float, domain: Domain,
                        chunk: int = 64) -> np.ndarray:
    """Boolean (m, m) mask of edges beaten by some two-hop detour through pts."""
    m = len(pts)
    powmat = np.empty((m, m))
    for u in range(m):
        powmat[u] = _row_base_distances(pts, u, domain) ** p
    mask = np.zeros((m, m), dtype=bool)
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        # two_hop[a, b] = min_w powmat[a, w] + powmat[w, b]
        two_hop = (powmat[lo:hi, :, None] + powmat[None, :, :]).min(axis=1)
        mask[lo:hi] = two_hop < powmat[lo:hi]
    np.fill_diagonal(mask, False)
    return mask


def default_initial_radius(q: PathQuery, radius_factor: float = DEFAULT_RADIUS_FACTOR) -> float:
    """Starting radius c_r * intensity^((alpha-1)/d) with intensity n / vol."""
    n = len(q.cloud)
    domain = q.cloud.domain
    if n == 0:
        return float(np.linalg.norm(domain.displacement(q.x, q.y)))
    d = domain.dimension
    alpha = 1.0 / (d + 2.0 * q.p)
    intensity = n / domain.volume
    return radius_factor * intensity ** ((alpha - 1.0) / d)


def shortest_path_pruned(q: PathQuery, *, radius_factor: float = DEFAULT_RADIUS_FACTOR,
                         tree: cKDTree | None = None) -> PathResult:
    """Radius-restricted Dijkstra with verified expansion.

    Grows the candidate radius until the certificate L <= r^p holds (any path
    through an excluded edge costs at least r^p), jumping straight to the
    certifying radius once a finite tentative length is known.  Always returns
    the same length as exact mode.
    """
    pts = _stack_vertices(q)
    domain = q.cloud.domain
    m = len(pts)
    n = len(q.cloud)
    start, target = n, n + 1
    diameter = domain.diameter * (1 + 1e-12)

    if tree is None:
        boxsize = domain.extent if domain.kind == TORUS else None
        tree = cKDTree(pts, boxsize=boxsize)

    if q.prune_radius_schedule is not None:
        schedule = [float(r) for r in q.prune_radius_schedule]
        auto = False
    else:
        schedule = [min(default_initial_radius(q, radius_factor), diameter)]
        auto = True

    attempts = 0
    best = None
    r = schedule[0]
    while True:
        attempts += 1
        dist_row, pred_row = _restricted_dijkstra(tree, pts, domain, q.p, r, m, start)
        lhat = dist_row[target]
        reached = np.isfinite(lhat)
        complete = r >= diameter
        certified = reached and lhat <= r ** q.p
        if reached:
            best = (r, pred_row)
        if certified or complete:
            cert = CERT_EXACT if complete and not certified else CERT_VERIFIED
            sequence = _backtrack(pred_row, start, target)
            return _finish(q, pts, sequence, cert, radius=r, attempts=attempts,
                           hit_diameter_fallback=complete and not certified)
        if auto:
            if reached:
                # jump straight to the certifying radius; lhat > r^p here,
                # so this always grows r
                nxt = lhat ** (1.0 / q.p) * (1 + 1e-9)
            else:
                nxt = 2.0 * r
            r = min(nxt, diameter)
        else:
            if attempts < len(schedule):
                r = schedule[attempts]
            else:
                if best is None:
                    raise ParameterError(
                        "target unreachable within the supplied radius schedule"
                    )
                r, pred_row = best
                sequence = _backtrack(pred_row, start, target)
                return _finish(q, pts, sequence, CERT_UNVERIFIED, radius=r,
                               attempts=attempts)


def _restricted_dijkstra(tree: cKDTree, pts: np.ndarray, domain: Domain, p: float,
                         r: float, m: int, start: int):
    pairs = tree.query_pairs(r, output_type="ndarray")
    if len(pairs):
        d = _pair_base_distances(pts, pairs[:, 0], pairs[:, 1], domain)
        graph = csr_matrix((d ** p, (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    else:
        graph = csr_matrix((m, m))
    dist_row, pred_row = _sparse_dijkstra(
        graph, directed=False, indices=start, return_predecessors=True
    )
    return dist_row, pred_row


def shortest_path(q: PathQuery, **kwargs) -> PathResult:
    if q.mode == EXACT:
        return shortest_path_exact(q)
    return shortest_path_pruned(q, **kwargs)


@dataclass(frozen=True)
class LinkStats:
    """Longest path link versus the vanishing-link threshold (n f_m)^((alpha-1)/d)."""

    max_edge: float
    threshold: float
    exceeded: bool


def path_link_stats(result: PathResult, params: ConformalParams, n: int,
                    f_m: float) -> LinkStats:
    threshold = (n * f_m) ** ((params.alpha - 1.0) / params.d)
    return LinkStats(result.max_edge, threshold, result.max_edge > threshold)
