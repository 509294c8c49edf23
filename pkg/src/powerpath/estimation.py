"""Monte-Carlo estimators and diagnostics for the path-length limit.

Estimates the universal constant C(d, p) from tube-restricted Poisson paths,
runs the finite-n convergence experiment against the Eikonal distance, and
provides the supporting diagnostics: subadditivity of tube means, cardinality
scaling, branching-process generation means, and link-length tail frequency.

Every estimator is a pure function of (seed, config): trials draw from
disjoint counter-based streams and are aggregated in trial-index order, so
serial and parallel runs agree exactly.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng
from .errors import ExplosionError, ParameterError
from .geometry import (BOX, ConformalParams, DensityField, Domain, base_distance,
                       density_from_spec, unit_ball_volume)
from .geodesic import GeodesicEstimate, dist_p
from .pathengine import PRUNED, PathQuery, path_link_stats, shortest_path_pruned
from .sampling import Tube, sample_iid, sample_poisson

# record kinds
CDP = "cdp"
MEAN_CURVE_POINT = "mean_curve_point"
CARDINALITY_SLOPE = "cardinality_slope"
GW_GEN_MEAN = "gw_gen_mean"
TAIL_FREQ = "tail_freq"
CONVERGENCE_RATIO = "convergence_ratio"
THETA_VOLUME = "theta_volume"

GW_POPULATION_CAP = 10**6


@dataclass(frozen=True)
class EstimateRecord:
    quantity: str
    value: float
    stderr: float
    trials: int
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.trials < 2:
            raise ParameterError(f"records need >= 2 trials, got {self.trials}")

    def to_json_dict(self) -> dict:
        return {"quantity": self.quantity, "value": self.value,
                "stderr": self.stderr, "trials": self.trials, "params": self.params}


@dataclass(frozen=True)
class TubeEstimatorConfig:
    """Schedule for the tube-restricted Poisson estimator of C(d, p).

    Tube radius follows b_t = t**b_exponent; any rule with b_t -> infinity is
    admissible, so the exponent must be positive.
    """

    d: int
    p: float
    t_schedule: tuple[float, ...]
    trials: int
    b_exponent: float = 0.5
    lam: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "t_schedule", tuple(float(t) for t in self.t_schedule))
        if any(t <= 0 for t in self.t_schedule):
            raise ParameterError("segment lengths must be positive")
        if any(b >= a for a, b in zip(self.t_schedule[1:], self.t_schedule)):
            raise ParameterError("t_schedule must be strictly increasing")
        if self.b_exponent <= 0:
            raise ParameterError("tube radius rule must diverge (b_exponent > 0)")
        if self.lam <= 0:
            raise ParameterError("intensity must be positive")
        if self.trials < 2:
            raise ParameterError("need at least 2 trials")

    def b_of_t(self, t: float) -> float:
        return float(t) ** self.b_exponent


def _mean_stderr(values: np.ndarray) -> tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(len(values)))


def map_trials(worker, args_list, threads: int = 1) -> list:
    """Run independent trials, serially or on a process pool.

    Results are returned in submission order either way, so the fold over
    them is deterministic.
    """
    if threads and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, args_list, chunksize=8))
    return [worker(a) for a in args_list]


# ---------------------------------------------------------------------------
# Tube-restricted Poisson estimator of C(d, p)
# ---------------------------------------------------------------------------

def _tube_trial_worker(args) -> tuple[float, float, float, int]:
    """One tube path: returns (length, first edge, last edge, point count)."""
    d, p, t, b, lam, seed, idx = args
    origin = np.full(d, b)
    endpoint = origin.copy()
    endpoint[0] += t
    cloud = sample_poisson(lam, Tube(origin, endpoint, b), seed, stream_index=idx)
    q = PathQuery(origin, endpoint, p, cloud, mode=PRUNED)
    res = shortest_path_pruned(q)
    seq = res.node_sequence
    pts = np.vstack([cloud.points.reshape(-1, d), origin[None], endpoint[None]])
    first = float(np.linalg.norm(pts[seq[1]] - pts[seq[0]])) if len(seq) > 1 else 0.0
    last = float(np.linalg.norm(pts[seq[-1]] - pts[seq[-2]])) if len(seq) > 1 else 0.0
    return res.length, first, last, len(cloud)


def _tube_batch(cfg: TubeEstimatorConfig, t: float, seed: int, salt: int,
                threads: int = 1):
    b = cfg.b_of_t(t)
    args = [(cfg.d, cfg.p, t, b, cfg.lam, seed, salt * cfg.trials + i)
            for i in range(cfg.trials)]
    out = map_trials(_tube_trial_worker, args, threads)
    lengths = np.array([o[0] for o in out])
    first = np.array([o[1] for o in out])
    last = np.array([o[2] for o in out])
    return lengths, first, last


def estimate_C(cfg: TubeEstimatorConfig, seed: int, *, threads: int = 1
               ) -> list[EstimateRecord]:
    """Per-t mean curve of L/t plus the C(d, p) summary record (last element).

    At p = 1 the direct edge is always optimal, so the estimate is exactly 1
    with zero variance, no sampling needed.
    """
    records = []
    base_params = {"d": cfg.d, "p": cfg.p, "lambda": cfg.lam,
                   "b_exponent": cfg.b_exponent, "seed": seed}
    if cfg.p == 1:
        for t in cfg.t_schedule:
            records.append(EstimateRecord(
                MEAN_CURVE_POINT, 1.0, 0.0, cfg.trials,
                {**base_params, "t": t, "b": cfg.b_of_t(t)}))
        records.append(EstimateRecord(
            CDP, 1.0, 0.0, cfg.trials,
            {**base_params, "t": cfg.t_schedule[-1], "extrapolated": 1.0}))
        return records

    means = []
    for salt, t in enumerate(cfg.t_schedule):
        lengths, _, _ = _tube_batch(cfg, t, seed, salt, threads)
        mean, se = _mean_stderr(lengths / t)
        means.append(mean)
        records.append(EstimateRecord(
            MEAN_CURVE_POINT, mean, se, cfg.trials,
            {**base_params, "t": t, "b": cfg.b_of_t(t),
             "pre_asymptotic": t < cfg.lam ** (-1.0 / cfg.d)}))

    # sharpen the conservative largest-t mean with a linear-in-1/t fit
    if len(cfg.t_schedule) >= 2:
        inv_t = np.array([1.0 / t for t in cfg.t_schedule])
        slope, intercept = np.polyfit(inv_t, np.array(means), 1)
    else:
        slope, intercept = 0.0, means[-1]
    last = records[-1]
    records.append(EstimateRecord(
        CDP, last.value, last.stderr, cfg.trials,
        {**base_params, "t": cfg.t_schedule[-1],
         "extrapolated": float(intercept), "fit_slope": float(slope)}))
    return records


def subadditivity_check(cfg: TubeEstimatorConfig, s: float, t: float, trials: int,
                        seed: int, *, threads: int = 1) -> EstimateRecord:
    """Tests m(s+t) <= m(s) + m(t) + pasting correction within sampling error.

    The correction is the empirical mean of (2^(p-1) - 1) (first + last edge)^p,
    the cost of joining the two sub-paths across the removed midpoint.
    The record value is m(s+t) - m(s) - m(t) - correction with combined stderr.
    """
    if s <= 0 or t <= 0:
        raise ParameterError("segment lengths must be positive")
    run = TubeEstimatorConfig(cfg.d, cfg.p, (min(s, t), max(s, t), s + t) if s != t
                              else (s, s + t), trials, cfg.b_exponent, cfg.lam)
    ls, _, last_s = _tube_batch(run, s, seed, 101, threads)
    lt, first_t, _ = _tube_batch(run, t, seed, 102, threads)
    lst, _, _ = _tube_batch(run, s + t, seed, 103, threads)

    m_s, se_s = _mean_stderr(ls)
    m_t, se_t = _mean_stderr(lt)
    m_st, se_st = _mean_stderr(lst)
    corr = (2.0 ** (cfg.p - 1) - 1.0) * (last_s + first_t) ** cfg.p
    m_corr, se_corr = _mean_stderr(corr)

    value = m_st - m_s - m_t - m_corr
    stderr = math.sqrt(se_s**2 + se_t**2 + se_st**2 + se_corr**2)
    return EstimateRecord(
        "subadditivity_gap", value, stderr, trials,
        {"d": cfg.d, "p": cfg.p, "s": s, "t": t, "lambda": cfg.lam,
         "b_exponent": cfg.b_exponent, "seed": seed,
         "m_s": m_s, "m_t": m_t, "m_s_plus_t": m_st, "correction": m_corr})


# ---------------------------------------------------------------------------
# Finite-n experiments on a domain
# ---------------------------------------------------------------------------

def _path_trial_worker(args) -> tuple[float, int, float]:
    """One i.i.d.-cloud shortest path: (length, cardinality, max edge)."""
    kind, extent, density_spec, p, n, x, y, seed, idx = args
    domain = Domain(kind, tuple(extent))
    f = density_from_spec(domain, density_spec)
    cloud = sample_iid(f, domain, n, seed, stream_index=idx)
    res = shortest_path_pruned(PathQuery(np.asarray(x), np.asarray(y), p, cloud,
                                         mode=PRUNED))
    return res.length, res.cardinality, res.max_edge


def _path_batch(domain: Domain, density_spec: dict, p: float, n: int, x, y,
                trials: int, seed: int, salt: int, threads: int = 1):
    args = [(domain.kind, domain.extent, density_spec, p, n,
             tuple(map(float, x)), tuple(map(float, y)), seed,
             salt * trials + i) for i in range(trials)]
    out = map_trials(_path_trial_worker, args, threads)
    lengths = np.array([o[0] for o in out])
    cards = np.array([o[1] for o in out])
    max_edges = np.array([o[2] for o in out])
    return lengths, cards, max_edges


def convergence_experiment(domain: Domain, density_spec: dict,
                           params: ConformalParams, n_schedule, anchor_pairs,
                           trials: int, seed: int, *, resolution: int = 256,
                           threads: int = 1) -> list[EstimateRecord]:
    """Ratio n^((p-1)/d) L_n / dist_p per (n, anchor pair): mean, stderr, median.

    dist_p is computed once per anchor pair by the Eikonal module; its
    refinement warning propagates into the record as a quality flag.
    """
    f = density_from_spec(domain, density_spec)
    n_schedule = [int(n) for n in n_schedule]
    dists: list[GeodesicEstimate] = []
    for x, y in anchor_pairs:
        dists.append(dist_p(domain, f, params, x, y, resolution))

    records = []
    salt = 0
    for n in n_schedule:
        for j, (x, y) in enumerate(anchor_pairs):
            dp = dists[j]
            lengths, _, _ = _path_batch(domain, density_spec, params.p, n, x, y,
                                        trials, seed, salt, threads)
            salt += 1
            ratios = n ** ((params.p - 1.0) / params.d) * lengths / dp.value
            mean, se = _mean_stderr(ratios)
            records.append(EstimateRecord(
                CONVERGENCE_RATIO, mean, se, trials,
                {"d": params.d, "p": params.p, "n": n, "pair": j,
                 "x": tuple(map(float, x)), "y": tuple(map(float, y)),
                 "dist_p": dp.value, "dist_p_error": dp.error_estimate,
                 "dist_p_warning": dp.refinement_warning,
                 "median": float(np.median(ratios)),
                 "density": density_spec.get("kind", "custom"), "seed": seed}))
    return records


def cardinality_scaling(domain: Domain, density_spec: dict, params: ConformalParams,
                        n_schedule, anchor_pair, trials: int, seed: int, *,
                        threads: int = 1) -> EstimateRecord:
    """Normalized path cardinality #L / ((n f)^(1/d) |x-y|) across the n schedule.

    Reports the max (the empirical bound constant), the 99th percentile, and
    the OLS trend slope of the normalized value against log10(n).
    """
    f = density_from_spec(domain, density_spec)
    if not f.is_constant:
        raise ParameterError("cardinality scaling assumes a uniform density")
    x, y = anchor_pair
    sep = base_distance(domain, x, y)
    fval = f.inf_bound
    all_logn, all_norm = [], []
    per_n = {}
    for salt, n in enumerate(int(v) for v in n_schedule):
        _, cards, _ = _path_batch(domain, density_spec, params.p, n, x, y,
                                  trials, seed, 1000 + salt, threads)
        norm = cards / ((n * fval) ** (1.0 / params.d) * sep)
        per_n[n] = _mean_stderr(norm)
        all_logn.extend([math.log10(n)] * trials)
        all_norm.extend(norm.tolist())

    slope, slope_se = _ols_slope(np.array(all_logn), np.array(all_norm))
    norm_arr = np.array(all_norm)
    return EstimateRecord(
        CARDINALITY_SLOPE, slope, slope_se, len(all_norm),
        {"d": params.d, "p": params.p, "n_schedule": [int(v) for v in n_schedule],
         "x": tuple(map(float, x)), "y": tuple(map(float, y)), "seed": seed,
         "max_normalized": float(norm_arr.max()),
         "q99_normalized": float(np.quantile(norm_arr, 0.99)),
         "per_n_mean": {str(k): v[0] for k, v in per_n.items()}})


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ y) / sxx
    resid = y - y.mean() - slope * xc
    dof = len(x) - 2
    se = math.sqrt(float(resid @ resid) / dof / sxx)
    return slope, se


def link_tail_frequency(domain: Domain, density_spec: dict, params: ConformalParams,
                        n: int, threshold_factor: float, trials: int, seed: int,
                        anchor_pair=None, *, threads: int = 1) -> EstimateRecord:
    """Frequency of a path link exceeding factor * (n f_m)^((alpha-1)/d)."""
    f = density_from_spec(domain, density_spec)
    if anchor_pair is None:
        anchor_pair = default_anchor_pair(domain)
    x, y = anchor_pair
    _, _, max_edges = _path_batch(domain, density_spec, params.p, n, x, y,
                                  trials, seed, 2000, threads)
    threshold = threshold_factor * (n * f.inf_bound) ** ((params.alpha - 1.0) / params.d)
    freq = float(np.mean(max_edges > threshold))
    se = math.sqrt(freq * (1 - freq) / trials)
    return EstimateRecord(
        TAIL_FREQ, freq, se, trials,
        {"d": params.d, "p": params.p, "n": n, "threshold_factor": threshold_factor,
         "threshold": threshold, "x": tuple(map(float, x)),
         "y": tuple(map(float, y)), "seed": seed})


def default_anchor_pair(domain: Domain) -> tuple[np.ndarray, np.ndarray]:
    """Anchors well inside the domain (25% margin in a box; half-period on a torus)."""
    ext = np.asarray(domain.extent)
    if domain.kind == BOX:
        return ext * 0.3, ext * 0.7
    return ext * 0.25, ext * 0.75


# ---------------------------------------------------------------------------
# Galton-Watson generation means
# ---------------------------------------------------------------------------

def gw_analytic_bound(lam: float, r0: float, params: ConformalParams, gen: int) -> float:
    """(lam V_d r0^(d/p))^n Gamma(1 + d/p)^n / Gamma(1 + n d/p) for generation n."""
    d, p = params.d, params.p
    vd = unit_ball_volume(d)
    if r0 == 0:
        return 0.0
    log_val = gen * (math.log(lam * vd) + (d / p) * math.log(r0)) \
        + gen * math.lgamma(1 + d / p) - math.lgamma(1 + gen * d / p)
    return math.exp(log_val)


def gw_generation_mean(lam: float, r0: float, params: ConformalParams, n_gen: int,
                       trials: int, seed: int, *,
                       cap: int = GW_POPULATION_CAP) -> list[EstimateRecord]:
    """Simulated generation sizes of the budgeted branching exploration.

    Each node with remaining power-weighted budget r spawns a Poisson number
    of children in the ball of radius r^(1/p); a child at edge distance e
    inherits budget r - e^p.  Only radial distances matter for the counts.
    """
    if lam <= 0:
        raise ParameterError("intensity must be positive")
    if r0 < 0:
        raise ParameterError("root budget must be nonnegative")
    if n_gen < 1:
        raise ParameterError("need at least one generation")
    d, p = params.d, params.p
    vd = unit_ball_volume(d)
    sizes = np.zeros((trials, n_gen), dtype=np.int64)
    for trial in range(trials):
        gen_rng = rng.stream(seed, 3, trial)
        budgets = np.array([r0], dtype=float)
        for g in range(n_gen):
            counts = gen_rng.poisson(lam * vd * budgets ** (d / p))
            total = int(counts.sum())
            if total > cap:
                raise ExplosionError(g + 1, total, cap)
            sizes[trial, g] = total
            if total == 0:
                break
            parent = np.repeat(budgets, counts)
            u = gen_rng.random(total)
            budgets = parent * (1.0 - u ** (p / d))
    records = []
    for g in range(n_gen):
        mean, se = _mean_stderr(sizes[:, g])
        records.append(EstimateRecord(
            GW_GEN_MEAN, mean, se, trials,
            {"d": d, "p": p, "lambda": lam, "r0": r0, "generation": g + 1,
             "analytic_bound": gw_analytic_bound(lam, r0, params, g + 1),
             "seed": seed}))
    return records


# ---------------------------------------------------------------------------
# Domination-region volume probe
# ---------------------------------------------------------------------------

def theta_region_volume(p: float, d: int, separation: float, samples: int,
                        seed: int) -> EstimateRecord:
    """Monte-Carlo volume of {w : |uw|^p + |wv|^p < |uv|^p} at given separation.

    The region is contained in the lens B(u, s) intersect B(v, s), so the
    sampling box [0, s] x [-s, s]^(d-1) (u at the origin, v at s e1) covers it.
    """
    if separation <= 0:
        raise ParameterError("separation must be positive")
    gen = rng.stream(seed, 4)
    s = separation
    lo = np.array([0.0] + [-s] * (d - 1))
    hi = np.array([s] * d)
    box_vol = float(np.prod(hi - lo))
    pts = lo + gen.random((samples, d)) * (hi - lo)
    du = np.linalg.norm(pts, axis=1)
    v = np.zeros(d)
    v[0] = s
    dv = np.linalg.norm(pts - v, axis=1)
    inside = du**p + dv**p < s**p
    frac = float(inside.mean())
    se = box_vol * math.sqrt(frac * (1 - frac) / samples)
    return EstimateRecord(
        THETA_VOLUME, box_vol * frac, se, samples,
        {"d": d, "p": p, "separation": separation, "seed": seed})


# ---------------------------------------------------------------------------
# Record export
# ---------------------------------------------------------------------------

def records_to_csv(records: list[EstimateRecord]) -> str:
    lines = ["quantity,value,stderr,trials,params"]
    for r in records:
        blob = json.dumps(r.params, sort_keys=True, default=_json_fallback)
        lines.append(f'{r.quantity},{r.value:.17g},{r.stderr:.17g},{r.trials},"{blob.replace(chr(34), chr(34) * 2)}"')
    return "\n".join(lines) + "\n"


def records_to_jsonl(records: list[EstimateRecord]) -> str:
    return "".join(json.dumps(r.to_json_dict(), sort_keys=True,
                              default=_json_fallback) + "\n" for r in records)


def _json_fallback(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def record_filename(quantity: str, d: int, p: float, seed: int, ext: str = "csv") -> str:
    return f"{quantity}_{d}_{p:g}_{seed}.{ext}"
