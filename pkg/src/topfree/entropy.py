"""Monte Carlo estimators for microstate volumes, Gaussian measures and covering numbers.

The normalized quantity reported for a microstate set Gamma in
(M_k^sa)^n is ``k^{-2} log vol(Gamma) + (n/2) log k``.  Two estimators
are provided:

* ball hit rate: sample the product of operator-norm balls of radius R
  uniformly and multiply the hit fraction by the exact ball volume;
* Gaussian importance: ``vol(Gamma) = E_gamma[1_Gamma exp((k/2) sum Tr A_j^2)] / c_k``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .linalg import MatrixTuple, hs_norm_batch, opnorm_batch
from .microstates import MicrostateSpec, membership_mask
from .ncpoly import NCPolynomial, poly_norm_batch
from .presets import semicircular
from .randmat import SamplerConfig, ball_array, gue_array, log_ball_volume, log_c_k

MAX_VOLUME_DIM = 12
MAX_VOLUME_PARAMS = 300
BATCH = 4096
LOW_ESS = 30.0
PINNING_DELTAS = (0.05, 0.1, 0.2)


def _finite(v: float):
    """JSON-friendly float: infinities and NaN become strings."""
    if math.isfinite(v):
        return v
    if math.isnan(v):
        return "nan"
    return "inf" if v > 0 else "-inf"


def _batches(samples: int, batch: int = BATCH) -> Iterable[tuple[int, int]]:
    for a in range(0, samples, batch):
        yield a, min(a + batch, samples)


def _check_volume_spec(spec: MicrostateSpec, enforce_limits: bool) -> None:
    if spec.m != 0:
        raise ValueError("volume estimators work on specs without presence variables (m = 0)")
    if enforce_limits and (spec.k > MAX_VOLUME_DIM or spec.n * spec.k**2 > MAX_VOLUME_PARAMS):
        raise ValueError(
            f"volume estimation is limited to k <= {MAX_VOLUME_DIM} and n k^2 <= {MAX_VOLUME_PARAMS} "
            f"(got n={spec.n}, k={spec.k}); pass enforce_limits=False to override"
        )


# ---------------------------------------------------------------------------
# Gaussian measure of microstate sets


@dataclass(frozen=True)
class GammaEstimate:
    probability: float
    std_error: float
    hits: int
    samples: int

    def __iter__(self):
        yield self.probability
        yield self.std_error


def estimate_gamma_measure(spec: MicrostateSpec, samples: int, seed: int, workers: int = 1) -> GammaEstimate:
    """Fraction of GUE tuples (density prop. to exp(-(k/2) sum Tr A_j^2)) inside the set."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    cfg = SamplerConfig(spec.k, spec.arity, seed)
    hits = 0
    for a, b in _batches(samples):
        hits += int(membership_mask(spec, gue_array(cfg, a, b, workers)).sum())
    p = hits / samples
    return GammaEstimate(p, math.sqrt(p * (1 - p) / samples), hits, samples)


# ---------------------------------------------------------------------------
# volumes


@dataclass(frozen=True)
class VolumeEstimate:
    k: int
    n: int
    raw_log_vol: float
    std_error: float
    samples_used: int
    hits: int
    estimator: str
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.samples_used < 1:
            raise ValueError("samples_used must be >= 1")

    @property
    def normalized(self) -> float:
        return self.raw_log_vol / self.k**2 + 0.5 * self.n * math.log(self.k)

    @property
    def normalized_std_error(self) -> float:
        return self.std_error / self.k**2

    def to_json(self) -> dict:
        d = asdict(self)
        d["flags"] = list(self.flags)
        d["normalized"] = self.normalized
        d["normalized_std_error"] = self.normalized_std_error
        return {key: _finite(v) if isinstance(v, float) else v for key, v in d.items()}


def contained_in_ball(spec: MicrostateSpec, R: float) -> bool:
    """True when coordinate constraints certify that the set lies in the radius-R ball."""
    bounds = spec.coordinate_bounds()
    return bounds is not None and bool(np.all(bounds <= R))


def estimate_volume_ball(
    spec: MicrostateSpec,
    R: float,
    samples: int,
    seed: int,
    workers: int = 1,
    enforce_limits: bool = True,
) -> VolumeEstimate:
    """``log vol`` from the hit fraction of uniform samples in ``B(k, R)^n``.

    When the constraints do not certify that the set lies inside the ball,
    the estimate is of the part inside the ball and carries the flag
    ``truncated_to_ball``.
    """
    _check_volume_spec(spec, enforce_limits)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    cfg = SamplerConfig(spec.k, spec.n, seed, "uniform_ball", R)
    hits = 0
    for a, b in _batches(samples):
        hits += int(membership_mask(spec, ball_array(cfg, a, b, workers)).sum())
    flags = [] if contained_in_ball(spec, R) else ["truncated_to_ball"]
    log_vball = log_ball_volume(spec.k, spec.n, R)
    if hits == 0:
        flags.append("zero_hits")
        return VolumeEstimate(spec.k, spec.n, -math.inf, math.inf, samples, 0, "ball_hit_rate", tuple(flags))
    p = hits / samples
    se = math.sqrt((1 - p) / (p * samples))
    return VolumeEstimate(spec.k, spec.n, math.log(p) + log_vball, se, samples, hits, "ball_hit_rate", tuple(flags))


def estimate_volume_gaussian(
    spec: MicrostateSpec,
    samples: int,
    seed: int,
    workers: int = 1,
    enforce_limits: bool = True,
) -> VolumeEstimate:
    """``log vol`` by importance weighting GUE samples with ``exp((k/2) sum Tr A_j^2) / c_k``.

    A spec without constraints is the whole space (+inf, flag ``unbounded``).
    If every sample is accepted the weights never see the boundary of the
    set and the estimate is reported as +inf with flag ``vacuous``.
    """
    _check_volume_spec(spec, enforce_limits)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    k, n = spec.k, spec.n
    if not spec.constraints:
        return VolumeEstimate(k, n, math.inf, math.inf, samples, samples, "gaussian_importance", ("unbounded",))
    cfg = SamplerConfig(k, n, seed)
    s_parts = []
    for a, b in _batches(samples):
        x = gue_array(cfg, a, b, workers)
        s_parts.append(0.5 * k * k * hs_norm_batch(x[membership_mask(spec, x)]) ** 2)
    s = np.concatenate(s_parts)
    hits = s.size
    flags: list[str] = []
    if spec.coordinate_bounds() is None:
        flags.append("uncertified_bound")
    if hits == 0:
        flags.append("zero_hits")
        return VolumeEstimate(k, n, -math.inf, math.inf, samples, 0, "gaussian_importance", tuple(flags))
    if hits == samples:
        flags.append("vacuous")
        return VolumeEstimate(k, n, math.inf, math.inf, samples, hits, "gaussian_importance", tuple(flags))
    smax = float(s.max())
    u = np.exp(s - smax)
    # mean and sd of W = 1_Gamma e^s over all samples, in units of e^smax
    mean = u.sum() / samples
    second = (u * u).sum() / samples
    var = max(second - mean * mean, 0.0) * samples / (samples - 1)
    se = math.sqrt(var / samples) / mean
    ess = u.sum() ** 2 / (u * u).sum()
    if ess < LOW_ESS:
        flags.append("low_ess")
    raw = smax + math.log(mean) - log_c_k(k, n)
    return VolumeEstimate(k, n, raw, se, samples, hits, "gaussian_importance", tuple(flags))


def semicircular_lower_bound(n: int, delta: float) -> float:
    """``(n/2) log 2 pi - (n/2)(1 + delta)^2``."""
    if n < 1 or delta < 0:
        raise ValueError("need n >= 1 and delta >= 0")
    return 0.5 * n * math.log(2.0 * math.pi) - 0.5 * n * (1.0 + delta) ** 2


# ---------------------------------------------------------------------------
# trace pinning and norm convergence


@dataclass(frozen=True)
class PinningReport:
    k: int
    n: int
    epsilon: float
    samples: int
    accepted: int
    fractions: dict[float, float]
    mean_trace_sq: float
    flags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "epsilon": self.epsilon,
            "samples": self.samples,
            "accepted": self.accepted,
            "fractions": {repr(d): _finite(f) for d, f in self.fractions.items()},
            "mean_trace_sq": _finite(self.mean_trace_sq),
            "flags": list(self.flags),
        }


def trace_pinning_check(
    k: int,
    epsilon: float,
    samples: int,
    seed: int,
    n: int = 1,
    deltas: Sequence[float] = PINNING_DELTAS,
    workers: int = 1,
) -> PinningReport:
    """How often ``k^{-1} Tr A_j^2`` lies in ``(1 - delta, 1 + delta)`` for every j,
    among GUE tuples accepted into the semicircular microstate set."""
    spec = semicircular(n, k=k, epsilon=epsilon)
    cfg = SamplerConfig(k, n, seed)
    tr = []
    for a, b in _batches(samples, 1024):
        x = gue_array(cfg, a, b, workers)
        x = x[membership_mask(spec, x)]
        tr.append(np.sum(np.abs(x) ** 2, axis=(-2, -1)) / k)
    t2 = np.concatenate(tr) if tr else np.zeros((0, n))
    acc = t2.shape[0]
    fr = {}
    for d in sorted(deltas):
        inside = np.all(np.abs(t2 - 1.0) < d, axis=-1)
        fr[float(d)] = float(inside.mean()) if acc else math.nan
    flags = () if acc else ("zero_hits",)
    mean = float(t2.mean()) if acc else math.nan
    return PinningReport(k, n, float(epsilon), samples, acc, fr, mean, flags)


@dataclass(frozen=True)
class NormConvergenceRow:
    k: int
    mean: float
    std: float
    abs_error: float | None


def ht_check(
    poly: NCPolynomial,
    dims: Sequence[int],
    trials: int,
    seed: int,
    reference: float | None = None,
    workers: int = 1,
) -> list[NormConvergenceRow]:
    """Mean operator norm of ``P(X_1..X_n)`` for independent GUE matrices at each k.

    For real linear P the limit is ``2 |c|``, which is used when
    ``reference`` is not given.
    """
    if reference is None:
        reference = linear_semicircular_norm(poly)
    rows = []
    for k in dims:
        x = gue_array(SamplerConfig(int(k), poly.arity, seed), 0, trials, workers)
        v = poly_norm_batch(poly, x)
        m = float(v.mean())
        rows.append(NormConvergenceRow(int(k), m, float(v.std(ddof=1)) if trials > 1 else 0.0,
                                       None if reference is None else abs(m - reference)))
    return rows


def linear_semicircular_norm(poly: NCPolynomial) -> float | None:
    """``2 |c|`` for ``P = sum c_j X_j`` with real c, else None."""
    c = []
    for w, v in poly:
        if len(w) != 1 or v.imag != 0:
            return None
        c.append(v.real)
    return 2.0 * math.sqrt(sum(t * t for t in c)) if c else None


# ---------------------------------------------------------------------------
# covering numbers


@dataclass(frozen=True)
class CoveringEstimate:
    k: int
    epsilon: float
    net_size: int
    metric: str
    centers: tuple[int, ...] = field(default=(), repr=False)

    def __post_init__(self) -> None:
        if self.net_size < 1:
            raise ValueError("net_size must be >= 1")

    @property
    def normalized(self) -> float:
        return math.log(self.net_size) / self.k**2


def _as_array(points) -> np.ndarray:
    if isinstance(points, np.ndarray):
        x = points
    else:
        x = np.stack([p.data if isinstance(p, MatrixTuple) else np.asarray(p) for p in points])
    if x.ndim != 4 or x.shape[0] == 0:
        raise ValueError("expected a nonempty stack of tuples (N, n, k, k)")
    return x


def _trace_lower_bound(d: np.ndarray) -> np.ndarray:
    # max_j sqrt(Tr A_j^2 / k) never exceeds max_j ||A_j||
    k = d.shape[-1]
    return np.sqrt(np.max(np.sum(np.abs(d) ** 2, axis=(-2, -1)), axis=-1) / k)


def distances_from(x: np.ndarray, c: np.ndarray, metric: str, cap: np.ndarray | None = None) -> np.ndarray:
    """Distances of every tuple in ``x`` to the tuple ``c``.

    With ``cap`` (uniform metric only) distances that certainly exceed
    ``cap`` are not computed exactly; ``cap`` is returned for them.
    """
    d = x - c
    if metric == "hs":
        return hs_norm_batch(d)
    if metric != "uniform":
        raise ValueError(f"unknown metric {metric!r}")
    if cap is None:
        return np.max(opnorm_batch(d), axis=-1)
    out = cap.copy()
    lb = _trace_lower_bound(d)
    idx = np.flatnonzero(lb < cap)
    if idx.size:
        out[idx] = np.max(opnorm_batch(d[idx]), axis=-1)
    return out


def greedy_net(points, epsilon: float, metric: str = "uniform") -> CoveringEstimate:
    """Farthest-point net: start at the first point, repeatedly add the point
    farthest from the current centers (lowest index on ties) until every point
    is within ``epsilon``.  Centers are pairwise more than ``epsilon`` apart,
    so the size is at most the minimal ``epsilon/2`` covering number."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    x = _as_array(points)
    centers = [0]
    dist = distances_from(x, x[0], metric)
    while True:
        j = int(np.argmax(dist))
        if dist[j] <= epsilon:
            break
        centers.append(j)
        dist = np.minimum(dist, distances_from(x, x[j], metric, cap=dist))
    return CoveringEstimate(x.shape[-1], float(epsilon), len(centers), metric, tuple(centers))


def net_covers(points, centers: Sequence[int], epsilon: float, metric: str = "uniform") -> bool:
    """Exact check that every point lies within ``epsilon`` of some center."""
    x = _as_array(points)
    best = np.full(x.shape[0], np.inf)
    for c in centers:
        best = np.minimum(best, distances_from(x, x[c], metric))
    return bool(np.all(best <= epsilon))


def _fit_line(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float, list[float]]:
    X = np.asarray(xs, dtype=float)
    Y = np.asarray(ys, dtype=float)
    slope, intercept = np.polyfit(X, Y, 1)
    return float(slope), float(intercept), (Y - (slope * X + intercept)).tolist()


@dataclass(frozen=True)
class BallCoveringReport:
    k: int
    R: float
    metric: str
    samples: int
    rows: list[dict]
    slope: float
    exponent_ratio: float
    C1: float
    C2: float
    slope_ok: bool

    def to_json(self) -> dict:
        return asdict(self)


def ball_covering_bounds_check(
    k: int,
    R: float,
    eps_list: Sequence[float],
    samples: int,
    seed: int,
    metric: str = "uniform",
    n: int = 1,
    workers: int = 1,
) -> BallCoveringReport:
    """Greedy nets of dense samples of ``B(k, R)^n`` against ``(C R / eps)^{n k^2}``.

    Fits ``log N`` against ``log(R / eps)``; ``C1`` and ``C2`` are the extreme
    per-eps constants with the exponent fixed at ``n k^2``.
    """
    if any(not 0 < e <= R for e in eps_list):
        raise ValueError("each eps must lie in (0, R]")
    if len(eps_list) < 2:
        raise ValueError("need at least two values of eps")
    x = ball_array(SamplerConfig(k, n, seed, "uniform_ball", R), 0, samples, workers)
    d = n * k * k
    rows, cs = [], []
    for e in sorted(eps_list, reverse=True):
        net = greedy_net(x, e, metric)
        c = net.net_size ** (1.0 / d) * e / R
        cs.append(c)
        rows.append({"epsilon": e, "net_size": net.net_size, "normalized": net.normalized,
                     "interval_count": math.ceil(R / e) if d == 1 else None, "C": c})
    slope, _, _ = _fit_line([math.log(R / r["epsilon"]) for r in rows], [math.log(r["net_size"]) for r in rows])
    ratio = slope / d
    return BallCoveringReport(k, float(R), metric, samples, rows, slope, ratio, min(cs), max(cs), 0.7 <= ratio <= 1.3)


@dataclass(frozen=True)
class DimensionReport:
    ks: list[int]
    eps_grid: list[float]
    cells: list[dict]
    D: dict[float, float]
    slope: float
    intercept: float
    residuals: list[float]
    proxy: str = "max over the k grid stands in for the limsup in k"
    flags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        d = asdict(self)
        d["D"] = {repr(e): _finite(v) for e, v in self.D.items()}
        d["slope"] = _finite(self.slope)
        d["intercept"] = _finite(self.intercept)
        d["flags"] = list(self.flags)
        return d


def sampling_radius(spec: MicrostateSpec) -> float:
    bounds = spec.coordinate_bounds()
    return float(bounds.max()) if bounds is not None else spec.M


def delta_top_estimate(
    spec_family: Callable[[int, float], MicrostateSpec],
    ks: Sequence[int],
    eps_grid: Sequence[float],
    samples: int,
    seed: int,
    metric: str = "uniform",
    min_accepted: int = 10,
    workers: int = 1,
) -> DimensionReport:
    """Slope of ``D_eps`` against ``|log eps|``.

    ``spec_family(k, eps)`` gives the microstate set at size k and tolerance
    eps.  For each (k, eps) uniform samples of the smallest ball certified to
    contain the set are filtered by membership and covered greedily at
    radius eps.  ``D_eps`` is the max over the k grid of ``k^{-2} log N``;
    cells with fewer than ``min_accepted`` accepted samples are excluded.
    """
    eps_grid = [float(e) for e in eps_grid]
    if len(eps_grid) < 3 or any(a <= b for a, b in zip(eps_grid, eps_grid[1:])):
        raise ValueError("eps_grid needs at least three strictly decreasing values")
    cells, flags = [], []
    D: dict[float, float] = {}
    for e in eps_grid:
        best = -math.inf
        for k in ks:
            spec = spec_family(int(k), e)
            if spec.m != 0:
                raise ValueError("presence variables are not supported here")
            R = sampling_radius(spec)
            x = ball_array(SamplerConfig(spec.k, spec.n, seed, "uniform_ball", R), 0, samples, workers)
            x = x[membership_mask(spec, x)]
            cell = {"k": int(k), "epsilon": e, "R": R, "accepted": int(x.shape[0]), "seed": seed,
                    "truncated_to_ball": not contained_in_ball(spec, R)}
            if x.shape[0] < min_accepted:
                cell.update(net_size=None, normalized=None, excluded=True)
                flags.append(f"insufficient_samples:k={k},eps={e}")
            else:
                net = greedy_net(x, e, metric)
                cell.update(net_size=net.net_size, normalized=net.normalized, excluded=False)
                best = max(best, net.normalized)
            cells.append(cell)
        D[e] = best
    usable = [e for e in eps_grid if math.isfinite(D[e])]
    if len(usable) < 2:
        flags.append("too_few_eps")
        return DimensionReport(list(ks), eps_grid, cells, D, math.nan, math.nan, [], flags=tuple(flags))
    slope, intercept, res = _fit_line([-math.log(e) for e in usable], [D[e] for e in usable])
    return DimensionReport(list(ks), eps_grid, cells, D, slope, intercept, res, flags=tuple(flags))
