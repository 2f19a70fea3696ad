"""Logarithmic potential theory on the real line.

Sign convention: the energy is ``I(mu) = iint log|s - t| dmu(s) dmu(t)``,
which is concave in ``mu``; its maximum over measures on a compact set K is
the Robin constant and ``cap(K) = exp(robin)``.  In one variable the free
entropy of a distribution is ``I(mu) + THETA`` and the free capacity of an
element with spectrum K is ``log cap(K) + THETA``.

Grid measures put uniform mass on cells of width h; a cell's self-energy is
``log h - 3/2``, the exact value of ``iint_{[0,h]^2} log|s-t| ds dt / h^2``.
"""

from __future__ import annotations

import csv
import json
import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

THETA = 0.75 + 0.5 * math.log(2.0 * math.pi)
CELL_SELF_ENERGY = -1.5
MIN_CELLS = 50
FW_TOL = 1e-8
FW_MAX_ITER = 50_000
_ROW_BLOCK = 1024


@dataclass(frozen=True, eq=False)
class DiscretizedMeasure:
    """Point masses (``widths`` None) or uniform masses on cells centered at ``points``."""

    points: np.ndarray
    weights: np.ndarray
    widths: np.ndarray | None = None

    def __post_init__(self) -> None:
        x = np.asarray(self.points, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if x.size == 0 or x.shape != w.shape:
            raise ValueError("points and weights must be nonempty and of equal length")
        if np.any(np.diff(x) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must be nonnegative and sum to 1 (sum = {w.sum()!r})")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "weights", w)
        if self.widths is not None:
            h = np.broadcast_to(np.asarray(self.widths, dtype=float), x.shape).copy()
            if np.any(h <= 0):
                raise ValueError("cell widths must be positive")
            object.__setattr__(self, "widths", h)

    @property
    def cell_width(self) -> float | None:
        """Common cell width for uniform grids, else None."""
        if self.widths is None or np.ptp(self.widths) > 1e-12 * self.widths[0]:
            return None
        return float(self.widths[0])

    def moment(self, p: int) -> float:
        # repeated products and fsum keep mirrored terms of a symmetric
        # measure cancelling exactly (vectorized pow is not bitwise odd)
        y = self.weights.copy()
        for _ in range(p):
            y = y * self.points
        return math.fsum(y)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "weight"])
            for x, w in zip(self.points, self.weights):
                wr.writerow([repr(float(x)), repr(float(w))])


@dataclass(frozen=True)
class RealCompact:
    """A finite union of disjoint closed intervals; ``(a, a)`` is a single point."""

    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        iv = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        if not iv:
            raise ValueError("empty compact set")
        for a, b in iv:
            if not (math.isfinite(a) and math.isfinite(b)) or a > b:
                raise ValueError(f"bad interval [{a}, {b}]")
        for (_, b0), (a1, _) in zip(iv, iv[1:]):
            if a1 <= b0:
                raise ValueError("intervals must be disjoint")
        object.__setattr__(self, "intervals", iv)

    @classmethod
    def parse(cls, text: str) -> RealCompact:
        """``"[-1,1]"``, ``"[0,1] u [2,3]"`` or ``"{0}"`` style input."""
        num = r"\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*"
        pieces = []
        rest = text
        pat = re.compile(rf"\[{num},{num}\]|\{{{num}\}}")
        for m in pat.finditer(text):
            if m.group(1) is not None:
                pieces.append((float(m.group(1)), float(m.group(2))))
            else:
                pieces.append((float(m.group(3)),) * 2)
        rest = pat.sub("", text)
        if not pieces or re.sub(r"[\s,uU∪]", "", rest):
            raise ValueError(f"cannot parse compact set {text!r}")
        return cls(tuple(pieces))

    @property
    def length(self) -> float:
        return sum(b - a for a, b in self.intervals)

    @property
    def proper(self) -> tuple[tuple[float, float], ...]:
        """Intervals of positive length (points are polar and do not matter)."""
        return tuple((a, b) for a, b in self.intervals if b > a)

    def __str__(self) -> str:
        return " u ".join(f"{{{a:g}}}" if a == b else f"[{a:g},{b:g}]" for a, b in self.intervals)


# ---------------------------------------------------------------------------
# energies


def _kernel_rows(x: np.ndarray, h: np.ndarray, rows: slice) -> np.ndarray:
    d = np.abs(x[rows, None] - x[None, :])
    i = np.arange(rows.start, rows.stop)
    d[i - rows.start, i] = 1.0
    K = np.log(d)
    K[i - rows.start, i] = np.log(h[i]) + CELL_SELF_ENERGY
    return K


def energy_kernel(mu: DiscretizedMeasure) -> np.ndarray:
    """Dense matrix with ``log|x_i - x_j|`` off the diagonal and cell self-energies on it."""
    if mu.widths is None:
        raise ValueError("the kernel needs a grid measure")
    n = mu.points.size
    return _kernel_rows(mu.points, mu.widths, slice(0, n))


def log_energy(mu: DiscretizedMeasure) -> float:
    if mu.widths is None:
        return -math.inf
    x, w, h = mu.points, mu.weights, mu.widths
    total = 0.0
    for s in range(0, x.size, _ROW_BLOCK):
        rows = slice(s, min(s + _ROW_BLOCK, x.size))
        total += float(w[rows] @ (_kernel_rows(x, h, rows) @ w))
    return total


def chi_one_var(mu: DiscretizedMeasure) -> float:
    return log_energy(mu) + THETA


def potential(mu: DiscretizedMeasure, x) -> np.ndarray:
    """``U(x) = int log|x - t| dmu(t)``, integrating exactly over each cell."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if mu.widths is None:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(x[:, None] - mu.points[None, :])) @ mu.weights

    def F(u):
        au = np.abs(u)
        return np.where(au > 0, u * np.log(np.where(au > 0, au, 1.0)), 0.0) - u

    out = np.empty(x.size)
    lo = mu.points - mu.widths / 2
    hi = mu.points + mu.widths / 2
    for s in range(0, x.size, _ROW_BLOCK):
        xs = x[s : s + _ROW_BLOCK, None]
        avg = (F(xs - lo) - F(xs - hi)) / mu.widths
        out[s : s + _ROW_BLOCK] = avg @ mu.weights
    return out


# ---------------------------------------------------------------------------
# equilibrium measures


def grid_for(K: RealCompact, gridsize: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell centers and widths: uniform per interval, counts proportional to length."""
    if gridsize < MIN_CELLS:
        raise ValueError(f"gridsize must be >= {MIN_CELLS}")
    iv = K.proper
    if not iv:
        raise ValueError("compact set has no interval of positive length")
    L = sum(b - a for a, b in iv)
    xs, hs = [], []
    for a, b in iv:
        m = max(MIN_CELLS, int(round(gridsize * (b - a) / L)))
        h = (b - a) / m
        xs.append(a + h * (np.arange(m) + 0.5))
        hs.append(np.full(m, h))
    return np.concatenate(xs), np.concatenate(hs)


@dataclass(frozen=True)
class FWResult:
    weights: np.ndarray
    value: float
    gap: float
    iterations: int
    converged: bool


def maximize_quadratic_simplex(K: np.ndarray, tol: float = FW_TOL, max_iter: int = FW_MAX_ITER) -> FWResult:
    """Maximize ``w^T K w`` over the probability simplex (K symmetric, concave on it).

    Away-step Frank-Wolfe with exact line search, started at the uniform
    vector.  Stops when the Frank-Wolfe gap drops below ``tol``.
    """
    N = K.shape[0]
    w = np.full(N, 1.0 / N)
    Kw = K @ w
    gap = math.inf
    it = 0
    for it in range(1, max_iter + 1):
        g = 2.0 * Kw
        f = float(w @ Kw)
        wg = 2.0 * f
        s = int(np.argmax(g))
        gap = float(g[s] - wg)
        if gap < tol:
            break
        act = np.flatnonzero(w > 0)
        v = int(act[np.argmin(g[act])])
        away = float(wg - g[v])
        if gap >= away:
            # toward vertex s
            curv = K[s, s] - 2.0 * Kw[s] + f
            gam = 1.0 if curv >= 0 else min(1.0, gap / (-2.0 * curv))
            w *= 1.0 - gam
            w[s] += gam
            Kw = (1.0 - gam) * Kw + gam * K[s]
        else:
            # away from vertex v
            gmax = w[v] / (1.0 - w[v]) if w[v] < 1.0 else math.inf
            curv = f - 2.0 * Kw[v] + K[v, v]
            gam = gmax if curv >= 0 else min(gmax, away / (-2.0 * curv))
            w *= 1.0 + gam
            w[v] -= gam
            if gam == gmax:
                w[v] = 0.0
            Kw = (1.0 + gam) * Kw - gam * K[v]
    else:
        it = max_iter
    w = np.maximum(w, 0.0)
    w /= w.sum()
    return FWResult(w, float(w @ K @ w), gap, it, gap < tol)


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    compact: RealCompact
    measure: DiscretizedMeasure | None
    robin: float
    iterations: int = 0
    gap: float = 0.0
    converged: bool = True

    def __iter__(self):
        yield self.measure
        yield self.robin

    @property
    def capacity(self) -> float:
        return math.exp(self.robin) if self.robin > -math.inf else 0.0

    @property
    def kappa(self) -> float:
        return self.robin + THETA

    @property
    def chi(self) -> float:
        return -math.inf if self.measure is None else chi_one_var(self.measure)

    def potential_spread(self, support_tol: float = 0.0) -> float:
        """Max minus min of the potential over cells carrying mass."""
        if self.measure is None:
            return 0.0
        mu = self.measure
        on = mu.weights > support_tol
        u = potential(mu, mu.points[on])
        return float(u.max() - u.min())

    def to_json(self) -> dict:
        def num(v: float):
            return v if math.isfinite(v) else ("-inf" if v < 0 else "inf")

        return {
            "compact": str(self.compact),
            "capacity": self.capacity,
            "robin": num(self.robin),
            "chi": num(self.chi),
            "kappa": num(self.kappa),
            "iterations": self.iterations,
            "fw_gap": self.gap,
            "converged": self.converged,
        }


def equilibrium_measure(K: RealCompact, gridsize: int = 2000) -> EquilibriumResult:
    if gridsize < MIN_CELLS:
        raise ValueError(f"gridsize must be >= {MIN_CELLS}")
    if not K.proper:
        return EquilibriumResult(K, None, -math.inf)
    x, h = grid_for(K, gridsize)
    kern = _kernel_rows(x, h, slice(0, x.size))
    fw = maximize_quadratic_simplex(kern)
    mu = DiscretizedMeasure(x, fw.weights, h)
    return EquilibriumResult(K, mu, fw.value, fw.iterations, fw.gap, fw.converged)


def capacity(K: RealCompact, gridsize: int = 2000) -> float:
    return equilibrium_measure(K, gridsize).capacity


def kappa_one_var(K: RealCompact, gridsize: int = 2000) -> float:
    return equilibrium_measure(K, gridsize).kappa


def capacity_json(res: EquilibriumResult) -> str:
    return json.dumps(res.to_json(), sort_keys=True)


# ---------------------------------------------------------------------------
# reference densities


def arcsine_cdf(x, a: float = -1.0, b: float = 1.0):
    u = np.clip((2.0 * np.asarray(x, dtype=float) - a - b) / (b - a), -1.0, 1.0)
    return 0.5 + np.arcsin(u) / math.pi


def semicircle_cdf(x, center: float = 0.0, var: float = 1.0):
    u = np.clip((np.asarray(x, dtype=float) - center) / math.sqrt(var), -2.0, 2.0)
    return 0.5 + u * np.sqrt(4.0 - u * u) / (4.0 * math.pi) + np.arcsin(u / 2.0) / math.pi


def arcsine_density(x, a: float = -1.0, b: float = 1.0):
    x = np.asarray(x, dtype=float)
    r = (x - a) * (b - x)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(r > 0, 1.0 / (math.pi * np.sqrt(np.where(r > 0, r, 1.0))), 0.0)


def semicircle_density(x, center: float = 0.0, var: float = 1.0):
    u = (np.asarray(x, dtype=float) - center) / math.sqrt(var)
    return np.sqrt(np.maximum(4.0 - u * u, 0.0)) / (2.0 * math.pi * math.sqrt(var))


def _symmetric_cells(cdf, lo: float, hi: float, gridsize: int) -> DiscretizedMeasure:
    # exact cell masses; the right half is mirrored so the measure is exactly
    # symmetric about the midpoint
    h = (hi - lo) / gridsize
    mid = 0.5 * (lo + hi)
    half = gridsize // 2
    right = h * (np.arange(half) + (0.5 if gridsize % 2 == 0 else 1.0))
    edges_r = np.concatenate([right - h / 2, right[-1:] + h / 2]) if half else np.array([])
    mass_r = np.diff(cdf(mid + edges_r)) if half else np.array([])
    if gridsize % 2:
        x = np.concatenate([-right[::-1], [0.0], right])
        m0 = cdf(mid + h / 2) - cdf(mid - h / 2)
        w = np.concatenate([mass_r[::-1], [m0], mass_r])
    else:
        x = np.concatenate([-right[::-1], right])
        w = np.concatenate([mass_r[::-1], mass_r])
    w = w / w.sum()
    return DiscretizedMeasure(mid + x, w, h)


def reference_density(name: str, gridsize: int = 4000, **params) -> DiscretizedMeasure:
    """``semicircle(center=0, var=1)`` or ``arcsine(a=-1, b=1)`` on a uniform grid."""
    if gridsize < 2:
        raise ValueError("gridsize must be >= 2")
    if name == "semicircle":
        c, v = float(params.get("center", 0.0)), float(params.get("var", 1.0))
        if not v > 0:
            raise ValueError("variance must be positive")
        r = 2.0 * math.sqrt(v)
        return _symmetric_cells(lambda t: semicircle_cdf(t, c, v), c - r, c + r, gridsize)
    if name == "arcsine":
        a, b = float(params.get("a", -1.0)), float(params.get("b", 1.0))
        if not a < b:
            raise ValueError("need a < b")
        return _symmetric_cells(lambda t: arcsine_cdf(t, a, b), a, b, gridsize)
    raise ValueError(f"unknown reference density {name!r}")


def density_l1(mu: DiscretizedMeasure, density, lo: float, hi: float, sub: int = 16) -> float:
    """``int_lo^hi |mu-histogram - density|`` with ``sub`` midpoints per cell."""
    if mu.widths is None:
        raise ValueError("needs a grid measure")
    total = 0.0
    for x, w, h in zip(mu.points, mu.weights, mu.widths):
        a, b = max(lo, x - h / 2), min(hi, x + h / 2)
        if b <= a:
            continue
        t = a + (b - a) * (np.arange(sub) + 0.5) / sub
        total += float(np.sum(np.abs(w / h - density(t)))) * (b - a) / sub
    return total


def semicircle_entropy_values(n: int = 1) -> dict[str, float]:
    """Energy-based free entropy of n semicirculars next to the Gaussian-measure bound."""
    energy_value = n * (0.5 + 0.5 * math.log(2.0 * math.pi))
    bound_value = 0.5 * n * (math.log(2.0 * math.pi) - 1.0)
    return {"energy_formula": energy_value, "gaussian_bound": bound_value, "gap": energy_value - bound_value}
