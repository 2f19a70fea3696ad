"""Seeded random Hermitian tuples and exact volumes.

Lebesgue measure on M_k^sa is the Euclidean measure of the inner product
``<A, B> = Tr(AB)``.  With that convention the Gaussian density
``c_k exp(-(k/2) sum_j Tr A_j^2)`` integrates to one for
``c_k = (2 pi)^{-n k^2 / 2} k^{n k^2 / 2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np
from numpy.polynomial import legendre

from .linalg import MatrixTuple
from .rng import generator, map_indices, stream_id

BALL_MAX_DIM = 12
REJECTION_MAX_DIM = 6
# eigenvalues are pulled in by this relative amount before unitary
# conjugation so rounding can never push a sample outside the ball
_BALL_SHRINK = 1.0 - 1e-13


@dataclass(frozen=True)
class SamplerConfig:
    dim: int
    arity: int
    seed: int
    kind: str = "gaussian"
    radius: float = 1.0

    def __post_init__(self) -> None:
        if self.dim < 1 or self.arity < 1:
            raise ValueError("dim and arity must be >= 1")
        if self.kind not in ("gaussian", "uniform_ball"):
            raise ValueError(f"unknown sampler kind {self.kind!r}")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


# ---------------------------------------------------------------------------
# Gaussian (GUE) tuples


def _assemble_gue(z: np.ndarray, k: int) -> np.ndarray:
    """Raw standard normals (..., k*k) -> Hermitian (..., k, k) with the GUE scaling."""
    out = np.zeros(z.shape[:-1] + (k, k), dtype=complex)
    d = np.arange(k)
    out[..., d, d] = z[..., :k] / math.sqrt(k)
    iu = np.triu_indices(k, 1)
    m = len(iu[0])
    s = 1.0 / math.sqrt(2 * k)
    off = s * (z[..., k : k + m] + 1j * z[..., k + m : k + 2 * m])
    out[..., iu[0], iu[1]] = off
    out[..., iu[1], iu[0]] = np.conj(off)
    return out


def gue_array(cfg: SamplerConfig, start: int, stop: int, workers: int = 1) -> np.ndarray:
    """Samples ``start..stop-1`` as an array of shape (N, n, k, k)."""
    if cfg.kind != "gaussian":
        raise ValueError("gue_array needs a gaussian SamplerConfig")
    n, k = cfg.arity, cfg.dim
    stream = stream_id("gue", n, k)

    def chunk(a: int, b: int) -> np.ndarray:
        raw = np.empty((b - a, n, k * k))
        for i in range(a, b):
            raw[i - a] = generator(cfg.seed, stream, i).standard_normal((n, k * k))
        return _assemble_gue(raw, k)

    return map_indices(chunk, start, stop, workers)


def sample_gue(cfg: SamplerConfig, count: int, start: int = 0) -> Iterator[MatrixTuple]:
    """I.i.d. tuples with density proportional to ``exp(-(k/2) sum_j Tr A_j^2)``."""
    block = max(1, min(count, 256))
    for a in range(start, start + count, block):
        b = min(a + block, start + count)
        for x in gue_array(cfg, a, b):
            yield MatrixTuple(x)


# ---------------------------------------------------------------------------
# uniform samples from the operator-norm ball


def lobatto_points(k: int) -> np.ndarray:
    """Maximizers of the Vandermonde product on [-1, 1] (Fekete points)."""
    if k == 1:
        return np.zeros(1)
    c = np.zeros(k)
    c[-1] = 1.0
    inner = legendre.legroots(legendre.legder(c)) if k > 2 else np.empty(0)
    return np.concatenate([[-1.0], np.sort(inner), [1.0]])


def log_vandermonde_sq(x: np.ndarray) -> np.ndarray:
    """``log prod_{i<j} (x_i - x_j)^2`` along the last axis."""
    k = x.shape[-1]
    out = np.zeros(x.shape[:-1])
    for i in range(k - 1):
        out += np.sum(np.log(np.abs(x[..., i, None] - x[..., i + 1 :])), axis=-1)
    return 2.0 * out


@lru_cache(maxsize=None)
def _log_vmax(k: int) -> float:
    return float(log_vandermonde_sq(lobatto_points(k)))


@lru_cache(maxsize=None)
def rejection_acceptance(k: int) -> float:
    """Acceptance rate of uniform proposals under the Vandermonde-squared test."""
    return math.exp(log_selberg_interval(k) - k * math.log(2.0) - _log_vmax(k))


def _eigs_rejection(gen: np.random.Generator, k: int) -> np.ndarray:
    if k == 1:
        return gen.uniform(-1.0, 1.0, size=1)
    logmax = _log_vmax(k)
    block = int(math.ceil(2.0 / rejection_acceptance(k)))
    while True:
        x = gen.uniform(-1.0, 1.0, size=(block, k))
        u = gen.random(block)
        ok = np.flatnonzero(np.log(u) <= log_vandermonde_sq(x) - logmax)
        if ok.size:
            return x[ok[0]]


def _legendre_features(x: np.ndarray, k: int) -> np.ndarray:
    norm = np.sqrt((2.0 * np.arange(k) + 1.0) / 2.0)
    return legendre.legvander(x, k - 1) * norm


def _eigs_projection_dpp(gen: np.random.Generator, k: int) -> np.ndarray:
    # chain rule for the projection DPP with the Legendre kernel of rank k;
    # its joint density is proportional to the squared Vandermonde on [-1, 1]^k
    basis = np.zeros((0, k))
    pts = np.empty(k)
    for i in range(k):
        rem = k - i
        bound = k * k / (2.0 * rem)
        block = int(math.ceil(2.0 * k * k / rem))
        while True:
            x = gen.uniform(-1.0, 1.0, size=block)
            u = gen.random(block)
            phi = _legendre_features(x, k)
            if i:
                phi = phi - (phi @ basis.T) @ basis
            dens = np.sum(phi * phi, axis=1) / rem
            ok = np.flatnonzero(u * bound <= dens)
            if ok.size:
                j = ok[0]
                pts[i] = x[j]
                v = phi[j] / np.linalg.norm(phi[j])
                basis = np.vstack([basis, v])
                break
    return pts


def ball_eigenvalues(gen: np.random.Generator, k: int) -> np.ndarray:
    """Eigenvalues of a uniform sample of the unit operator-norm ball of M_k^sa."""
    if k > BALL_MAX_DIM:
        raise ValueError(f"ball sampling is capped at k = {BALL_MAX_DIM}; use Gaussian sampling for larger k")
    if k <= REJECTION_MAX_DIM:
        return _eigs_rejection(gen, k)
    return _eigs_projection_dpp(gen, k)


def haar_from_gaussian(z: np.ndarray) -> np.ndarray:
    """Haar unitaries from complex Ginibre matrices via QR with phase correction."""
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    return q * (d / np.abs(d))[..., None, :]


def ball_array(cfg: SamplerConfig, start: int, stop: int, workers: int = 1) -> np.ndarray:
    """Uniform samples from ``{max_j ||A_j|| <= R}``, shape (N, n, k, k)."""
    if cfg.kind != "uniform_ball":
        raise ValueError("ball_array needs a uniform_ball SamplerConfig")
    n, k, R = cfg.arity, cfg.dim, float(cfg.radius)
    if k > BALL_MAX_DIM:
        raise ValueError(f"ball sampling is capped at k = {BALL_MAX_DIM}; use Gaussian sampling for larger k")
    stream = stream_id("ball", n, k)

    def chunk(a: int, b: int) -> np.ndarray:
        N = b - a
        lam = np.empty((N, n, k))
        z = np.empty((N, n, k, k), dtype=complex)
        for i in range(a, b):
            gen = generator(cfg.seed, stream, i)
            for j in range(n):
                lam[i - a, j] = ball_eigenvalues(gen, k)
                if k > 1:
                    g = gen.standard_normal((2, k, k))
                    z[i - a, j] = (g[0] + 1j * g[1]) / math.sqrt(2.0)
        if k == 1:
            return (R * lam).astype(complex)[..., None]
        U = haar_from_gaussian(z)
        out = (U * (_BALL_SHRINK * lam)[..., None, :]) @ np.conj(np.swapaxes(U, -1, -2))
        out = 0.5 * (out + np.conj(np.swapaxes(out, -1, -2)))
        return R * out

    return map_indices(chunk, start, stop, workers)


def sample_ball(cfg: SamplerConfig, count: int, start: int = 0) -> Iterator[MatrixTuple]:
    """I.i.d. uniform tuples from the product of operator-norm balls of radius R."""
    block = max(1, min(count, 256))
    for a in range(start, start + count, block):
        b = min(a + block, start + count)
        for x in ball_array(cfg, a, b):
            yield MatrixTuple(x)


# ---------------------------------------------------------------------------
# constants


def log_c_k(k: int, n: int) -> float:
    """Log of the Gaussian normalizing constant ``(2 pi)^{-nk^2/2} k^{nk^2/2}``."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    return 0.5 * n * k * k * (math.log(k) - math.log(2.0 * math.pi))


def log_selberg_interval(k: int) -> float:
    """``log int_{[-1,1]^k} prod_{i<j} (x_i - x_j)^2 dx`` via Selberg's integral."""
    s = k * k * math.log(2.0)
    for j in range(k):
        s += 2.0 * math.lgamma(j + 1) + math.lgamma(j + 2) - math.lgamma(k + j + 1)
    return s


def log_weyl_constant(k: int) -> float:
    """Weyl integration constant: ``vol f = C_k int f(lam) Vandermonde^2 dlam`` on M_k^sa."""
    return 0.5 * k * (k - 1) * math.log(2.0 * math.pi) - sum(math.lgamma(j + 2) for j in range(k))


def log_unit_ball_volume(k: int) -> float:
    return log_weyl_constant(k) + log_selberg_interval(k)


def log_ball_volume(k: int, n: int, R: float) -> float:
    """Log-volume of ``B(k, R)^n`` in (M_k^sa)^n."""
    if k < 1 or n < 1:
        raise ValueError("k and n must be >= 1")
    if not R > 0:
        raise ValueError("R must be positive")
    return n * (k * k * math.log(R) + log_unit_ball_volume(k))
