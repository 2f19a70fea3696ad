"""Dense Hermitian linear algebra.

Everything downstream works on complex arrays of shape ``(..., k, k)``;
:class:`HermitianMatrix` and :class:`MatrixTuple` are thin validated wrappers
used at API boundaries.  Batched helpers (``eigvalsh``, ``opnorm_batch``, ...)
assume their input is already Hermitian.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
JACOBI_TOL = 1e-12
# above this size `method="auto"` hands the eigenproblem to LAPACK
JACOBI_MAX_DIM = 64


class HermitianError(ValueError):
    """Input matrix is not Hermitian within the construction tolerance."""


class ShapeError(ValueError):
    """Arity or dimension mismatch between matrices or tuples."""


class ConvergenceError(RuntimeError):
    pass


def hermitian_residual(a: np.ndarray) -> float:
    a = np.asarray(a)
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - np.conj(np.swapaxes(a, -1, -2)))))


def as_hermitian(a, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate and symmetrize a (stack of) square matrices as ``(M + M*)/2``.

    The residual is measured relative to ``max(1, max|M_ij|)``; anything above
    ``tol`` raises instead of being silently repaired.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ShapeError(f"expected square matrices, got shape {a.shape}")
    if a.shape[-1] < 1:
        raise ShapeError("matrix dimension must be >= 1")
    if not np.all(np.isfinite(a)):
        raise HermitianError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a))))
    res = hermitian_residual(a)
    if res > tol * scale:
        raise HermitianError(f"symmetrization residual {res:.3e} exceeds {tol:.0e}")
    out = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    idx = np.arange(a.shape[-1])
    out[..., idx, idx] = out[..., idx, idx].real
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=complex, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class HermitianMatrix:
    """A k x k complex self-adjoint matrix, stored exactly symmetrized."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.entries)
        if a.ndim != 2:
            raise ShapeError(f"expected a 2-d array, got shape {a.shape}")
        object.__setattr__(self, "entries", _frozen(as_hermitian(a)))

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @classmethod
    def identity(cls, k: int) -> HermitianMatrix:
        return cls(np.eye(k))

    @classmethod
    def zeros(cls, k: int) -> HermitianMatrix:
        return cls(np.zeros((k, k)))

    @classmethod
    def diag(cls, values: Iterable[float]) -> HermitianMatrix:
        return cls(np.diag(np.asarray(list(values), dtype=float)))

    @classmethod
    def from_literal(cls, rows: Sequence[Sequence[Sequence[float]]]) -> HermitianMatrix:
        """Build from the row-major JSON literal ``[[[re, im], ...], ...]``."""
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 3 or arr.shape[-1] != 2:
            raise ShapeError("matrix literal must be rows of [re, im] pairs")
        return cls(arr[..., 0] + 1j * arr[..., 1])

    def to_literal(self) -> list:
        return [[[float(z.real), float(z.imag)] for z in row] for row in self.entries]

    def __add__(self, other: HermitianMatrix) -> HermitianMatrix:
        return HermitianMatrix(self.entries + other.entries)

    def __sub__(self, other: HermitianMatrix) -> HermitianMatrix:
        return HermitianMatrix(self.entries - other.entries)

    def __mul__(self, c: float) -> HermitianMatrix:
        return HermitianMatrix(float(c) * self.entries)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, HermitianMatrix):
            return NotImplemented
        return self.entries.shape == other.entries.shape and bool(np.all(self.entries == other.entries))

    def __repr__(self) -> str:
        return f"HermitianMatrix(dim={self.dim})"


@dataclass(frozen=True, eq=False)
class MatrixTuple:
    """An ordered n-tuple of Hermitian k x k matrices, stored as an (n, k, k) array."""

    data: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.data)
        if a.ndim != 3:
            raise ShapeError(f"expected an (n, k, k) array, got shape {a.shape}")
        if a.shape[0] < 1:
            raise ShapeError("a matrix tuple needs arity >= 1")
        object.__setattr__(self, "data", _frozen(as_hermitian(a)))

    @classmethod
    def of(cls, *components: HermitianMatrix | np.ndarray) -> MatrixTuple:
        mats = [c.entries if isinstance(c, HermitianMatrix) else np.asarray(c, dtype=complex) for c in components]
        if not mats:
            raise ShapeError("a matrix tuple needs arity >= 1")
        dims = {m.shape for m in mats}
        if len(dims) != 1:
            raise ShapeError(f"components have different shapes: {sorted(dims)}")
        return cls(np.stack(mats))

    @classmethod
    def scalars(cls, *values: float) -> MatrixTuple:
        """Tuple of 1 x 1 matrices, handy for k = 1 cases."""
        return cls(np.asarray(values, dtype=complex).reshape(-1, 1, 1))

    @property
    def arity(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def components(self) -> tuple[HermitianMatrix, ...]:
        return tuple(HermitianMatrix(c) for c in self.data)

    def __getitem__(self, j: int) -> HermitianMatrix:
        return HermitianMatrix(self.data[j])

    def __len__(self) -> int:
        return self.arity

    def __eq__(self, other) -> bool:
        if not isinstance(other, MatrixTuple):
            return NotImplemented
        return self.data.shape == other.data.shape and bool(np.all(self.data == other.data))

    def __repr__(self) -> str:
        return f"MatrixTuple(arity={self.arity}, dim={self.dim})"


# ---------------------------------------------------------------------------
# Jacobi eigensolver


@lru_cache(maxsize=None)
def _round_robin(k: int) -> tuple[tuple[np.ndarray, np.ndarray], ...]:
    """Round-robin schedule: k-1 (or k) rounds of disjoint (p, q) pairs, p < q."""
    m = k + (k % 2)
    idx = list(range(m))
    rounds = []
    for _ in range(m - 1):
        pairs = [(idx[i], idx[m - 1 - i]) for i in range(m // 2)]
        pairs = sorted((min(p, q), max(p, q)) for p, q in pairs if p < k and q < k)
        if pairs:
            rounds.append((np.array([p for p, _ in pairs]), np.array([q for _, q in pairs])))
        idx = [idx[0], idx[-1]] + idx[1:-1]
    return tuple(rounds)


def _rotate(a: np.ndarray, v: np.ndarray | None, P: np.ndarray, Q: np.ndarray) -> None:
    # a has layout (k, k, N); one complex Givens rotation per (p, q) pair and matrix
    apq = a[P, Q]
    r = np.abs(apq)
    nz = r > 0
    rr = np.where(nz, r, 1.0)
    phase = np.where(nz, apq / rr, 1.0)
    theta = (a[Q, Q].real - a[P, P].real) / (2.0 * rr)
    t = (np.sign(theta) + (theta == 0)) / (np.abs(theta) + np.hypot(theta, 1.0))
    t = np.where(nz, t, 0.0)
    c = 1.0 / np.sqrt(1.0 + t * t)
    s = t * c
    jqp = -s * np.conj(phase)
    jqq = c * np.conj(phase)
    colP, colQ = a[:, P], a[:, Q]
    a[:, P] = colP * c + colQ * jqp
    a[:, Q] = colP * s + colQ * jqq
    rowP, rowQ = a[P], a[Q]
    a[P] = c[:, None] * rowP + np.conj(jqp)[:, None] * rowQ
    a[Q] = s[:, None] * rowP + np.conj(jqq)[:, None] * rowQ
    a[P, Q] = 0.0
    a[Q, P] = 0.0
    if v is not None:
        vP, vQ = v[:, P], v[:, Q]
        v[:, P] = vP * c + vQ * jqp
        v[:, Q] = vP * s + vQ * jqq


def jacobi_eigh(a, vectors: bool = False, tol: float = JACOBI_TOL, max_sweeps: int = 60):
    """Cyclic Jacobi eigensolver for a stack of Hermitian matrices.

    Sweeps round-robin over all (p, q) pairs, applying the disjoint rotations
    of each round simultaneously, until the off-diagonal Frobenius norm of
    every matrix is at most ``tol * max(1, ||A||_F)``.

    Returns sorted eigenvalues of shape ``(..., k)`` and, if requested, the
    unitary ``U`` with ``A = U diag(lam) U*`` (columns ordered like ``lam``).
    """
    x = np.asarray(a, dtype=complex)
    batch, k = x.shape[:-2], x.shape[-1]
    flat = x.reshape(-1, k, k)
    N = flat.shape[0]
    # explicit copies: inputs may be read-only views and are rotated in place
    work = np.moveaxis(flat, 0, -1).copy()
    vecs = np.broadcast_to(np.eye(k, dtype=complex)[:, :, None], (k, k, N)).copy() if vectors else None
    lam = np.empty((k, N))
    U = np.empty((k, k, N), dtype=complex) if vectors else None
    offmask = ~np.eye(k, dtype=bool)
    scale = np.maximum(1.0, np.sqrt(np.sum(np.abs(work) ** 2, axis=(0, 1))))
    active = np.arange(N)
    schedule = _round_robin(k)
    for sweep in range(max_sweeps + 1):
        off = np.sqrt(np.sum(np.abs(work[offmask]) ** 2, axis=0))
        done = off <= tol * scale
        if sweep == max_sweeps:
            # roundoff floor: accept 1e-10 relative after the sweep budget
            done = off <= 1e-10 * scale
            if not np.all(done):
                raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")
        if np.any(done):
            lam[:, active[done]] = np.diagonal(work[:, :, done]).T.real
            if vectors:
                U[:, :, active[done]] = vecs[:, :, done]
            keep = ~done
            work, scale, active = work[:, :, keep], scale[keep], active[keep]
            if vectors:
                vecs = vecs[:, :, keep]
            if active.size == 0:
                break
        for P, Q in schedule:
            _rotate(work, vecs, P, Q)
    lam = lam.T
    order = np.argsort(lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1).reshape(batch + (k,))
    if not vectors:
        return lam
    U = np.moveaxis(U, -1, 0)
    U = np.take_along_axis(U, order[:, None, :], axis=-1).reshape(batch + (k, k))
    return lam, U


def _use_jacobi(k: int, method: str) -> bool:
    if method == "jacobi":
        return True
    if method == "lapack":
        return False
    if method == "auto":
        return k <= JACOBI_MAX_DIM
    raise ValueError(f"unknown eigensolver method {method!r}")


def eigvalsh(a, method: str = "auto") -> np.ndarray:
    """Sorted eigenvalues of a stack of Hermitian matrices, shape (..., k)."""
    a = np.asarray(a, dtype=complex)
    if a.shape[-1] == 1:
        return a.real.reshape(a.shape[:-1]).copy()
    if a.shape[-1] == 2 and method == "auto":
        # one Jacobi rotation diagonalizes a 2 x 2 matrix; use its closed form
        p, q = a[..., 0, 0].real, a[..., 1, 1].real
        c = 0.5 * (p + q)
        r = np.hypot(0.5 * (p - q), np.abs(a[..., 0, 1]))
        return np.stack([c - r, c + r], axis=-1)
    if _use_jacobi(a.shape[-1], method):
        return jacobi_eigh(a)
    return np.linalg.eigvalsh(a)


def eigh_array(a, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=complex)
    if _use_jacobi(a.shape[-1], method):
        return jacobi_eigh(a, vectors=True)
    return np.linalg.eigh(a)


def opnorm_batch(a, method: str = "auto") -> np.ndarray:
    """Operator norms of a stack of Hermitian matrices."""
    lam = eigvalsh(a, method)
    return np.maximum(-lam[..., 0], lam[..., -1])


# ---------------------------------------------------------------------------
# public single-matrix operations


def eigenvalues(m: HermitianMatrix, method: str = "auto") -> np.ndarray:
    return eigvalsh(m.entries, method)


def eigh(m: HermitianMatrix, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    return eigh_array(m.entries, method)


def opnorm(m: HermitianMatrix, method: str = "auto") -> float:
    return float(opnorm_batch(m.entries, method))


def normalized_trace(m: HermitianMatrix) -> float:
    """``k^{-1} Tr m``; the imaginary part is asserted to vanish."""
    tr = np.trace(m.entries) / m.dim
    assert abs(tr.imag) <= 1e-12, tr
    return float(tr.real)


def _check_pair(t1: MatrixTuple, t2: MatrixTuple) -> None:
    if t1.arity != t2.arity or t1.dim != t2.dim:
        raise ShapeError(f"tuple mismatch: (n={t1.arity}, k={t1.dim}) vs (n={t2.arity}, k={t2.dim})")


def hs_norm_batch(a: np.ndarray) -> np.ndarray:
    """Normalized Hilbert-Schmidt norm ``k^{-1/2} (sum_j Tr A_j^2)^{1/2}`` over (..., n, k, k)."""
    k = a.shape[-1]
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-3, -2, -1)) / k)


def uniform_norm_batch(a: np.ndarray, method: str = "auto") -> np.ndarray:
    """``max_j ||A_j||`` over (..., n, k, k)."""
    return np.max(opnorm_batch(a, method), axis=-1)


def hs_metric(t1: MatrixTuple, t2: MatrixTuple) -> float:
    _check_pair(t1, t2)
    return float(hs_norm_batch(t1.data - t2.data))


def uniform_metric(t1: MatrixTuple, t2: MatrixTuple, method: str = "auto") -> float:
    _check_pair(t1, t2)
    return float(uniform_norm_batch(t1.data - t2.data, method))


def block_diag(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Orthogonal sum of two stacks of square matrices (leading axes must match)."""
    k1, k2 = a.shape[-1], b.shape[-1]
    out = np.zeros(a.shape[:-2] + (k1 + k2, k1 + k2), dtype=np.result_type(a, b, complex))
    out[..., :k1, :k1] = a
    out[..., k1:, k1:] = b
    return out
