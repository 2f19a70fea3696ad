"""Norm-microstate sets, trace-moment microstates and orthogonal sums.

A :class:`MicrostateSpec` describes the set of tuples
``(C_1..C_n, D_1..D_m)`` of Hermitian k x k matrices with
``| ||P_j(C, D)|| - target_j | <= eps`` for every constraint.  The one-sided
variant only asks for ``||P_j(C, D)|| <= target_j + eps``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from .linalg import MatrixTuple, ShapeError, block_diag, opnorm_batch
from .ncpoly import NCPolynomial, Word, eval_batch, format_poly, parse_poly, poly_norm_batch

DEFAULT_P_MAX = 20


@dataclass(frozen=True)
class Constraint:
    poly: NCPolynomial
    target: float

    def __post_init__(self) -> None:
        t = float(self.target)
        if not math.isfinite(t) or t < 0:
            raise ValueError(f"target norm must be finite and nonnegative, got {self.target}")
        object.__setattr__(self, "target", t)


@dataclass(frozen=True)
class MicrostateSpec:
    n: int
    m: int
    constraints: tuple[Constraint, ...]
    epsilon: float
    k: int
    M: float

    def __post_init__(self) -> None:
        if self.n < 1 or self.m < 0:
            raise ValueError("need n >= 1 and m >= 0")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be positive and finite")
        if not self.M > 0:
            raise ValueError("M must be positive")
        cons = tuple(self.constraints)
        for c in cons:
            if c.poly.arity != self.n + self.m:
                raise ValueError(f"constraint {c.poly} has arity {c.poly.arity}, expected {self.n + self.m}")
        object.__setattr__(self, "constraints", cons)

    @classmethod
    def standard(
        cls,
        coord_targets: Sequence[float],
        extra: Iterable[tuple[NCPolynomial, float]] = (),
        *,
        n: int | None = None,
        epsilon: float,
        k: int,
        M: float | None = None,
    ) -> MicrostateSpec:
        """Spec whose first constraints are the coordinates ``X_1..X_{n+m}``.

        ``coord_targets`` lists ``||a_1||..||a_n||, ||b_1||..||b_m||``; ``n``
        defaults to all of them being main variables.  ``M`` defaults to the
        largest coordinate target plus ``2 eps``.
        """
        a = len(coord_targets)
        n = a if n is None else n
        cons = [Constraint(NCPolynomial.variable(j + 1, a), t) for j, t in enumerate(coord_targets)]
        cons += [Constraint(p, t) for p, t in extra]
        if M is None:
            M = max(coord_targets) + 2 * epsilon
        return cls(n, a - n, tuple(cons), float(epsilon), int(k), float(M))

    @property
    def arity(self) -> int:
        return self.n + self.m

    @property
    def targets(self) -> np.ndarray:
        return np.array([c.target for c in self.constraints])

    def with_k(self, k: int) -> MicrostateSpec:
        return replace(self, k=int(k))

    def with_epsilon(self, epsilon: float) -> MicrostateSpec:
        return replace(self, epsilon=float(epsilon))

    def coordinate_bounds(self) -> np.ndarray | None:
        """Per-variable bounds ``||X_j|| <= r_j`` implied by ``c X_j`` constraints.

        Returns None if some variable is not bounded by any constraint.
        """
        bounds = np.full(self.arity, np.inf)
        for c in self.constraints:
            terms = c.poly.terms
            if len(terms) != 1:
                continue
            (w, coef), = terms.items()
            if len(w) == 1 and coef != 0:
                j = w[0] - 1
                bounds[j] = min(bounds[j], (c.target + self.epsilon) / abs(coef))
        return None if np.any(np.isinf(bounds)) else bounds

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "k": self.k,
            "epsilon": self.epsilon,
            "M": self.M,
            "constraints": [{"poly": format_poly(c.poly), "target": c.target} for c in self.constraints],
        }

    @classmethod
    def from_json(cls, obj: Mapping | str) -> MicrostateSpec:
        if isinstance(obj, str):
            obj = json.loads(obj)
        n, m = int(obj["n"]), int(obj.get("m", 0))
        cons = tuple(Constraint(parse_poly(c["poly"], n + m), float(c["target"])) for c in obj["constraints"])
        return cls(n, m, cons, float(obj["epsilon"]), int(obj["k"]), float(obj["M"]))


def _check_tuple(spec: MicrostateSpec, shape: tuple[int, ...]) -> None:
    if shape[-3] != spec.arity or shape[-1] != spec.k:
        raise ShapeError(f"tuple (n={shape[-3]}, k={shape[-1]}) does not match spec (n+m={spec.arity}, k={spec.k})")


def constraint_norms(spec: MicrostateSpec, x: np.ndarray, method: str = "auto") -> np.ndarray:
    """All constraint norms, shape (N, r), for a stack of tuples (N, n+m, k, k)."""
    _check_tuple(spec, x.shape)
    cols = [poly_norm_batch(c.poly, x, method) for c in spec.constraints]
    return np.stack(cols, axis=-1) if cols else np.zeros(x.shape[:-3] + (0,))


def membership_mask(spec: MicrostateSpec, x: np.ndarray, one_sided: bool = False, method: str = "auto") -> np.ndarray:
    """Boolean membership over a stack (N, n+m, k, k).

    Constraints are checked in order and samples that already failed are
    dropped, so putting cheap constraints first saves work.
    """
    x = np.asarray(x)
    _check_tuple(spec, x.shape)
    alive = np.ones(x.shape[0], dtype=bool)
    eps = spec.epsilon
    for c in spec.constraints:
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        v = poly_norm_batch(c.poly, x[idx], method)
        ok = v <= c.target + eps if one_sided else np.abs(v - c.target) <= eps
        alive[idx[~ok]] = False
    return alive


def is_microstate(spec: MicrostateSpec, t: MatrixTuple) -> bool:
    return bool(membership_mask(spec, t.data[None])[0])


def is_semi_microstate(spec: MicrostateSpec, t: MatrixTuple) -> bool:
    return bool(membership_mask(spec, t.data[None], one_sided=True)[0])


def project_presence(t: MatrixTuple, n: int) -> MatrixTuple:
    """Drop the presence variables: keep the first ``n`` components."""
    if not 1 <= n <= t.arity:
        raise ValueError(f"n must be in [1, {t.arity}], got {n}")
    return MatrixTuple(t.data[:n])


def direct_sum(t1: MatrixTuple, t2: MatrixTuple) -> MatrixTuple:
    """Componentwise orthogonal sum ``(A_j (+) B_j)_j``."""
    if t1.arity != t2.arity:
        raise ShapeError(f"arity mismatch: {t1.arity} vs {t2.arity}")
    return MatrixTuple(block_diag(t1.data, t2.data))


# ---------------------------------------------------------------------------
# trace-moment microstates


def _parse_word(w, arity: int) -> Word:
    if isinstance(w, str):
        p = parse_poly(w, arity)
        if len(p) != 1:
            raise ValueError(f"{w!r} is not a single word")
        (word, coef), = p.terms.items()
        if coef != 1:
            raise ValueError(f"{w!r} is not a bare word")
        return word
    word = tuple(int(i) for i in w)
    if any(not 1 <= i <= arity for i in word):
        raise ValueError(f"word {word} uses an index outside [1, {arity}]")
    return word


@dataclass(frozen=True)
class TraceSpec:
    """Targets for normalized traces of words, with a uniform norm bound ``M``."""

    arity: int
    moments: Mapping[Word, float]
    tolerance: float
    degree_cap: int
    M: float
    _words: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.arity < 1 or self.degree_cap < 1:
            raise ValueError("arity and degree_cap must be >= 1")
        if not self.tolerance > 0 or not self.M > 0:
            raise ValueError("tolerance and M must be positive")
        mom = {}
        for w, v in dict(self.moments).items():
            word = _parse_word(w, self.arity)
            if len(word) > self.degree_cap:
                raise ValueError(f"word {word} is longer than the degree cap {self.degree_cap}")
            if abs(v) > self.M ** len(word) * (1 + 1e-12):
                raise ValueError(f"|target| for {word} exceeds M^{len(word)}")
            mom[word] = complex(v) if isinstance(v, complex) else float(v)
        object.__setattr__(self, "moments", mom)
        object.__setattr__(self, "_words", tuple(mom))


def trace_moments(x: np.ndarray, words: Iterable[Word]) -> np.ndarray:
    """Normalized traces ``k^{-1} Tr w(x)`` for a stack (N, n, k, k); shape (N, len(words))."""
    x = np.asarray(x)
    k = x.shape[-1]
    n = x.shape[-3]
    cols = []
    for w in words:
        p = NCPolynomial(n, {tuple(w): 1.0})
        v = eval_batch(p, x)
        cols.append(np.trace(v, axis1=-2, axis2=-1) / k)
    return np.stack(cols, axis=-1) if cols else np.zeros(x.shape[:-3] + (0,), dtype=complex)


def trace_mask(ts: TraceSpec, x: np.ndarray, method: str = "auto") -> np.ndarray:
    x = np.asarray(x)
    if x.shape[-3] != ts.arity:
        raise ShapeError(f"tuple arity {x.shape[-3]} does not match trace spec arity {ts.arity}")
    ok = np.all(opnorm_batch(x, method) <= ts.M, axis=-1)
    idx = np.flatnonzero(ok)
    if idx.size and ts._words:
        tr = trace_moments(x[idx], ts._words)
        for j, w in enumerate(ts._words):
            if w == w[::-1]:
                # palindromic words are self-adjoint, so their traces are real
                assert np.all(np.abs(tr[:, j].imag) <= 1e-10 * max(1.0, ts.M ** len(w)))
        target = np.array([ts.moments[w] for w in ts._words])
        good = np.all(np.abs(tr - target) <= ts.tolerance, axis=-1)
        ok[idx[~good]] = False
    return ok


def is_trace_microstate(ts: TraceSpec, t: MatrixTuple) -> bool:
    return bool(trace_mask(ts, t.data[None])[0])


def all_words(arity: int, max_len: int) -> list[Word]:
    return [w for p in range(1, max_len + 1) for w in itertools.product(range(1, arity + 1), repeat=p)]


def moments_of(t: MatrixTuple, max_len: int) -> dict[Word, complex]:
    """Every normalized word trace of ``t`` up to length ``max_len`` (prefix reuse)."""
    k, n = t.dim, t.arity
    out: dict[Word, complex] = {}
    stack: list[tuple[Word, np.ndarray]] = [((i + 1,), t.data[i]) for i in range(n)]
    while stack:
        w, prod = stack.pop()
        out[w] = complex(np.trace(prod) / k)
        if len(w) < max_len:
            stack.extend((w + (i + 1,), prod @ t.data[i]) for i in range(n))
    return out


@lru_cache(maxsize=None)
def _free_semicircular(word: Word) -> int:
    # the first letter pairs with a later equal letter; non-crossing forces
    # the inside and outside blocks to factor
    if not word:
        return 1
    if len(word) % 2:
        return 0
    total = 0
    for j in range(1, len(word), 2):
        if word[j] == word[0]:
            total += _free_semicircular(word[1:j]) * _free_semicircular(word[j + 1 :])
    return total


def semicircular_moments(arity: int, max_len: int) -> dict[Word, float]:
    """Moments of a free family of standard semicircular variables."""
    return {w: float(_free_semicircular(w)) for w in all_words(arity, max_len)}


def tracestate_metric(
    mom1: Mapping[Word, complex],
    mom2: Mapping[Word, complex],
    M: float,
    arity: int,
    P_max: int = DEFAULT_P_MAX,
) -> float:
    """``sum_{p <= P_max} (2 M arity)^{-p} sum_{|w| = p} |mom1(w) - mom2(w)|``."""
    if not M > 0 or arity < 1 or P_max < 1:
        raise ValueError("need M > 0, arity >= 1, P_max >= 1")
    total = 0.0
    scale = 1.0 / (2.0 * M * arity)
    for p in range(1, P_max + 1):
        s = 0.0
        for w in itertools.product(range(1, arity + 1), repeat=p):
            try:
                s += abs(mom1[w] - mom2[w])
            except KeyError as e:
                raise ValueError(f"moment map is missing word {w}") from e
        total += scale**p * s
    return total


def tracestate_tail_bound(P_max: int) -> float:
    """Bound on the dropped terms when all moments satisfy ``|tau(w)| <= M^{|w|}``."""
    return 2.0 ** (1 - P_max)
