"""Ready-made constraint families.

* ``interval:a,b``   one variable with spectrum [a, b], pinned by Chebyshev
  polynomials of the interval up to degree d
* ``semicircular:n`` n free standard semicirculars: ``||X_j|| = 2`` and
  ``||sum_j c_j X_j|| = 2 |c|`` for chosen real vectors c
* ``contraction:n``  n self-adjoint contractions with ``||X_j|| = 1``
* ``ball:n[,R]``     no constraints at all; the norm ball of radius R is the
  natural sampling domain
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .microstates import MicrostateSpec
from .ncpoly import NCPolynomial

DEFAULT_DEGREE = 3


def chebyshev_poly(j: int, a: float, b: float) -> NCPolynomial:
    """``T_j((2x - a - b) / (b - a))`` in the variable X1."""
    coeffs = Chebyshev.basis(j, domain=[a, b]).convert(kind=Polynomial).coef
    return NCPolynomial.univariate([float(c) for c in coeffs], arity=1)


def interval(a: float, b: float, *, k: int, epsilon: float, degree: int = DEFAULT_DEGREE) -> MicrostateSpec:
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    extra = [(chebyshev_poly(j, a, b), 1.0) for j in range(1, degree + 1)]
    return MicrostateSpec.standard([max(abs(a), abs(b))], extra, epsilon=epsilon, k=k)


def semicircular(n: int, *, k: int, epsilon: float, combos: Sequence[Sequence[float]] = ()) -> MicrostateSpec:
    extra = []
    for c in combos:
        c = [float(v) for v in c]
        if len(c) != n:
            raise ValueError(f"combination {c} needs {n} coefficients")
        extra.append((NCPolynomial.linear(c, n), 2.0 * math.sqrt(sum(v * v for v in c))))
    return MicrostateSpec.standard([2.0] * n, extra, epsilon=epsilon, k=k)


def contraction(n: int, *, k: int, epsilon: float) -> MicrostateSpec:
    return MicrostateSpec.standard([1.0] * n, epsilon=epsilon, k=k)


def ball(n: int, *, k: int, epsilon: float, radius: float = 1.0) -> MicrostateSpec:
    return MicrostateSpec(n, 0, (), float(epsilon), int(k), float(radius))


def _numbers(body: str) -> list[float]:
    try:
        return [float(v) for v in body.split(",") if v.strip()]
    except ValueError as e:
        raise ValueError(f"bad preset arguments {body!r}") from e


def parse_preset(
    text: str,
    *,
    k: int,
    epsilon: float,
    degree: int = DEFAULT_DEGREE,
    combos: Sequence[Sequence[float]] = (),
) -> MicrostateSpec:
    name, _, body = text.partition(":")
    args = _numbers(body)
    if name == "interval" and len(args) == 2:
        return interval(args[0], args[1], k=k, epsilon=epsilon, degree=degree)
    if name in ("semicircular", "contraction") and len(args) == 1 and args[0] == int(args[0]) and args[0] >= 1:
        n = int(args[0])
        if name == "semicircular":
            return semicircular(n, k=k, epsilon=epsilon, combos=combos)
        return contraction(n, k=k, epsilon=epsilon)
    if name == "ball" and len(args) in (1, 2) and args[0] == int(args[0]) and args[0] >= 1:
        return ball(int(args[0]), k=k, epsilon=epsilon, radius=args[1] if len(args) == 2 else 1.0)
    raise ValueError(f"unknown preset {text!r}; expected interval:a,b | semicircular:n | contraction:n | ball:n[,R]")


def spectrum_of(text: str) -> list[tuple[float, float]] | None:
    """Spectrum of the single variable for one-variable presets, else None."""
    name, _, body = text.partition(":")
    args = _numbers(body)
    if name == "interval" and len(args) == 2:
        return [(args[0], args[1])]
    if name == "semicircular" and args == [1.0]:
        return [(-2.0, 2.0)]
    if name == "contraction" and args == [1.0]:
        return [(-1.0, 1.0)]
    return None


def semicircular_reference_norm(c: Sequence[float]) -> float:
    return 2.0 * float(np.linalg.norm(np.asarray(c, dtype=float)))
