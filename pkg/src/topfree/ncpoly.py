"""Noncommutative polynomials in self-adjoint indeterminates X1..Xn.

A polynomial is a finite map from words (tuples of 1-based indeterminate
indices; ``()`` is the constant word) to complex coefficients.  Text form::

    poly  := term (('+' | '-') term)*
    term  := coeff ('*' word)? | word
    word  := VAR ('*' VAR)*
    VAR   := 'X' INT
    coeff := REAL | '(' REAL ',' REAL ')' | 'i' | REAL '*' 'i'

Whitespace is insignificant; a leading sign on the first term is accepted.
"""

from __future__ import annotations

import re
from typing import Iterator, Mapping

import numpy as np

from .linalg import MatrixTuple, ShapeError, eigvalsh

Word = tuple[int, ...]

MAX_DEGREE = 32


class PolyParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class NCPolynomial:
    """Canonical noncommutative polynomial; immutable."""

    __slots__ = ("_arity", "_terms")

    def __init__(self, arity: int, terms: Mapping[Word, complex] | None = None):
        if arity < 1:
            raise ValueError("arity must be >= 1")
        clean: dict[Word, complex] = {}
        for word, c in (terms or {}).items():
            word = tuple(int(i) for i in word)
            for i in word:
                if not 1 <= i <= arity:
                    raise ValueError(f"index X{i} out of range for arity {arity}")
            c = complex(c)
            if c != 0:
                clean[word] = clean.get(word, 0) + c
        self._arity = arity
        self._terms = {w: c for w, c in sorted(clean.items(), key=lambda kv: (len(kv[0]), kv[0])) if c != 0}

    # construction helpers

    @classmethod
    def constant(cls, c: complex, arity: int) -> NCPolynomial:
        return cls(arity, {(): c})

    @classmethod
    def variable(cls, j: int, arity: int) -> NCPolynomial:
        return cls(arity, {(j,): 1.0})

    @classmethod
    def linear(cls, coeffs, arity: int | None = None) -> NCPolynomial:
        coeffs = list(coeffs)
        return cls(arity or len(coeffs), {(j + 1,): c for j, c in enumerate(coeffs)})

    @classmethod
    def univariate(cls, power_coeffs, arity: int = 1, var: int = 1) -> NCPolynomial:
        """``sum_p c_p X_var^p`` from power-basis coefficients (lowest first)."""
        return cls(arity, {(var,) * p: c for p, c in enumerate(power_coeffs)})

    # accessors

    @property
    def arity(self) -> int:
        return self._arity

    @property
    def terms(self) -> dict[Word, complex]:
        return dict(self._terms)

    @property
    def degree(self) -> int:
        return max((len(w) for w in self._terms), default=0)

    def __iter__(self) -> Iterator[tuple[Word, complex]]:
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def adjoint(self) -> NCPolynomial:
        return NCPolynomial(self._arity, {w[::-1]: c.conjugate() for w, c in self._terms.items()})

    def is_self_adjoint(self) -> bool:
        return self.adjoint() == self

    # algebra

    def _coerce(self, other) -> NCPolynomial:
        if isinstance(other, NCPolynomial):
            if other.arity != self.arity:
                raise ShapeError(f"arity mismatch: {self.arity} vs {other.arity}")
            return other
        return NCPolynomial.constant(complex(other), self._arity)

    def __add__(self, other) -> NCPolynomial:
        other = self._coerce(other)
        terms = dict(self._terms)
        for w, c in other:
            terms[w] = terms.get(w, 0) + c
        return NCPolynomial(self._arity, terms)

    __radd__ = __add__

    def __neg__(self) -> NCPolynomial:
        return NCPolynomial(self._arity, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other) -> NCPolynomial:
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> NCPolynomial:
        return self._coerce(other) - self

    def __mul__(self, other) -> NCPolynomial:
        if not isinstance(other, NCPolynomial):
            c = complex(other)
            return NCPolynomial(self._arity, {w: c * v for w, v in self._terms.items()})
        other = self._coerce(other)
        terms: dict[Word, complex] = {}
        for w1, c1 in self:
            for w2, c2 in other:
                w = w1 + w2
                terms[w] = terms.get(w, 0) + c1 * c2
        return NCPolynomial(self._arity, terms)

    def __rmul__(self, other) -> NCPolynomial:
        c = complex(other)
        return NCPolynomial(self._arity, {w: c * v for w, v in self._terms.items()})

    def __eq__(self, other) -> bool:
        if not isinstance(other, NCPolynomial):
            return NotImplemented
        return self._arity == other._arity and self._terms == other._terms

    def __hash__(self) -> int:
        return hash((self._arity, tuple(self._terms.items())))

    def __repr__(self) -> str:
        return f"NCPolynomial({str(self)!r}, arity={self._arity})"

    def __str__(self) -> str:
        return format_poly(self)


# ---------------------------------------------------------------------------
# printing and parsing


def _fmt_real(x: float) -> str:
    return repr(float(x))


def format_poly(p: NCPolynomial) -> str:
    """Canonical text; ``parse_poly(format_poly(p), p.arity) == p``."""
    if not len(p):
        return "0"
    parts: list[str] = []
    for w, c in p:
        word = "*".join(f"X{i}" for i in w)
        if c.imag == 0:
            sign = "-" if c.real < 0 else "+"
            mag = abs(c.real)
            if word:
                body = word if mag == 1.0 else f"{_fmt_real(mag)}*{word}"
            else:
                body = _fmt_real(mag)
        else:
            sign = "+"
            coeff = f"({_fmt_real(c.real)},{_fmt_real(c.imag)})"
            body = f"{coeff}*{word}" if word else coeff
        if not parts:
            parts.append(body if sign == "+" else f"-{body}")
        else:
            parts.append(f"{sign} {body}")
    return " ".join(parts)


_TOKEN = re.compile(
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|X(?P<idx>\d+)|(?P<i>i)(?![A-Za-z0-9_])|(?P<op>[-+*(),])"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos == len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise PolyParseError(f"unexpected character {text[pos]!r}", pos)
        if m.group("num") is not None:
            tokens.append(("num", m.group("num"), pos))
        elif m.group("idx") is not None:
            tokens.append(("var", "X" + m.group("idx"), pos))
        elif m.group("i") is not None:
            tokens.append(("i", "i", pos))
        else:
            tokens.append((m.group("op"), m.group("op"), pos))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str, arity: int):
        self.tokens = _tokenize(text)
        self.pos = 0
        self.arity = arity

    def peek(self, offset: int = 0) -> tuple[str, str, int]:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def take(self, kind: str) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind:
            raise PolyParseError(f"expected {kind!r}, found {tok[1] or 'end of input'!r}", tok[2])
        self.pos += 1
        return tok

    def signed_real(self) -> float:
        sign = 1.0
        if self.peek()[0] in ("+", "-"):
            sign = -1.0 if self.take(self.peek()[0])[0] == "-" else 1.0
        return sign * float(self.take("num")[1])

    def word(self) -> Word:
        out = []
        while True:
            _, name, at = self.take("var")
            j = int(name[1:])
            if not 1 <= j <= self.arity:
                raise PolyParseError(f"index X{j} out of range for arity {self.arity}", at)
            out.append(j)
            if self.peek()[0] == "*" and self.peek(1)[0] == "var":
                self.pos += 1
                continue
            return tuple(out)

    def term(self) -> tuple[Word, complex]:
        kind, _, at = self.peek()
        if kind == "var":
            return self.word(), 1.0
        if kind == "num":
            c: complex = float(self.take("num")[1])
            if self.peek()[0] == "*" and self.peek(1)[0] == "i":
                self.pos += 2
                c = 1j * c
        elif kind == "i":
            self.pos += 1
            c = 1j
        elif kind == "(":
            self.pos += 1
            re_ = self.signed_real()
            self.take(",")
            im = self.signed_real()
            self.take(")")
            c = complex(re_, im)
        else:
            raise PolyParseError(f"expected a term, found {self.peek()[1] or 'end of input'!r}", at)
        if self.peek()[0] == "*":
            if self.peek(1)[0] != "var":
                raise PolyParseError("expected a variable after '*'", self.peek(1)[2])
            self.pos += 1
            return self.word(), c
        return (), c

    def poly(self) -> dict[Word, complex]:
        terms: dict[Word, complex] = {}
        sign = 1.0
        if self.peek()[0] in ("+", "-"):
            sign = -1.0 if self.take(self.peek()[0])[0] == "-" else 1.0
        while True:
            w, c = self.term()
            terms[w] = terms.get(w, 0) + sign * c
            kind = self.peek()[0]
            if kind in ("+", "-"):
                self.pos += 1
                sign = -1.0 if kind == "-" else 1.0
                continue
            self.take("end")
            return terms


def parse_poly(text: str, arity: int) -> NCPolynomial:
    """Parse the text form into a canonical :class:`NCPolynomial`."""
    if arity < 1:
        raise ValueError("arity must be >= 1")
    if not text.strip():
        raise PolyParseError("empty polynomial", 0)
    terms = _Parser(text, arity).poly()
    deg = max((len(w) for w in terms), default=0)
    if deg > MAX_DEGREE:
        raise PolyParseError(f"degree {deg} exceeds the cap of {MAX_DEGREE}", 0)
    return NCPolynomial(arity, terms)


# ---------------------------------------------------------------------------
# evaluation


def _check_arity(p: NCPolynomial, n: int) -> None:
    if p.arity != n:
        raise ShapeError(f"polynomial has arity {p.arity}, tuple has arity {n}")


def eval_batch(p: NCPolynomial, x: np.ndarray) -> np.ndarray:
    """Evaluate on a stack of tuples ``x`` of shape (..., n, k, k) -> (..., k, k).

    Words are walked depth-first through a prefix trie so shared prefixes
    are multiplied once.
    """
    x = np.asarray(x)
    _check_arity(p, x.shape[-3])
    k = x.shape[-1]
    out = np.zeros(x.shape[:-3] + (k, k), dtype=complex)
    trie: dict = {}
    for w, c in p:
        node = trie
        for i in w:
            node = node.setdefault(i, {})
        node[None] = c
    if None in trie:
        idx = np.arange(k)
        out[..., idx, idx] += trie[None]
    stack = [(x[..., i - 1, :, :], child) for i, child in trie.items() if i is not None]
    while stack:
        prod, node = stack.pop()
        if None in node:
            out += node[None] * prod
        for i, child in node.items():
            if i is not None:
                stack.append((prod @ x[..., i - 1, :, :], child))
    return out


def eval_poly(p: NCPolynomial, t: MatrixTuple) -> np.ndarray:
    return eval_batch(p, t.data)


def poly_norm_batch(p: NCPolynomial, x: np.ndarray, method: str = "auto") -> np.ndarray:
    """Operator norms ``||P(x)||`` over a stack of tuples.

    Self-adjoint polynomials use the Hermitian value directly; otherwise the
    norm is ``sqrt(||P(x)* P(x)||)``.
    """
    v = eval_batch(p, x)
    if p.is_self_adjoint():
        h = 0.5 * (v + np.conj(np.swapaxes(v, -1, -2)))
        lam = eigvalsh(h, method)
        return np.maximum(-lam[..., 0], lam[..., -1])
    g = np.conj(np.swapaxes(v, -1, -2)) @ v
    g = 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))
    lam = eigvalsh(g, method)
    return np.sqrt(np.maximum(lam[..., -1], 0.0))


def poly_norm_at(p: NCPolynomial, t: MatrixTuple, method: str = "auto") -> float:
    return float(poly_norm_batch(p, t.data, method))


def adjoint_poly(p: NCPolynomial) -> NCPolynomial:
    return p.adjoint()
