"""Homogeneous multivariate polynomial arithmetic with two coefficient backends.

Coefficients are either double-precision ``complex`` (the default backend for
all analytic work) or :class:`GaussianRational` (exact Gaussian rationals, used
by the exact Cayley-Bacharach path where the statement is an algebraic
identity).  Polynomials are stored as dense exponent maps: a dict from the
exponent multi-index (one entry per variable) to a nonzero coefficient.  The
zero polynomial is the empty map.

Two carrier types:

* :class:`HomogeneousPoly` -- n+1 homogeneous variables ``z0..zn``; every
  stored multi-index sums exactly to ``degree``.
* :class:`AffinePoly` -- n chart variables, no degree constraint; produced by
  :meth:`HomogeneousPoly.dehomogenize` and consumed by the numeric layers.

The input grammar (see :func:`parse_poly`): variables ``z0``..``z9``, operators
``+ - * ^``, parentheses, complex literals ``a``, ``bi``, ``a+bi`` with decimal
or rational (``p/q``) components, whitespace insignificant.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

import numpy as np

__all__ = [
    "PolyError",
    "ParseError",
    "InhomogeneousError",
    "GaussianRational",
    "HomogeneousPoly",
    "AffinePoly",
    "parse_poly",
    "monomials_of_degree",
]


class PolyError(ValueError):
    """Base class for polynomial construction/parsing failures."""


class ParseError(PolyError):
    """Syntax error; carries the 0-based position in the input text."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class InhomogeneousError(PolyError):
    """Monomials of differing total degree in a homogeneous context."""


@dataclass(frozen=True)
class GaussianRational:
    """Exact complex number a + b*i with rational a, b."""

    re: Fraction
    im: Fraction = Fraction(0)

    @staticmethod
    def of(re, im=0) -> "GaussianRational":
        return GaussianRational(Fraction(re), Fraction(im))

    def __add__(self, other):
        other = _as_gauss(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-_as_gauss(other))

    def __rsub__(self, other):
        return _as_gauss(other) + (-self)

    def __mul__(self, other):
        other = _as_gauss(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = _as_gauss(other)
        den = other.re * other.re + other.im * other.im
        if den == 0:
            raise ZeroDivisionError("division by zero GaussianRational")
        return GaussianRational(
            (self.re * other.re + self.im * other.im) / den,
            (self.im * other.re - self.re * other.im) / den,
        )

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __bool__(self) -> bool:
        return self.re != 0 or self.im != 0

    def to_complex(self) -> complex:
        return complex(self.re) + 1j * complex(self.im)

    def __str__(self) -> str:
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}i"
        sign = "+" if self.im >= 0 else "-"
        return f"{self.re}{sign}{abs(self.im)}i"


def _as_gauss(x) -> GaussianRational:
    if isinstance(x, GaussianRational):
        return x
    if isinstance(x, (int, Fraction)):
        return GaussianRational(Fraction(x))
    raise TypeError(f"cannot coerce {type(x).__name__} to GaussianRational")


Coeff = Union[complex, GaussianRational]
Expo = tuple


def _canonical(terms: Mapping) -> dict:
    return {e: c for e, c in terms.items() if c}


class _PolyBase:
    """Shared arithmetic for exponent-map polynomials (backend-agnostic)."""

    __slots__ = ("num_vars", "terms", "_cache")

    def __init__(self, num_vars: int, terms: Mapping):
        self.num_vars = int(num_vars)
        self.terms = _canonical(terms)
        self._cache = None
        for e in self.terms:
            if len(e) != self.num_vars:
                raise PolyError(f"exponent {e} does not match num_vars={num_vars}")

    def is_zero(self) -> bool:
        return not self.terms

    def _add_maps(self, other):
        if self.num_vars != other.num_vars:
            raise PolyError("variable-count mismatch")
        out = dict(self.terms)
        for e, c in other.terms.items():
            s = out.get(e)
            out[e] = c if s is None else s + c
        return _canonical(out)

    def _mul_maps(self, other):
        if self.num_vars != other.num_vars:
            raise PolyError("variable-count mismatch")
        out: dict = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e)
                p = c1 * c2
                out[e] = p if s is None else s + p
        return _canonical(out)

    def _scale_map(self, c):
        if not c:
            return {}
        return {e: c * v for e, v in self.terms.items()}

    def eval(self, z) -> Coeff:
        """Evaluate at a point (sequence of scalars, one per variable)."""
        if len(z) != self.num_vars:
            raise PolyError(
                f"point has {len(z)} coordinates, polynomial has {self.num_vars} variables"
            )
        total = None
        for e, c in self.terms.items():
            v = c
            for zi, k in zip(z, e):
                for _ in range(k):
                    v = v * zi
            total = v if total is None else total + v
        if total is None:
            return 0j if not isinstance(self._sample_coeff(), GaussianRational) else GaussianRational.of(0)
        return total

    def _sample_coeff(self):
        for c in self.terms.values():
            return c
        return 0j

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and self.num_vars == other.num_vars
            and self.terms == other.terms
        )

    def __hash__(self):
        return hash((type(self).__name__, self.num_vars, frozenset(self.terms.items())))


class AffinePoly(_PolyBase):
    """Polynomial in n affine chart variables w_1..w_n (no degree constraint)."""

    def __add__(self, other: "AffinePoly") -> "AffinePoly":
        return AffinePoly(self.num_vars, self._add_maps(other))

    def __sub__(self, other: "AffinePoly") -> "AffinePoly":
        return self + other.scale(-1)

    def __mul__(self, other: "AffinePoly") -> "AffinePoly":
        return AffinePoly(self.num_vars, self._mul_maps(other))

    def scale(self, c) -> "AffinePoly":
        return AffinePoly(self.num_vars, self._scale_map(c))

    @staticmethod
    def constant(num_vars: int, c) -> "AffinePoly":
        return AffinePoly(num_vars, {(0,) * num_vars: c})

    @staticmethod
    def coordinate(num_vars: int, k: int, c=1.0 + 0j) -> "AffinePoly":
        e = [0] * num_vars
        e[k] = 1
        return AffinePoly(num_vars, {tuple(e): c})

    def partial(self, k: int) -> "AffinePoly":
        if not 0 <= k < self.num_vars:
            raise PolyError(f"variable index {k} out of range")
        out: dict = {}
        for e, c in self.terms.items():
            if e[k] == 0:
                continue
            ne = list(e)
            ne[k] -= 1
            out[tuple(ne)] = c * e[k]
        return AffinePoly(self.num_vars, out)

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def _arrays(self):
        if self._cache is None:
            expos = np.array(sorted(self.terms), dtype=np.int64).reshape(len(self.terms), self.num_vars)
            coeffs = np.array([complex(_to_c(self.terms[tuple(e)])) for e in expos], dtype=np.complex128)
            self._cache = (expos, coeffs)
        return self._cache

    def eval_batch(self, W: np.ndarray) -> np.ndarray:
        """Evaluate at a batch of points, shape (N, num_vars) -> (N,)."""
        W = np.asarray(W, dtype=np.complex128)
        if self.is_zero():
            return np.zeros(W.shape[0], dtype=np.complex128)
        expos, coeffs = self._arrays()
        monos = np.prod(W[:, None, :] ** expos[None, :, :], axis=2)
        return monos @ coeffs


def _to_c(c) -> complex:
    return c.to_complex() if isinstance(c, GaussianRational) else complex(c)


class HomogeneousPoly(_PolyBase):
    """Homogeneous polynomial in num_vars variables; each term sums to degree."""

    __slots__ = ("degree",)

    def __init__(self, num_vars: int, degree: int, terms: Mapping):
        super().__init__(num_vars, terms)
        self.degree = int(degree)
        if self.degree < 0:
            raise PolyError("degree must be >= 0")
        for e in self.terms:
            if sum(e) != self.degree:
                raise InhomogeneousError(
                    f"monomial {e} has degree {sum(e)}, expected {self.degree}"
                )

    def __add__(self, other: "HomogeneousPoly") -> "HomogeneousPoly":
        deg = self._join_degree(other)
        return HomogeneousPoly(self.num_vars, deg, self._add_maps(other))

    def __sub__(self, other: "HomogeneousPoly") -> "HomogeneousPoly":
        return self + other.scale(-1)

    def __mul__(self, other: "HomogeneousPoly") -> "HomogeneousPoly":
        return HomogeneousPoly(self.num_vars, self.degree + other.degree, self._mul_maps(other))

    def scale(self, c) -> "HomogeneousPoly":
        return HomogeneousPoly(self.num_vars, self.degree, self._scale_map(c))

    def _join_degree(self, other) -> int:
        # Zero polynomials are degree-compatible with anything.
        if self.is_zero():
            return other.degree
        if other.is_zero():
            return self.degree
        if self.degree != other.degree:
            raise InhomogeneousError(
                f"cannot add degree {self.degree} and degree {other.degree}"
            )
        return self.degree

    def partial(self, k: int) -> "HomogeneousPoly":
        if not 0 <= k < self.num_vars:
            raise PolyError(f"variable index {k} out of range")
        out: dict = {}
        for e, c in self.terms.items():
            if e[k] == 0:
                continue
            ne = list(e)
            ne[k] -= 1
            out[tuple(ne)] = c * e[k]
        return HomogeneousPoly(self.num_vars, max(self.degree - 1, 0), out)

    def dehomogenize(self, chart: int) -> AffinePoly:
        """Chart trivialization: Q(w) = P(z)/z_chart^degree under w_j = z_j/z_chart."""
        if not 0 <= chart < self.num_vars:
            raise PolyError(f"chart index {chart} out of range")
        out: dict = {}
        for e, c in self.terms.items():
            ne = tuple(v for i, v in enumerate(e) if i != chart)
            s = out.get(ne)
            out[ne] = c if s is None else s + c
        return AffinePoly(self.num_vars - 1, out)

    def conjugate_coefficients(self) -> "HomogeneousPoly":
        conj = {
            e: (c.conjugate() if isinstance(c, GaussianRational) else complex(c).conjugate())
            for e, c in self.terms.items()
        }
        return HomogeneousPoly(self.num_vars, self.degree, conj)

    def to_text(self) -> str:
        """Canonical grammar string; parse(to_text()) reproduces the term map."""
        if not self.terms:
            return "0"
        parts = []
        for e in sorted(self.terms, reverse=True):
            c = self.terms[e]
            factors = [_coeff_text(c)]
            for i, k in enumerate(e):
                if k == 1:
                    factors.append(f"z{i}")
                elif k > 1:
                    factors.append(f"z{i}^{k}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    def __repr__(self):
        return f"HomogeneousPoly({self.num_vars} vars, deg {self.degree}, {self.to_text()!r})"


def _coeff_text(c) -> str:
    if isinstance(c, GaussianRational):
        return f"({c})"
    c = complex(c)
    if c.imag == 0:
        return f"({c.real!r})"
    if c.real == 0:
        return f"({c.imag!r}i)"
    sign = "+" if c.imag >= 0 else "-"
    return f"({c.real!r}{sign}{abs(c.imag)!r}i)"


def monomials_of_degree(num_vars: int, degree: int) -> list:
    """All exponent multi-indices of the given total degree, lexicographic."""
    if num_vars == 1:
        return [(degree,)]
    out = []
    for k in range(degree, -1, -1):
        for rest in monomials_of_degree(num_vars - 1, degree - k):
            out.append((k,) + rest)
    return out


# --------------------------------------------------------------------------
# Parser: tokenizer + recursive descent over the grammar in the module doc.
# --------------------------------------------------------------------------

_TOK_NUM = "num"
_TOK_VAR = "var"
_TOK_OP = "op"
_TOK_END = "end"


def _tokenize(text: str):
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "+-*^()":
            tokens.append((_TOK_OP, ch, i))
            i += 1
            continue
        if ch == "z":
            if i + 1 < n and text[i + 1].isdigit():
                tokens.append((_TOK_VAR, int(text[i + 1]), i))
                i += 2
                continue
            raise ParseError("variable must be z followed by a single digit", i)
        if ch.isdigit() or ch == ".":
            start = i
            while i < n and (text[i].isdigit() or text[i] == "."):
                i += 1
            num = text[start:i]
            if num.count(".") > 1:
                raise ParseError(f"malformed number {num!r}", start)
            denom = None
            if i < n and text[i] == "/":
                i += 1
                dstart = i
                while i < n and text[i].isdigit():
                    i += 1
                denom = text[dstart:i]
                if not denom:
                    raise ParseError("missing denominator after '/'", dstart)
            imag = False
            if i < n and text[i] == "i":
                imag = True
                i += 1
            tokens.append((_TOK_NUM, (num, denom, imag), start))
            continue
        if ch == "i":
            tokens.append((_TOK_NUM, ("1", None, True), i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i)
    tokens.append((_TOK_END, None, n))
    return tokens


class _Parser:
    """Recursive descent over: expr := term (('+'|'-') term)*,
    term := unary ('*' unary)*, unary := '-' unary | atom ('^' INT)?,
    atom := NUMBER | VAR | '(' expr ')'.

    Produces intermediate (num_vars+1)-variable maps carrying inhomogeneous
    sums; homogeneity is checked at the top level.
    """

    def __init__(self, tokens, num_vars: int, exact: bool):
        self.tokens = tokens
        self.pos = 0
        self.num_vars = num_vars
        self.exact = exact

    def peek(self):
        return self.tokens[self.pos]

    def next(self):
        t = self.tokens[self.pos]
        self.pos += 1
        return t

    def expect_op(self, op: str):
        kind, val, p = self.next()
        if kind != _TOK_OP or val != op:
            raise ParseError(f"expected {op!r}", p)

    def one(self):
        return GaussianRational.of(1) if self.exact else (1.0 + 0j)

    def _number(self, spec) -> Coeff:
        num, denom, imag = spec
        if self.exact:
            mag = Fraction(num) if denom is None else Fraction(num) / Fraction(int(denom))
            return GaussianRational(Fraction(0), mag) if imag else GaussianRational(mag)
        mag = float(Fraction(num)) if denom is None else float(Fraction(num) / Fraction(int(denom)))
        return complex(0.0, mag) if imag else complex(mag, 0.0)

    def parse(self) -> dict:
        result = self.expr()
        kind, _, p = self.peek()
        if kind != _TOK_END:
            raise ParseError("trailing input", p)
        return result

    def expr(self) -> dict:
        acc = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == _TOK_OP and val in "+-":
                self.next()
                rhs = self.term()
                if val == "-":
                    rhs = {e: -c for e, c in rhs.items()}
                for e, c in rhs.items():
                    s = acc.get(e)
                    acc[e] = c if s is None else s + c
                acc = {e: c for e, c in acc.items() if c}
            else:
                return acc

    def term(self) -> dict:
        acc = self.unary()
        while True:
            kind, val, _ = self.peek()
            if kind == _TOK_OP and val == "*":
                self.next()
                rhs = self.unary()
                out: dict = {}
                for e1, c1 in acc.items():
                    for e2, c2 in rhs.items():
                        e = tuple(a + b for a, b in zip(e1, e2))
                        s = out.get(e)
                        p = c1 * c2
                        out[e] = p if s is None else s + p
                acc = {e: c for e, c in out.items() if c}
            else:
                return acc

    def unary(self) -> dict:
        kind, val, _ = self.peek()
        if kind == _TOK_OP and val == "-":
            self.next()
            inner = self.unary()
            return {e: -c for e, c in inner.items()}
        return self.power()

    def power(self) -> dict:
        base = self.atom()
        kind, val, p = self.peek()
        if kind == _TOK_OP and val == "^":
            self.next()
            kind, val, p = self.next()
            if kind != _TOK_NUM or val[1] is not None or val[2]:
                raise ParseError("exponent must be a nonnegative integer", p)
            try:
                expo = int(val[0])
            except ValueError:
                raise ParseError("exponent must be a nonnegative integer", p) from None
            acc = {(0,) * self.num_vars: self.one()}
            for _ in range(expo):
                out: dict = {}
                for e1, c1 in acc.items():
                    for e2, c2 in base.items():
                        e = tuple(a + b for a, b in zip(e1, e2))
                        s = out.get(e)
                        pr = c1 * c2
                        out[e] = pr if s is None else s + pr
                acc = {e: c for e, c in out.items() if c}
            return acc
        return base

    def atom(self) -> dict:
        kind, val, p = self.next()
        if kind == _TOK_NUM:
            c = self._number(val)
            return {(0,) * self.num_vars: c} if c else {}
        if kind == _TOK_VAR:
            if val >= self.num_vars:
                raise ParseError(
                    f"variable z{val} out of range for {self.num_vars} variables", p
                )
            e = [0] * self.num_vars
            e[val] = 1
            return {tuple(e): self.one()}
        if kind == _TOK_OP and val == "(":
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise ParseError("expected number, variable or '('", p)


def parse_poly(text: str, num_vars: int, backend: str = "float") -> HomogeneousPoly:
    """Parse a homogeneous polynomial from the grammar.

    ``backend`` selects the coefficient field: "float" for complex doubles,
    "exact" for Gaussian rationals.  Raises :class:`ParseError` on syntax
    errors (with position) and :class:`InhomogeneousError` when monomials have
    differing total degree.
    """
    if backend not in ("float", "exact"):
        raise PolyError(f"unknown backend {backend!r}")
    if not 1 <= num_vars <= 10:
        raise PolyError("num_vars must be between 1 and 10")
    tokens = _tokenize(text)
    terms = _Parser(tokens, num_vars, exact=(backend == "exact")).parse()
    degrees = {sum(e) for e in terms}
    if len(degrees) > 1:
        raise InhomogeneousError(
            f"mixed total degrees {sorted(degrees)} in {text!r}"
        )
    degree = degrees.pop() if degrees else 0
    return HomogeneousPoly(num_vars, degree, terms)
