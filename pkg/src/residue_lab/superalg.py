"""Pointwise graded multilinear algebra on fibers of Omega^{(i,j)}(L^k V (x) L^l V*).

An element is a complex linear combination of basis monomials

    dw_I ^ dwbar_J ^ e_K ^ e*_L          (I, J, K, L strictly increasing)

over slot indices 1..n, stored sparsely as a map from the index quadruple to
the coefficient.  All four generator families are odd; canonical order is
holomorphic forms, antiholomorphic forms, vector slots, covector slots, with
Koszul signs from stable reordering.  The dual pairing is normalized by
(e_K, e*_L) = delta_{K,L} on increasing tuples, with the form factors of the
two arguments wedged left-to-right.

The contraction operator is defined by the adjunction

    (u . theta, nu*) = (-1)^{(i+j)l + (p+q)#u + l(l-1)/2} (u, theta ^ nu*)

for u in Omega^{(i,j)}(L^k V), theta in Omega^{(p,q)}(L^l V*), k >= l, and all
nu* in L^{k-l} V*, where #u = i+j+k is the total degree of u.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Dict, Tuple

__all__ = [
    "SuperTensor",
    "SForm",
    "wedge",
    "dual_pair",
    "contract",
    "exp_S",
    "top_pairing",
    "DegreeError",
]

Idx = Tuple[int, ...]
Basis = Tuple[Idx, Idx, Idx, Idx]


class DegreeError(ValueError):
    """Slot-degree precondition violated (dimension or grading mismatch)."""


def _merge(a: Idx, b: Idx):
    """Merge two strictly increasing tuples; returns (merged, sign) or None
    on index collision.  Sign is the parity of the interleaving shuffle."""
    out = []
    sign = 1
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] == b[j]:
            return None
        if a[i] < b[j]:
            out.append(a[i])
            i += 1
        else:
            # b[j] jumps over the remaining len(a)-i elements of a
            if (len(a) - i) % 2:
                sign = -sign
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out), sign


@dataclass
class SuperTensor:
    """Sparse fiber element; ``data`` maps (I, J, K, L) to a complex coefficient."""

    n: int
    data: Dict[Basis, complex] = field(default_factory=dict)

    def __post_init__(self):
        for key in self.data:
            self._check_key(key)
        self.data = {k: complex(v) for k, v in self.data.items() if v != 0}

    def _check_key(self, key: Basis):
        for tup in key:
            if any(not 1 <= t <= self.n for t in tup):
                raise DegreeError(f"slot index out of range in {key} (n={self.n})")
            if any(tup[i] >= tup[i + 1] for i in range(len(tup) - 1)):
                raise DegreeError(f"non-increasing slot tuple in {key}")

    @staticmethod
    def scalar(n: int, c: complex) -> "SuperTensor":
        return SuperTensor(n, {((), (), (), ()): complex(c)})

    @staticmethod
    def monomial(n: int, I=(), J=(), K=(), L=(), c: complex = 1.0) -> "SuperTensor":
        return SuperTensor(n, {(tuple(I), tuple(J), tuple(K), tuple(L)): complex(c)})

    def blocks(self):
        """Set of populated (i, j, k, l) block signatures."""
        return {tuple(len(t) for t in key) for key in self.data}

    def coeff(self, I=(), J=(), K=(), L=()) -> complex:
        return self.data.get((tuple(I), tuple(J), tuple(K), tuple(L)), 0j)

    def add(self, other: "SuperTensor") -> "SuperTensor":
        if self.n != other.n:
            raise DegreeError("dimension mismatch")
        out = dict(self.data)
        for k, v in other.data.items():
            out[k] = out.get(k, 0j) + v
        return SuperTensor(self.n, out)

    def scale(self, c: complex) -> "SuperTensor":
        return SuperTensor(self.n, {k: c * v for k, v in self.data.items()})

    def norm(self) -> float:
        return math.sqrt(sum(abs(v) ** 2 for v in self.data.values()))

    def __repr__(self):
        items = ", ".join(f"{k}: {v:.4g}" for k, v in sorted(self.data.items()))
        return f"SuperTensor(n={self.n}, {{{items}}})"


def wedge(a: SuperTensor, b: SuperTensor) -> SuperTensor:
    """Graded product; Koszul sign from reordering all four slot families."""
    if a.n != b.n:
        raise DegreeError("dimension mismatch")
    out: Dict[Basis, complex] = {}
    for (Ia, Ja, Ka, La), ca in a.data.items():
        pa_tail_J = len(Ja) + len(Ka) + len(La)
        pa_tail_K = len(Ka) + len(La)
        pa_tail_L = len(La)
        for (Ib, Jb, Kb, Lb), cb in b.data.items():
            # cross sign: each slot family of b passes a's later families
            cross = len(Ib) * pa_tail_J + len(Jb) * pa_tail_K + len(Kb) * pa_tail_L
            m = _merge(Ia, Ib)
            if m is None:
                continue
            I, s1 = m
            m = _merge(Ja, Jb)
            if m is None:
                continue
            J, s2 = m
            m = _merge(Ka, Kb)
            if m is None:
                continue
            K, s3 = m
            m = _merge(La, Lb)
            if m is None:
                continue
            L, s4 = m
            sign = s1 * s2 * s3 * s4 * (-1 if cross % 2 else 1)
            key = (I, J, K, L)
            out[key] = out.get(key, 0j) + sign * ca * cb
    return SuperTensor(a.n, out)


def dual_pair(u: SuperTensor, t: SuperTensor) -> SuperTensor:
    """Pairing of L^k V against L^k V* values; form factors wedge in argument
    order.  Result is a scalar-valued form (K = L = () blocks only)."""
    if u.n != t.n:
        raise DegreeError("dimension mismatch")
    ku = {len(key[2]) for key in u.data}
    lt = {len(key[3]) for key in t.data}
    if u.data and t.data and ku != lt:
        raise DegreeError(f"V-degree {sorted(ku)} of u does not match V*-degree {sorted(lt)} of t")
    out: Dict[Basis, complex] = {}
    for (Iu, Ju, Ku, Lu), cu in u.data.items():
        if Lu:
            raise DegreeError("first pairing argument must carry no V* slots")
        for (It, Jt, Kt, Lt), ct in t.data.items():
            if Kt:
                raise DegreeError("second pairing argument must carry no V slots")
            if Ku != Lt:
                continue
            # (dw_Iu dwbar_Ju) ^ (dw_It dwbar_Jt): It passes Ju
            cross = len(It) * len(Ju)
            m = _merge(Iu, It)
            if m is None:
                continue
            I, s1 = m
            m = _merge(Ju, Jt)
            if m is None:
                continue
            J, s2 = m
            sign = s1 * s2 * (-1 if cross % 2 else 1)
            key = (I, J, (), ())
            out[key] = out.get(key, 0j) + sign * cu * ct
    return SuperTensor(u.n, out)


def contract(u: SuperTensor, theta: SuperTensor) -> SuperTensor:
    """The adjoint contraction u . theta defined in the module docstring.

    u must be purely V-valued, theta purely V*-valued; any populated pair with
    V-degree strictly below the V*-degree violates the precondition.
    """
    if u.n != theta.n:
        raise DegreeError("dimension mismatch")
    for key in u.data:
        if key[3]:
            raise DegreeError("contract: u must carry no V* slots")
    for key in theta.data:
        if key[2]:
            raise DegreeError("contract: theta must carry no V slots")
    out: Dict[Basis, complex] = {}
    for (Iu, Ju, Ku, _), cu in u.data.items():
        i, j, k = len(Iu), len(Ju), len(Ku)
        sharp_u = i + j + k
        for (It, Jt, _, Lt), ct in theta.data.items():
            p, q, l = len(It), len(Jt), len(Lt)
            if l > k:
                raise DegreeError(
                    f"contract: theta V*-degree {l} exceeds u V-degree {k}"
                )
            if not set(Lt) <= set(Ku):
                continue
            M = tuple(x for x in Ku if x not in Lt)
            # sigma1: theta ^ e*_M appends M to theta's L slots
            m = _merge(Lt, M)
            if m is None:
                continue
            _, s_append = m
            # sigma2: form wedge of u's factors with theta's
            cross = p * j
            m = _merge(Iu, It)
            if m is None:
                continue
            I, s1 = m
            m = _merge(Ju, Jt)
            if m is None:
                continue
            J, s2 = m
            exp_adj = (i + j) * l + (p + q) * sharp_u + l * (l - 1) // 2
            sign = s_append * s1 * s2
            sign *= -1 if (cross + exp_adj) % 2 else 1
            key = (I, J, M, ())
            out[key] = out.get(key, 0j) + sign * cu * ct
    return SuperTensor(u.n, out)


@dataclass
class SForm:
    """The scaled superconnection datum: a (0,0) scalar plus a (0,1,0,1) block.

    ``one_form`` maps (b, p) -> coefficient of dwbar_b (x) e*_p.  Both parts
    are already divided by 2t by the geometry layer.
    """

    n: int
    scalar_part: complex
    one_form: Dict[Tuple[int, int], complex] = field(default_factory=dict)

    def one_form_tensor(self) -> SuperTensor:
        data = {((), (b,), (), (p,)): complex(c) for (b, p), c in self.one_form.items() if c}
        return SuperTensor(self.n, data)


def exp_S(S: SForm) -> SuperTensor:
    """exp(scalar) * sum_p (one_form)^p / p!; truncates at p = n because the
    (0,1) form factor is nilpotent beyond top antiholomorphic degree."""
    S1 = S.one_form_tensor()
    term = SuperTensor.scalar(S.n, 1.0)
    acc = term
    for p in range(1, S.n + 1):
        term = wedge(term, S1).scale(1.0 / p)
        if not term.data:
            break
        acc = acc.add(term)
    return acc.scale(cmath.exp(S.scalar_part))


def top_pairing(psi: SuperTensor, E: SuperTensor) -> complex:
    """The (n,n) scalar component of contract(psi, E), as the coefficient of
    dw_1..dw_n ^ dwbar_1..dwbar_n.

    psi must populate exactly the (n,0,n,0) block (a K_M (x) det V fiber).
    """
    n = psi.n
    full = tuple(range(1, n + 1))
    for (I, J, K, L), _ in psi.data.items():
        if (I, J, K, L) != (full, (), full, ()):
            raise DegreeError("psi must be of pure block (n,0,n,0)")
    res = contract(psi, E)
    return res.coeff(I=full, J=full)
