"""Geometry of (P^n, V = O(d_1) (+) ... (+) O(d_n), h, s, psi) in affine charts.

Conventions (fixed here, exercised by the chart-invariance and normalization
tests):

* Chart trivialization: a degree-d section F corresponds on chart U_a to
  F(z)/z_a^d.
* Inner product: <u, v> = sum_{ij} H_ij u_i conj(v_j), linear in the first
  slot.  The covector field <., s> therefore has frame components
  sum_j H_pj conj(s_j).  Because the pairing is linear in the *first* slot,
  the Chern connection matrix is G^{-1} dG with G = H^T (the transposed Gram
  matrix); for the diagonal Fubini-Study metric the transpose is invisible.
* Fubini-Study weight on O(d): (1 + |w|^2)^{-d}.
* Perturbed metric: FS diagonal plus H_ab = eps conj(f) q (1+|w|^2)^{-(d_a+d_b)}
  at the ordered pair (a, b) and its conjugate at (b, a), with deg q = d_b and
  f the section component whose zero set the perturbation must respect.  The
  off-diagonal vanishes on {f = 0}, so orthogonality of the splitting holds on
  the zero locus while the curvature acquires off-diagonal blocks there.
* The top-form coefficient of psi of degree D = sum d_i - n - 1 on chart U_0
  is H(1,w) dw_1 ^ ... ^ dw_n (x) e_1 ^ ... ^ e_n; transitions carry the chart
  Jacobian times prod (z_0/z_a)^{d_i}.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .chartfun import ChartFunction
from .polycore import AffinePoly, HomogeneousPoly
from .superalg import SForm

__all__ = [
    "BundleSpec",
    "SectionSpec",
    "PsiSpec",
    "MetricSpec",
    "ProjPoint",
    "CurvatureValue",
    "GeometryContext",
    "Example22Geometry",
    "GeometryError",
    "fs_uniform_points",
    "chart_coords",
    "point_from_chart",
    "transition_jacobian",
    "fs_density",
]


class GeometryError(ValueError):
    """Configuration violates a geometric precondition."""


@dataclass(frozen=True)
class BundleSpec:
    """V = O(d_1) (+) ... (+) O(d_n) on P^n with rank V = dim M = n."""

    n: int
    degrees: Tuple[int, ...]

    def __post_init__(self):
        if len(self.degrees) != self.n:
            raise GeometryError("rank of V must equal dim M")
        if any(d < 1 for d in self.degrees):
            raise GeometryError("all summand degrees must be >= 1")

    @property
    def psi_degree(self) -> int:
        return sum(self.degrees) - self.n - 1


@dataclass(frozen=True)
class SectionSpec:
    """Holomorphic section s = (s_1, ..., s_n), s_i of degree d_i."""

    components: Tuple[HomogeneousPoly, ...]

    def validate(self, bundle: BundleSpec):
        if len(self.components) != bundle.n:
            raise GeometryError("section must have one component per summand")
        for s, d in zip(self.components, bundle.degrees):
            if s.num_vars != bundle.n + 1:
                raise GeometryError("section components must use n+1 homogeneous variables")
            if not s.is_zero() and s.degree != d:
                raise GeometryError(f"component degree {s.degree} != summand degree {d}")
        if all(s.is_zero() for s in self.components):
            raise GeometryError("section must not be identically zero")


@dataclass(frozen=True)
class PsiSpec:
    """Top-form twist datum: H of degree D = sum d_i - n - 1."""

    H: HomogeneousPoly

    def validate(self, bundle: BundleSpec):
        D = bundle.psi_degree
        if D < 0:
            raise GeometryError(
                f"sum of degrees {sum(bundle.degrees)} leaves no room for a top-form "
                f"twist on P^{bundle.n} (required degree {D} < 0)"
            )
        if not self.H.is_zero() and self.H.degree != D:
            raise GeometryError(f"psi degree {self.H.degree} != required {D}")


@dataclass(frozen=True)
class MetricSpec:
    """Hermitian metric family on V: Fubini-Study or rank-two perturbation."""

    kind: str = "fubini_study"
    epsilon: float = 0.0
    pair: Optional[Tuple[int, int]] = None
    q: Optional[HomogeneousPoly] = None
    f_index: int = 0

    def __post_init__(self):
        if self.kind not in ("fubini_study", "perturbed"):
            raise GeometryError(f"unknown metric kind {self.kind!r}")
        if self.kind == "perturbed":
            if self.epsilon <= 0:
                raise GeometryError("perturbation strength must be positive")
            if self.pair is None or self.q is None:
                raise GeometryError("perturbed metric requires pair and q")


@dataclass(frozen=True)
class ProjPoint:
    """Point of P^n with preferred-chart bookkeeping (chart of maximal |z_a|)."""

    z: Tuple[complex, ...]
    chart: int

    @staticmethod
    def of(z: Sequence[complex]) -> "ProjPoint":
        z = tuple(complex(v) for v in z)
        if all(v == 0 for v in z):
            raise GeometryError("projective point needs a nonzero coordinate")
        chart = int(np.argmax([abs(v) for v in z]))
        return ProjPoint(z, chart)

    def affine(self, chart: Optional[int] = None) -> np.ndarray:
        chart = self.chart if chart is None else chart
        if self.z[chart] == 0:
            raise GeometryError(f"point not visible in chart {chart}")
        return chart_coords(np.asarray(self.z, dtype=complex), chart)


@dataclass
class CurvatureValue:
    """Chern curvature at a point: coef[i, j, a, b] is the e_i (x) e*_j
    component along dw_a ^ dwbar_b in the active chart."""

    n: int
    coef: np.ndarray  # shape (rank, rank, n, n)

    def block(self, i: int, j: int) -> np.ndarray:
        return self.coef[i, j]


# ------------------------------------------------------------------ charts


def chart_coords(z: np.ndarray, chart: int) -> np.ndarray:
    """Affine coordinates w_j = z_j / z_chart (j != chart, increasing j)."""
    z = np.asarray(z, dtype=complex)
    w = z / z[chart]
    return np.delete(w, chart)


def point_from_chart(w: Sequence[complex], chart: int) -> np.ndarray:
    """Homogeneous coordinates with 1 inserted at the chart index."""
    w = list(w)
    return np.asarray(w[:chart] + [1.0 + 0j] + w[chart:], dtype=complex)


def transition_jacobian(w_from: Sequence[complex], from_chart: int, to_chart: int, n: int) -> np.ndarray:
    """Jacobian matrix d(w_to)/d(w_from) of the chart transition at a point.

    Rows follow the to-chart coordinate order (j != to_chart increasing),
    columns the from-chart order.
    """
    z = point_from_chart(w_from, from_chart)
    if z[to_chart] == 0:
        raise GeometryError("point not visible in target chart")
    from_idx = [j for j in range(n + 1) if j != from_chart]
    to_idx = [j for j in range(n + 1) if j != to_chart]
    zb = z[to_chart]
    J = np.zeros((n, n), dtype=complex)
    for r, j in enumerate(to_idx):
        for c, k in enumerate(from_idx):
            # w'_j = z_j / z_b with z_k the from-chart coordinates
            d = 0j
            if j == k:
                d += 1.0 / zb
            if k == to_chart:
                d -= z[j] / zb**2
            J[r, c] = d
    return J


def fs_uniform_points(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """FS-uniform sample of P^n as raw homogeneous Gaussian vectors (count, n+1)."""
    re = rng.standard_normal((count, n + 1))
    im = rng.standard_normal((count, n + 1))
    return re + 1j * im


def fs_density(W: np.ndarray, n: int) -> np.ndarray:
    """Density of the FS-uniform law against Lebesgue in any affine chart:
    n! / (pi^n (1+|w|^2)^{n+1}).  Shape (N, n) -> (N,)."""
    import math

    norm2 = 1.0 + np.sum(W.real**2 + W.imag**2, axis=1)
    return math.factorial(n) / (np.pi**n * norm2 ** (n + 1))


# ------------------------------------------------------------------ context


@dataclass
class _ChartData:
    chart: int
    s_aff: List[AffinePoly]
    psi_aff: Optional[AffinePoly]
    H: List[List[ChartFunction]]  # metric entries, pairing convention
    xi: List[ChartFunction]  # <., s> components: xi_p = sum_q H_pq conj(s_q)
    s_norm2: ChartFunction
    Abar: List[List[ChartFunction]]  # Abar[b][p] = dbar_b xi_p (unscaled)
    G: List[List[ChartFunction]] = field(default_factory=list)  # H^T for curvature
    dG: Optional[list] = None
    dbarG: Optional[list] = None
    d2G: Optional[list] = None


class GeometryContext:
    """All chart-level data for one (bundle, metric, section, psi) instance.

    Chart data is assembled lazily per chart and cached.  Every derivative
    used downstream is exact (see :mod:`residue_lab.chartfun`).
    """

    PD_SAMPLES = 1000
    _PD_SEED = 0x5EED

    def __init__(
        self,
        bundle: BundleSpec,
        section: SectionSpec,
        metric: MetricSpec,
        psi: Optional[PsiSpec] = None,
        certify: bool = True,
    ):
        section.validate(bundle)
        if psi is not None:
            psi.validate(bundle)
        if metric.kind == "perturbed":
            a, b = metric.pair
            if not (0 <= a < bundle.n and 0 <= b < bundle.n and a != b):
                raise GeometryError("perturbation pair must be two distinct summands")
            if metric.q.degree != bundle.degrees[b]:
                raise GeometryError(
                    f"perturbation q must have degree {bundle.degrees[b]} (got {metric.q.degree})"
                )
            if not (0 <= metric.f_index < bundle.n):
                raise GeometryError("f_index out of range")
        self.bundle = bundle
        self.section = section
        self.metric = metric
        self.psi = psi
        self._charts = {}
        if metric.kind == "perturbed" and certify:
            self._certify_positive()

    # -------------------------------------------------------- chart assembly

    @property
    def n(self) -> int:
        return self.bundle.n

    def chart_data(self, chart: int) -> _ChartData:
        if chart not in self._charts:
            self._charts[chart] = self._build_chart(chart)
        return self._charts[chart]

    def _build_chart(self, chart: int) -> _ChartData:
        n = self.n
        degs = self.bundle.degrees
        s_aff = [s.dehomogenize(chart) for s in self.section.components]
        # the (-1)^chart is the canonical-bundle orientation: the coordinate
        # Jacobian from chart 0 to chart a is (-1)^a w_a^{-(n+1)}, and the
        # plain dehomogenization supplies only the w_a power
        psi_aff = None
        if self.psi is not None:
            psi_aff = self.psi.H.dehomogenize(chart).scale((-1.0) ** chart)

        H = [[ChartFunction.zero(n) for _ in range(n)] for _ in range(n)]
        for i in range(n):
            H[i][i] = ChartFunction.from_parts(n, weight=-degs[i])
        if self.metric.kind == "perturbed":
            a, b = self.metric.pair
            f_aff = self.section.components[self.metric.f_index].dehomogenize(chart)
            q_aff = self.metric.q.dehomogenize(chart)
            off = ChartFunction.from_parts(
                n,
                hol=q_aff,
                anti=f_aff,
                weight=-(degs[a] + degs[b]),
                coef=self.metric.epsilon,
            )
            H[a][b] = H[a][b] + off
            H[b][a] = H[b][a] + off.conjugate()

        xi = []
        for p in range(n):
            acc = ChartFunction.zero(n)
            for q_ in range(n):
                if s_aff[q_].is_zero():
                    continue
                acc = acc + H[p][q_].mul_anti(s_aff[q_])
            xi.append(acc)
        s_norm2 = ChartFunction.zero(n)
        for p in range(n):
            if s_aff[p].is_zero():
                continue
            s_norm2 = s_norm2 + xi[p].mul_hol(s_aff[p])
        Abar = [[xi[p].dbar(bb) for p in range(n)] for bb in range(n)]

        data = _ChartData(chart, s_aff, psi_aff, H, xi, s_norm2, Abar)
        data.G = [[H[j][i] for j in range(n)] for i in range(n)]
        return data

    def _curvature_functions(self, chart: int):
        data = self.chart_data(chart)
        if data.dG is None:
            n = self.n
            data.dG = [[[data.G[i][j].d(a) for j in range(n)] for i in range(n)] for a in range(n)]
            data.dbarG = [
                [[data.G[i][j].dbar(b) for j in range(n)] for i in range(n)] for b in range(n)
            ]
            data.d2G = [
                [[[data.dG[a][i][j].dbar(b) for j in range(n)] for i in range(n)] for b in range(n)]
                for a in range(n)
            ]
        return data

    # -------------------------------------------------------- evaluations

    def metric_matrix(self, chart: int, w: Sequence[complex]) -> np.ndarray:
        """Hermitian metric H(w) in the pairing convention of the module doc."""
        return self.metric_matrix_batch(chart, np.asarray(w, dtype=complex).reshape(1, -1))[0]

    def metric_matrix_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        data = self.chart_data(chart)
        n = self.n
        N = W.shape[0]
        out = np.zeros((N, n, n), dtype=complex)
        for i in range(n):
            for j in range(n):
                if data.H[i][j].terms:
                    out[:, i, j] = data.H[i][j].eval_batch(W)
        return out

    def s_value_and_norm(self, chart: int, w: Sequence[complex]):
        """(s_i(w) in the chart frame, |s|^2(w))."""
        data = self.chart_data(chart)
        w = np.asarray(w, dtype=complex)
        values = np.array([s.eval(list(w)) if not s.is_zero() else 0j for s in data.s_aff])
        norm2 = data.s_norm2.eval(w)
        return values, float(norm2.real)

    def S_form(self, chart: int, w: Sequence[complex], t: float) -> SForm:
        """Superconnection datum scaled by 1/(2t): scalar -|s|^2/2t and
        one-form -(1/2t) dbar <., s>."""
        if t <= 0:
            raise GeometryError("t must be positive")
        data = self.chart_data(chart)
        w = np.asarray(w, dtype=complex)
        scal = -data.s_norm2.eval(w) / (2.0 * t)
        one = {}
        for b in range(self.n):
            for p in range(self.n):
                c = data.Abar[b][p].eval(w)
                if c != 0:
                    one[(b + 1, p + 1)] = -c / (2.0 * t)
        return SForm(self.n, scal, one)

    def sbar_matrix_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        """Unscaled dbar<., s> as (N, n, n) with [b, p] = dbar_b xi_p."""
        data = self.chart_data(chart)
        n = self.n
        out = np.zeros((W.shape[0], n, n), dtype=complex)
        for b in range(n):
            for p in range(n):
                if data.Abar[b][p].terms:
                    out[:, b, p] = data.Abar[b][p].eval_batch(W)
        return out

    def s_norm2_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        return self.chart_data(chart).s_norm2.eval_batch(W).real

    def psi_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        data = self.chart_data(chart)
        if data.psi_aff is None:
            raise GeometryError("this instance carries no psi")
        return data.psi_aff.eval_batch(W)

    def chern_curvature(self, chart: int, w: Sequence[complex]) -> CurvatureValue:
        coef = self.chern_curvature_batch(chart, np.asarray(w, dtype=complex).reshape(1, -1))[0]
        return CurvatureValue(self.n, coef)

    def chern_curvature_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        """Curvature of the Chern connection, shape (N, rank, rank, n, n):
        out[s, i, j, a, b] along dw_a ^ dwbar_b.

        Computed from exact derivatives of G = H^T:
        R[a][b] = G^{-1}(dbar_b G) G^{-1}(d_a G) - G^{-1}(d_a dbar_b G).
        """
        data = self._curvature_functions(chart)
        n = self.n
        N = W.shape[0]

        def ev(mat):
            out = np.zeros((N, n, n), dtype=complex)
            for i in range(n):
                for j in range(n):
                    if mat[i][j].terms:
                        out[:, i, j] = mat[i][j].eval_batch(W)
            return out

        G = ev(data.G)
        Ginv = np.linalg.inv(G)
        out = np.zeros((N, n, n, n, n), dtype=complex)
        for a in range(n):
            dGa = ev(data.dG[a])
            for b in range(n):
                dbGb = ev(data.dbarG[b])
                d2 = ev(data.d2G[a][b])
                term = Ginv @ dbGb @ Ginv @ dGa - Ginv @ d2
                out[:, :, :, a, b] = term
        return out

    def ds_matrix(self, chart: int, w: Sequence[complex]) -> np.ndarray:
        """Jacobian d(s_aff)/dw, rows = components, columns = chart variables."""
        data = self.chart_data(chart)
        w = list(np.asarray(w, dtype=complex))
        n = self.n
        J = np.zeros((n, n), dtype=complex)
        for i, s in enumerate(data.s_aff):
            if s.is_zero():
                continue
            for k in range(n):
                J[i, k] = s.partial(k).eval(w)
        return J

    # -------------------------------------------------------- certification

    def _certify_positive(self):
        rng = np.random.default_rng(np.random.Philox(self._PD_SEED))
        Z = fs_uniform_points(self.n, self.PD_SAMPLES, rng)
        charts = np.argmax(np.abs(Z), axis=1)
        worst = np.inf
        for chart in range(self.n + 1):
            mask = charts == chart
            if not mask.any():
                continue
            W = np.delete(Z[mask] / Z[mask, chart][:, None], chart, axis=1)
            H = self.metric_matrix_batch(chart, W)
            eigs = np.linalg.eigvalsh(0.5 * (H + np.conj(np.swapaxes(H, 1, 2))))
            worst = min(worst, float(eigs.min()))
        if worst <= 0:
            raise GeometryError(
                f"perturbed metric is not positive definite (min eigenvalue {worst:.3e}); "
                "reduce epsilon"
            )
        self.pd_margin = worst


# ------------------------------------------------------------- Example 2.2


class Example22Geometry:
    """The split-section instance on P^2: V = O(d) (+) O(k), s = (f, 0).

    The zero locus is the plane curve Z = {f = 0}; ds identifies the normal
    bundle with the f-summand L, and the complementary summand V_1 survives as
    the cokernel.  Supported at desk scale with rank-one L and V_1 only.
    """

    def __init__(self, ctx: GeometryContext, tol: float = 1e-8):
        if ctx.n != 2:
            raise GeometryError("the split-section family is supported on P^2 only")
        nonzero = [i for i, s in enumerate(ctx.section.components) if not s.is_zero()]
        if len(nonzero) != 1:
            raise GeometryError("section must be (f, 0) up to summand order")
        self.ctx = ctx
        self.f_index = nonzero[0]
        self.v_index = 1 - self.f_index
        self.f = ctx.section.components[self.f_index]
        if ctx.metric.kind == "perturbed" and ctx.metric.f_index != self.f_index:
            raise GeometryError("metric perturbation must vanish on the section curve")
        self.tol = tol

    def f_aff(self, chart: int) -> AffinePoly:
        return self.ctx.chart_data(chart).s_aff[self.f_index]

    def certify_smooth_curve(self, solver) -> bool:
        """No common zero of the partial derivatives of f on any chart
        (with f itself, by the homogeneous Euler relation)."""
        F = self.f
        if F.degree == 1:
            return True
        parts = [F.partial(k) for k in range(3)]
        for chart in range(3):
            polys = [p.dehomogenize(chart) for k, p in enumerate(parts) if k != chart]
            if any(p.is_zero() for p in polys):
                # F misses a variable entirely; degree >= 2 makes the apex singular
                return False
            if any(p.degree() == 0 for p in polys):
                continue  # nonvanishing constant partial: no common zero here
            zs = solver(polys)
            third = parts[chart].dehomogenize(chart)
            for pt in zs:
                if abs(third.eval(list(pt))) < self.tol:
                    return False
        return True

    def tangent(self, chart: int, w: Sequence[complex], base: int, normal: int) -> complex:
        """Sheet slope kappa = dw_normal/dw_base = -f_base/f_normal on Z."""
        f = self.f_aff(chart)
        w = list(np.asarray(w, dtype=complex))
        fn = f.partial(normal).eval(w)
        if abs(fn) < 1e-12:
            raise GeometryError("vanishing normal derivative (branch point)")
        return -f.partial(base).eval(w) / fn

    def psi_over_det_ds(self, chart: int, w: Sequence[complex], base: int = 0) -> complex:
        """Coefficient of the curve form against dw_base (x) e_{V_1}:
        psi / (df applied to the normal direction), restricted to Z."""
        normal = 1 - base
        data = self.ctx.chart_data(chart)
        if data.psi_aff is None:
            raise GeometryError("instance carries no psi")
        w = list(np.asarray(w, dtype=complex))
        fn = self.f_aff(chart).partial(normal).eval(w)
        if abs(fn) < 1e-12:
            raise GeometryError("vanishing normal derivative (branch point)")
        sign = 1.0 if (base, normal) == (0, 1) else -1.0
        # dw_base ^ dw_normal = sign * dw_0 ^ dw_1; psi is attached to dw_0 ^ dw_1
        return sign * data.psi_aff.eval(w) / fn

    def curvature_term(self, chart: int, w: Sequence[complex], base: int = 0) -> complex:
        """The End(N)-scalar of the localized curvature contraction, as the
        coefficient against dwbar_base (x) e*_{V_1}:

            r = -R^{L<-V_1}(nu, taubar) / df(nu),

        with nu the normal coordinate direction and tau the sheet tangent.
        The first curvature slot takes the normal vector, the second the
        conjugated tangent; feeding the first slot with a tangent vector
        contributes nothing (well-definedness, tested separately).
        """
        return complex(
            self.curvature_term_batch(chart, np.asarray(w, dtype=complex).reshape(1, -1), base)[0]
        )

    def curvature_term_batch(self, chart: int, W: np.ndarray, base: int = 0) -> np.ndarray:
        normal = 1 - base
        f = self.f_aff(chart)
        fb = f.partial(base).eval_batch(W)
        fn = f.partial(normal).eval_batch(W)
        kappa = -fb / fn
        R = self.ctx.chern_curvature_batch(chart, W)
        # R(nu, taubar) = sum_b R[normal][b] conj(tau_b); tau_base = 1, tau_normal = kappa
        block = R[:, self.f_index, self.v_index, normal, :]
        val = block[:, base] + block[:, normal] * np.conj(kappa)
        return -val / fn

    def tangent_tangent_block(self, chart: int, w: Sequence[complex], base: int = 0) -> complex:
        """Curvature block with tangent vectors in both slots; vanishes on Z."""
        normal = 1 - base
        w_arr = np.asarray(w, dtype=complex).reshape(1, -1)
        f = self.f_aff(chart)
        kappa = self.tangent(chart, list(w), base, normal)
        R = self.ctx.chern_curvature_batch(chart, w_arr)[0, self.f_index, self.v_index]
        tau = np.zeros(2, dtype=complex)
        tau[base], tau[normal] = 1.0, kappa
        return complex(tau @ R @ np.conj(tau))
