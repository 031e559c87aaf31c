"""Monte Carlo and quadrature verification of the residue integral identities.

Global integrand.  For psi = P dw_1..dw_n (x) e_1..e_n and the scaled
superconnection datum S/2t (scalar -|s|^2/2t, one-form A = -(1/2t) dbar<.,s>),
the only term of psi . e^{S/2t} reaching form bidegree (n, n) is the top
wedge power of the one-form, and the coefficient collapses to a determinant:

    coeff(dw_1..dw_n ^ dwbar_1..dwbar_n) = e^{-|s|^2/2t} (-1)^n P det(A).

Converting to Lebesgue measure (dw_1..dw_n ^ dwbar_1..dwbar_n =
(-1)^{n(n-1)/2} (-2i)^n prod dx_k dy_k) and applying the (-1)^n/(2 pi i)^n
prefactor leaves the real-measure density

    g = (-1)^{n(n+1)/2} / pi^n * e^{-|s|^2/2t} P det(A),

which the flat one-dimensional Gaussian oracle pins to unit local mass.  The
tensor-algebra route (superalg.top_pairing) computes the same coefficient and
the agreement is tested; the determinant form is the vectorized production
path.

Curve term.  For the split-section family on P^2 the localized integrand per
sheet of Z = {f = 0} over the base coordinate is

    (phi . (-2 pi i)(1 - r))^{(1,1)} * prefactor = (phi_c r_c / pi) dx dy,

with phi_c = psi / (df applied to the normal direction) and r_c the
End(N)-scalar curvature term of :meth:`Example22Geometry.curvature_term`.
"""

from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .polycore import AffinePoly
from .projgeom import Example22Geometry, GeometryContext, GeometryError, fs_density, fs_uniform_points
from .superalg import SForm, SuperTensor, contract, exp_S, top_pairing

__all__ = [
    "IntegralEstimate",
    "CurveTerm",
    "FlatModel",
    "flat_gaussian_mass",
    "virtual_residue_mc",
    "virtual_residue_sweep",
    "local_mass",
    "det_N_inverse_term",
    "curve_localized_term",
    "fiber_mass_quadrature",
]

_CHUNK = 1 << 14


@dataclass(frozen=True)
class IntegralEstimate:
    value: complex
    std_error: float
    samples: int
    t: float
    seed: int


@dataclass(frozen=True)
class CurveTerm:
    value: complex
    std_error: float
    component_id: str
    samples: int
    seed: int
    rejected: int
    pointwise_max: float
    l1_mass: float


class FlatModel:
    """Flat-metric model on C^n (h = identity); same batch interface as
    GeometryContext, used by the normalization oracle and tests."""

    def __init__(self, s_aff: Sequence[AffinePoly], psi_aff: AffinePoly):
        self.n = s_aff[0].num_vars
        self.s_aff = list(s_aff)
        self.psi_aff = psi_aff

    def s_norm2_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        total = np.zeros(W.shape[0])
        for s in self.s_aff:
            total += np.abs(s.eval_batch(W)) ** 2
        return total

    def sbar_matrix_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        # xi_p = conj(s_p); dbar_b xi_p = conj(d_b s_p)
        n = self.n
        out = np.zeros((W.shape[0], n, n), dtype=complex)
        for p, s in enumerate(self.s_aff):
            for b in range(n):
                out[:, b, p] = np.conj(s.partial(b).eval_batch(W))
        return out

    def psi_batch(self, chart: int, W: np.ndarray) -> np.ndarray:
        return self.psi_aff.eval_batch(W)

    def S_form(self, chart: int, w, t: float) -> SForm:
        W = np.asarray(w, dtype=complex).reshape(1, -1)
        scal = -self.s_norm2_batch(chart, W)[0] / (2 * t)
        A = self.sbar_matrix_batch(chart, W)[0]
        one = {}
        for b in range(self.n):
            for p in range(self.n):
                if A[b, p] != 0:
                    one[(b + 1, p + 1)] = -A[b, p] / (2 * t)
        return SForm(self.n, scal, one)


def _density_prefactor(n: int) -> float:
    return (-1.0) ** (n * (n + 1) // 2) / math.pi**n


def global_density(ctx, chart: int, W: np.ndarray, t: float) -> np.ndarray:
    """Real-measure density g of the prefactored (n,n) integrand (module doc)."""
    n = ctx.n
    s2 = ctx.s_norm2_batch(chart, W)
    Abar = ctx.sbar_matrix_batch(chart, W)
    psi = ctx.psi_batch(chart, W)
    detA = np.linalg.det(-Abar / (2.0 * t))
    return _density_prefactor(n) * np.exp(-s2 / (2.0 * t)) * psi * detA


def global_density_tensor(ctx, chart: int, w, t: float) -> complex:
    """Same density through the tensor-algebra route; reference path."""
    n = ctx.n
    full = tuple(range(1, n + 1))
    W = np.asarray(w, dtype=complex).reshape(1, -1)
    psi_c = complex(ctx.psi_batch(chart, W)[0])
    psi = SuperTensor.monomial(n, I=full, K=full, c=psi_c)
    E = exp_S(ctx.S_form(chart, np.asarray(w, dtype=complex), t))
    coeff = top_pairing(psi, E)
    # (n,n)-basis to Lebesgue: interleave sign and (-2i)^n, then prefactor
    conv = (-1.0) ** (n * (n - 1) // 2) * (-2j) ** n
    pref = (-1.0) ** n / (2j * math.pi) ** n
    return complex(pref * conv * coeff)


def _mean_and_stderr(x: np.ndarray) -> Tuple[complex, float]:
    mean = complex(x.mean())
    if len(x) < 2:
        return mean, float("inf")
    var = float(np.mean(np.abs(x - mean) ** 2))
    return mean, math.sqrt(var / (len(x) - 1))


def _run_chunks(worker, count: int, threads: int) -> np.ndarray:
    """Evaluate worker(start, stop) over fixed chunks; identical results for
    any thread count because chunk boundaries and merge order are fixed."""
    spans = [(s, min(s + _CHUNK, count)) for s in range(0, count, _CHUNK)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda sp: worker(*sp), spans))
    else:
        parts = [worker(*sp) for sp in spans]
    return np.concatenate(parts)


# ------------------------------------------------------------------ oracle


def flat_gaussian_mass(t: float, radial_nodes: int = 120, angular_nodes: int = 32) -> float:
    """Unit-mass normalization oracle: s = w, psi = dw (x) e_1, flat metric.

    Integrates the pipeline integrand over C by polar quadrature; the exact
    value is 1 for every t > 0, which pins every sign and constant convention
    at once.
    """
    model = FlatModel(
        [AffinePoly.coordinate(1, 0)], AffinePoly.constant(1, 1.0 + 0j)
    )
    R = 10.0 * math.sqrt(2.0 * t)
    nodes, weights = np.polynomial.legendre.leggauss(radial_nodes)
    r = 0.5 * R * (nodes + 1.0)
    wr = 0.5 * R * weights
    thetas = 2.0 * math.pi * np.arange(angular_nodes) / angular_nodes
    wth = 2.0 * math.pi / angular_nodes
    total = 0.0
    for theta in thetas:
        w = r * cmath.exp(1j * theta)
        dens = np.array(
            [global_density_tensor(model, 0, [wi], t) for wi in w]
        )
        total += float(np.sum(dens.real * r * wr)) * wth
    return total


# ------------------------------------------------------------------ global MC


def virtual_residue_sweep(
    ctx: GeometryContext,
    ts: Sequence[float],
    samples: int,
    seed: int,
    threads: int = 1,
) -> List[IntegralEstimate]:
    """FS-uniform Monte Carlo of the prefactored global integral for several
    values of t, reusing one sample set and one chart evaluation pass."""
    if samples < 1000:
        raise GeometryError("at least 1000 samples required")
    for t in ts:
        if t <= 0:
            raise GeometryError("t must be positive")
    n = ctx.n

    def worker(start: int, stop: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.Philox(key=seed, counter=start << 64))
        count = stop - start
        Z = fs_uniform_points(n, count, rng)
        charts = np.argmax(np.abs(Z), axis=1)
        out = np.zeros((len(ts), count), dtype=complex)
        for chart in range(n + 1):
            mask = charts == chart
            if not mask.any():
                continue
            W = np.delete(Z[mask] / Z[mask, chart][:, None], chart, axis=1)
            dens = fs_density(W, n)
            s2 = ctx.s_norm2_batch(chart, W)
            detAbar = np.linalg.det(ctx.sbar_matrix_batch(chart, W))
            psi = ctx.psi_batch(chart, W)
            pref = _density_prefactor(n)
            for k, t in enumerate(ts):
                g = pref * np.exp(-s2 / (2.0 * t)) * psi * detAbar * (-1.0 / (2.0 * t)) ** n
                out[k, mask] = g / dens
        return out.T  # (count, len(ts)) so chunks concatenate on axis 0

    x = _run_chunks(worker, samples, threads)
    results = []
    for k, t in enumerate(ts):
        mean, se = _mean_and_stderr(x[:, k])
        results.append(IntegralEstimate(mean, se, samples, float(t), seed))
    return results


def virtual_residue_mc(
    ctx: GeometryContext, t: float, samples: int, seed: int, threads: int = 1
) -> IntegralEstimate:
    """Monte Carlo estimate of the prefactored global residue integral."""
    return virtual_residue_sweep(ctx, [t], samples, seed, threads)[0]


def local_mass(
    ctx,
    center: Sequence[complex],
    t: float,
    radius: float,
    samples: int,
    seed: int,
    chart: int = 0,
    threads: int = 1,
) -> IntegralEstimate:
    """Ball-restricted integral of the same integrand around one zero.

    As t -> 0 the mass converges to the local residue at the center (for
    n = 1; in higher dimension an orientation factor (-1)^{n(n-1)/2} from the
    pairing convention multiplies it, invisible to the vanishing statements).
    """
    if t <= 0:
        raise GeometryError("t must be positive")
    n = ctx.n
    center = np.asarray(center, dtype=complex)
    vol = math.pi**n * radius ** (2 * n) / math.factorial(n)

    def worker(start: int, stop: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.Philox(key=seed, counter=start << 64))
        count = stop - start
        direction = rng.standard_normal((count, 2 * n))
        direction /= np.linalg.norm(direction, axis=1)[:, None]
        radii = radius * rng.uniform(size=count) ** (1.0 / (2 * n))
        offsets = direction[:, :n] + 1j * direction[:, n:]
        W = center[None, :] + radii[:, None] * offsets
        return global_density(ctx, chart, W, t) * vol

    x = _run_chunks(worker, samples, threads)
    mean, se = _mean_and_stderr(x)
    return IntegralEstimate(mean, se, samples, t, seed)


# ------------------------------------------------------------------ curve


def det_N_inverse_term(r_val: complex) -> SuperTensor:
    """(-2 pi i)(1 - r) on the rank-one normal bundle of a curve: the inverse
    normalized determinant truncates because the curvature term carries a
    (0,1) form factor that squares to zero on a one-dimensional base."""
    n = 1
    const = SuperTensor.scalar(n, -2j * math.pi)
    lin = SuperTensor.monomial(n, J=(1,), L=(1,), c=2j * math.pi * r_val)
    return const.add(lin)


def curve_integrand_tensor(phi_c: complex, r_val: complex) -> complex:
    """(1,1)-coefficient of phi . det_N_inverse_term through the tensor path,
    including the 1/(2 pi i)^2 prefactor; reference for the fast path."""
    phi = SuperTensor.monomial(1, I=(1,), K=(1,), c=phi_c)
    res = contract(phi, det_N_inverse_term(r_val))
    coeff = res.coeff(I=(1,), J=(1,))
    pref = 1.0 / (2j * math.pi) ** 2
    conv = -2j  # dw ^ dwbar to dx dy
    return complex(pref * conv * coeff)


def _sheet_coefficients(f: AffinePoly, base: int):
    """Coefficients of f as a polynomial in the normal variable: list of
    univariate polynomials in the base variable, constant term first."""
    normal = 1 - base
    deg = max(e[normal] for e in f.terms)
    coeff_polys = [dict() for _ in range(deg + 1)]
    for e, c in f.terms.items():
        coeff_polys[e[normal]][(e[base],)] = c
    return [AffinePoly(1, terms) for terms in coeff_polys]


def _solve_sheets(coeffs: np.ndarray) -> np.ndarray:
    """Roots of monic-normalized polynomials, batched companion eigenvalues.

    coeffs: (N, m+1), constant term first, leading coefficients nonzero.
    Returns (N, m) roots.
    """
    N, m1 = coeffs.shape
    m = m1 - 1
    monic = coeffs / coeffs[:, -1][:, None]
    C = np.zeros((N, m, m), dtype=complex)
    C[:, 1:, :-1] = np.eye(m - 1)
    C[:, :, -1] = -monic[:, :-1]
    return np.linalg.eigvals(C)


def curve_localized_term(
    geo: Example22Geometry,
    samples: int,
    seed: int,
    chart: int = 0,
    base: int = 0,
    threads: int = 1,
    branch_tol: float = 1e-6,
) -> CurveTerm:
    """Sheeted Monte Carlo of the curve-localized integrand over Z = {f = 0}.

    Base points are FS-uniform on the base coordinate line; each sample's
    fiber roots are the sheets.  Samples too close to a branch point
    (|df/dw_normal| < branch_tol) are rejected and redrawn; the count is
    reported.  The vanishing of the total is the verified identity.
    """
    ctx = geo.ctx
    f = geo.f_aff(chart)
    normal = 1 - base
    coeff_polys = _sheet_coefficients(f, base)
    data = ctx.chart_data(chart)
    if data.psi_aff is None:
        raise GeometryError("instance carries no psi")
    fb_poly = f.partial(base)
    fn_poly = f.partial(normal)

    chunk_stats = {}  # start -> (rejections, pointwise max); filled per chunk

    def worker(start: int, stop: int) -> np.ndarray:
        rng = np.random.default_rng(np.random.Philox(key=seed, counter=start << 64))
        count = stop - start
        vals = np.zeros(count, dtype=complex)
        l1 = np.zeros(count)
        pending = np.arange(count)
        rejected = 0
        pmax = 0.0
        guard = 0
        while len(pending):
            guard += 1
            if guard > 100:
                raise GeometryError("branch-point rejection did not terminate")
            Z = fs_uniform_points(1, len(pending), rng)
            u = (Z[:, 1] / Z[:, 0]).reshape(-1)
            U = u[:, None]
            coeffs = np.stack([cp.eval_batch(U) for cp in coeff_polys], axis=1)
            lead_ok = np.abs(coeffs[:, -1]) > 1e-12 * np.abs(coeffs).max(axis=1)
            roots = np.full((len(pending), len(coeff_polys) - 1), np.nan, dtype=complex)
            if lead_ok.any():
                roots[lead_ok] = _solve_sheets(coeffs[lead_ok])
            with np.errstate(all="ignore"):
                for _ in range(3):  # Newton polish on each sheet
                    Wall = _sheet_points(u, roots, base)
                    fv = f.eval_batch(Wall).reshape(roots.shape)
                    fn = fn_poly.eval_batch(Wall).reshape(roots.shape)
                    roots = roots - fv / fn
                Wall = _sheet_points(u, roots, base)
                fn = fn_poly.eval_batch(Wall).reshape(roots.shape)
                ok = lead_ok & np.isfinite(roots).all(axis=1) & (np.abs(fn) > branch_tol).all(axis=1)
            rejected += int(len(pending) - ok.sum())

            if ok.any():
                idx = pending[ok]
                u_ok = u[ok]
                roots_ok = roots[ok]
                Wok = _sheet_points(u_ok, roots_ok, base)
                fn_ok = fn_poly.eval_batch(Wok)
                psi_v = data.psi_aff.eval_batch(Wok)
                sign = 1.0 if (base, normal) == (0, 1) else -1.0
                phi = sign * psi_v / fn_ok
                r_c = geo.curvature_term_batch(chart, Wok, base)
                dens_sheet = (phi * r_c / math.pi).reshape(roots_ok.shape)
                if dens_sheet.size:
                    pmax = max(pmax, float(np.abs(dens_sheet).max()))
                p_base = fs_density(u_ok[:, None], 1)
                vals[idx] = dens_sheet.sum(axis=1) / p_base
                l1[idx] = np.abs(dens_sheet).sum(axis=1) / p_base
            pending = pending[~ok]
        chunk_stats[start] = (rejected, pmax)
        return np.stack([vals, l1.astype(complex)], axis=1)

    out = _run_chunks(worker, samples, threads)
    mean, se = _mean_and_stderr(out[:, 0])
    l1_mass = float(out[:, 1].real.mean())
    return CurveTerm(
        value=mean,
        std_error=se,
        component_id=f"curve(f), chart {chart}",
        samples=samples,
        seed=seed,
        rejected=sum(v[0] for v in chunk_stats.values()),
        pointwise_max=max(v[1] for v in chunk_stats.values()),
        l1_mass=l1_mass,
    )


def _sheet_points(u: np.ndarray, roots: np.ndarray, base: int) -> np.ndarray:
    """Stack base values and sheet roots into (N*m, 2) chart points."""
    m = roots.shape[1]
    cols = np.repeat(u, m)
    flat = roots.reshape(-1)
    if base == 0:
        return np.stack([cols, flat], axis=1)
    return np.stack([flat, cols], axis=1)


def fiber_mass_quadrature(
    geo: Example22Geometry,
    u: complex,
    t: float,
    chart: int = 0,
    base: int = 0,
    radial_nodes: int = 80,
    angular_nodes: int = 24,
    sigma_mult: float = 12.0,
) -> complex:
    """Quadrature of the global integrand over one fiber {w_base = u}.

    As t -> 0 this converges to the summed curve-localized density of the
    sheets over u, providing a pointwise oracle for every constant in the
    localization formula (diagnostic; used by the test suite).
    """
    ctx = geo.ctx
    f = geo.f_aff(chart)
    normal = 1 - base
    coeff_polys = _sheet_coefficients(f, base)
    coeffs = np.array([[cp.eval(np.array([u])) for cp in coeff_polys]])
    roots = _solve_sheets(coeffs)[0]
    fn_poly = f.partial(normal)

    nodes, weights = np.polynomial.legendre.leggauss(radial_nodes)
    thetas = 2.0 * math.pi * np.arange(angular_nodes) / angular_nodes
    wth = 2.0 * math.pi / angular_nodes
    total = 0j
    for root in roots:
        w0 = np.array([u, root]) if base == 0 else np.array([root, u])
        fn = fn_poly.eval(list(w0))
        Hm = ctx.metric_matrix(chart, w0)
        h11 = float(Hm[geo.f_index, geo.f_index].real)
        width = math.sqrt(2.0 * t / (h11 * abs(fn) ** 2))
        R = sigma_mult * width
        r = 0.5 * R * (nodes + 1.0)
        wr = 0.5 * R * weights
        for theta in thetas:
            zeta = r * cmath.exp(1j * theta)
            if base == 0:
                W = np.stack([np.full_like(zeta, u), root + zeta], axis=1)
            else:
                W = np.stack([root + zeta, np.full_like(zeta, u)], axis=1)
            g = global_density(ctx, chart, W, t)
            total += np.sum(g * r * wr) * wth
    return complex(total)
