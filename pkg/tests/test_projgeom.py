"""Geometry layer: metrics, superconnection data, curvature, curve fixtures.

The finite-difference routines in this file are independent oracles for the
exact chart-function derivatives used by the implementation.
"""

import numpy as np
import pytest

from residue_lab.polycore import HomogeneousPoly, monomials_of_degree, parse_poly
from residue_lab.projgeom import (
    BundleSpec,
    Example22Geometry,
    GeometryContext,
    GeometryError,
    MetricSpec,
    ProjPoint,
    PsiSpec,
    SectionSpec,
    chart_coords,
    fs_uniform_points,
    point_from_chart,
    transition_jacobian,
)
from residue_lab.syszero import solve_square_system


def p1_o2_context(metric=None):
    bundle = BundleSpec(1, (2,))
    s = SectionSpec((parse_poly("z1^2 - z0^2", 2),))
    psi = PsiSpec(parse_poly("1", 2))
    return GeometryContext(bundle, s, metric or MetricSpec(), psi)


def example22_context(eps=0.05, q_text="z0^2 + 2*z1*z2", f_text="z0*z2 - z1^2"):
    bundle = BundleSpec(2, (2, 2))
    f = parse_poly(f_text, 3)
    s = SectionSpec((f, HomogeneousPoly(3, 2, {})))
    psi = PsiSpec(parse_poly("z0 + 1/2*z1", 3))
    if eps == 0:
        ms = MetricSpec()
    else:
        ms = MetricSpec("perturbed", epsilon=eps, pair=(0, 1), q=parse_poly(q_text, 3), f_index=0)
    return GeometryContext(bundle, s, ms, psi)


# ---------------------------------------------------------------- metric


def test_fs_metric_p1_origin():
    ctx = p1_o2_context()
    H = ctx.metric_matrix(0, [0.0])
    assert np.allclose(H, [[1.0]])


def test_fs_metric_p2_mixed_degrees():
    bundle = BundleSpec(2, (1, 2))
    s = SectionSpec((parse_poly("z1", 3), parse_poly("z2^2", 3)))
    ctx = GeometryContext(bundle, s, MetricSpec())
    w = [1.0 / np.sqrt(2), 1.0 / np.sqrt(2) * 1j]  # |w|^2 = 1
    H = ctx.metric_matrix(0, w)
    assert np.allclose(H, np.diag([0.5, 0.25]))


def test_perturbed_offdiagonal_vanishes_on_curve():
    ctx = example22_context()
    geo = Example22Geometry(ctx)
    # point of Z = {z0 z2 = z1^2} in chart 0: w = (w1, w1^2)
    w = [0.73 - 0.21j, (0.73 - 0.21j) ** 2]
    H = ctx.metric_matrix(0, w)
    assert abs(H[0, 1]) < 1e-14 and abs(H[1, 0]) < 1e-14
    off = ctx.metric_matrix(0, [0.3, 0.4])[0, 1]
    assert abs(off) > 1e-6  # but not off the curve


def test_perturbed_metric_hermitian_and_pd():
    ctx = example22_context()
    rng = np.random.default_rng(1)
    W = rng.normal(size=(50, 2)) + 1j * rng.normal(size=(50, 2))
    H = ctx.metric_matrix_batch(0, W)
    assert np.allclose(H, np.conj(np.swapaxes(H, 1, 2)))
    assert np.linalg.eigvalsh(H).min() > 0
    assert ctx.pd_margin > 0


def test_oversized_perturbation_rejected():
    with pytest.raises(GeometryError):
        example22_context(eps=500.0)


def test_psi_degree_validation():
    bundle = BundleSpec(1, (1,))  # D = 1 - 1 - 1 < 0
    s = SectionSpec((parse_poly("z1", 2),))
    with pytest.raises(GeometryError):
        GeometryContext(bundle, s, MetricSpec(), PsiSpec(HomogeneousPoly(2, 0, {})))


# ---------------------------------------------------------------- section


def test_s_norm_vanishes_on_zero():
    ctx = p1_o2_context()
    _, n2 = ctx.s_value_and_norm(0, [1.0])
    assert abs(n2) < 1e-15


def test_s_norm_p1_o2_closed_form():
    # V = O(2), s = z0 z1: |s|^2 = |w|^2 / (1+|w|^2)^2 on chart 0
    bundle = BundleSpec(1, (2,))
    s = SectionSpec((parse_poly("z0*z1", 2),))
    ctx = GeometryContext(bundle, s, MetricSpec())
    rng = np.random.default_rng(2)
    for _ in range(20):
        w = complex(rng.normal(), rng.normal())
        _, n2 = ctx.s_value_and_norm(0, [w])
        expected = abs(w) ** 2 / (1 + abs(w) ** 2) ** 2
        assert abs(n2 - expected) < 1e-13


def test_s_norm_chart_invariant():
    ctx = example22_context()
    rng = np.random.default_rng(3)
    Z = fs_uniform_points(2, 500, rng)
    for z in Z:
        if min(abs(z[0]), abs(z[1])) < 0.2:
            continue
        _, a = ctx.s_value_and_norm(0, chart_coords(z, 0))
        _, b = ctx.s_value_and_norm(1, chart_coords(z, 1))
        assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


# ---------------------------------------------------------------- S form


def test_sform_at_zero_fs_metric():
    # at a zero of s only h_i conj(df_i) survives in the one-form part
    ctx = p1_o2_context()
    t = 0.7
    S = ctx.S_form(0, [1.0], t)
    assert abs(S.scalar_part) < 1e-14
    h = (1 + 1.0) ** -2
    expected = -h * np.conj(2.0) / (2 * t)  # f = w^2 - 1, df = 2w at w=1
    assert abs(S.one_form[(1, 1)] - expected) < 1e-13


def test_sform_t_validation():
    ctx = p1_o2_context()
    with pytest.raises(GeometryError):
        ctx.S_form(0, [0.5], 0.0)


def test_sform_dbar_finite_difference_crosscheck():
    """Central differences of xi in wbar against the exact one-form."""
    ctx = example22_context()
    data = ctx.chart_data(0)
    rng = np.random.default_rng(4)
    h = 1e-5
    for _ in range(200):
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        for b in range(2):
            for p in range(2):
                exact = data.Abar[b][p].eval(w)
                ex = np.zeros(2, complex)
                ex[b] = h
                fd_x = (data.xi[p].eval(w + ex) - data.xi[p].eval(w - ex)) / (2 * h)
                fd_y = (data.xi[p].eval(w + 1j * ex) - data.xi[p].eval(w - 1j * ex)) / (2 * h)
                fd = 0.5 * (fd_x + 1j * fd_y)  # d/dwbar
                assert abs(fd - exact) <= 1e-6 * max(1.0, abs(exact))


# ---------------------------------------------------------------- curvature


def test_fs_curvature_p1_closed_form():
    ctx = p1_o2_context()
    for w in [0.0, 0.35 - 0.8j, 1.2 + 0.4j]:
        R = ctx.chern_curvature(0, [w])
        expected = 2.0 / (1 + abs(w) ** 2) ** 2  # degree d = 2
        assert abs(R.coef[0, 0, 0, 0] - expected) < 1e-12


def test_fs_curvature_off_diagonal_zero():
    ctx = example22_context(eps=0)
    rng = np.random.default_rng(5)
    W = rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2))
    R = ctx.chern_curvature_batch(0, W)
    assert np.abs(R[:, 0, 1]).max() < 1e-14
    assert np.abs(R[:, 1, 0]).max() < 1e-14


def _fd_curvature(ctx, chart, w, h=1e-4):
    """Nested Richardson central differences of G^{-1} dG; independent oracle."""

    def G(pt):
        return ctx.metric_matrix(chart, pt).T

    def dG(pt, a, step):
        ex = np.zeros(ctx.n, complex)
        ex[a] = step
        dx = (G(pt + ex) - G(pt - ex)) / (2 * step)
        dy = (G(pt + 1j * ex) - G(pt - 1j * ex)) / (2 * step)
        return 0.5 * (dx - 1j * dy)  # d/dw_a

    def K(pt, a, step):
        return np.linalg.inv(G(pt)) @ dG(pt, a, step)

    def dbarK(pt, a, b, step):
        ex = np.zeros(ctx.n, complex)
        ex[b] = step
        dx = (K(pt + ex, a, step) - K(pt - ex, a, step)) / (2 * step)
        dy = (K(pt + 1j * ex, a, step) - K(pt - 1j * ex, a, step)) / (2 * step)
        return 0.5 * (dx + 1j * dy)  # d/dwbar_b

    n = ctx.n
    out = np.zeros((n, n, n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            c1 = -dbarK(np.asarray(w, complex), a, b, h)
            c2 = -dbarK(np.asarray(w, complex), a, b, h / 2)
            out[:, :, a, b] = (4 * c2 - c1) / 3.0
    return out


def test_perturbed_curvature_matches_fd_oracle():
    ctx = example22_context()
    rng = np.random.default_rng(6)
    for _ in range(5):
        w = rng.normal(size=2) * 0.7 + 1j * rng.normal(size=2) * 0.7
        exact = ctx.chern_curvature(0, w).coef
        fd = _fd_curvature(ctx, 0, w)
        assert np.abs(exact - fd).max() <= 1e-6 * max(1.0, np.abs(exact).max())


def test_perturbed_curvature_continuous_at_zero_eps():
    fs = example22_context(eps=0)
    tiny = example22_context(eps=1e-9)
    rng = np.random.default_rng(7)
    W = rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2))
    Rf = fs.chern_curvature_batch(0, W)
    Rt = tiny.chern_curvature_batch(0, W)
    assert np.abs(Rf - Rt).max() < 1e-7


def test_curvature_metric_compatibility_pairing():
    """G R[a][b] = (G R[b][a])^H : compatibility of the Chern connection."""
    ctx = example22_context()
    rng = np.random.default_rng(8)
    for _ in range(20):
        w = rng.normal(size=2) + 1j * rng.normal(size=2)
        G = ctx.metric_matrix(0, w).T
        R = ctx.chern_curvature(0, w).coef
        for a in range(2):
            for b in range(2):
                M_ab = G @ R[:, :, a, b]
                M_ba = G @ R[:, :, b, a]
                assert np.abs(M_ab - M_ba.conj().T).max() <= 1e-8 * max(1.0, np.abs(M_ab).max())


def test_curvature_offdiag_on_curve_closed_form():
    """On Z the off-diagonal block collapses to eps dbar(Qt/H11) ^ df with
    Qt = conj(q) (1+|w|^2)^{-(d+k)}; derived by hand, pins the analytic path."""
    ctx = example22_context()
    geo = Example22Geometry(ctx)
    d_sum = sum(ctx.bundle.degrees)
    q = ctx.metric.q.dehomogenize(0)
    f = geo.f_aff(0)
    rng = np.random.default_rng(9)
    h = 1e-6
    for _ in range(10):
        w1 = complex(rng.normal(), rng.normal()) * 0.8
        # place the point on the curve: w2 = w1^2 for f = z0 z2 - z1^2
        w = np.array([w1, w1 * w1])
        assert abs(f.eval(list(w))) < 1e-12
        R = ctx.chern_curvature(0, w).coef[0, 1]  # output L, input V_1

        def Qt_over_H11(pt):
            qv = np.conj(q.eval(list(pt)))
            wt = (1 + np.abs(pt[0]) ** 2 + np.abs(pt[1]) ** 2)
            return qv * wt ** (-(d_sum)) / wt ** (-2.0)

        eps = ctx.metric.epsilon
        for a in range(2):
            dfa = f.partial(a).eval(list(w))
            for b in range(2):
                ex = np.zeros(2, complex)
                ex[b] = h
                gx = (Qt_over_H11(w + ex) - Qt_over_H11(w - ex)) / (2 * h)
                gy = (Qt_over_H11(w + 1j * ex) - Qt_over_H11(w - 1j * ex)) / (2 * h)
                dbar_b = 0.5 * (gx + 1j * gy)
                # dbar(X) ^ df carries -X_b df_a along dw_a ^ dwbar_b
                expected = -eps * dbar_b * dfa
                assert abs(R[a, b] - expected) <= 1e-5 * max(1.0, abs(expected))


# ---------------------------------------------------------------- ds and psi


def test_ds_identity_section():
    bundle = BundleSpec(2, (1, 1))
    s = SectionSpec((parse_poly("z1", 3), parse_poly("z2", 3)))
    ctx = GeometryContext(bundle, s, MetricSpec())
    J = ctx.ds_matrix(0, [0.0, 0.0])
    assert np.allclose(J, np.eye(2))


def test_ds_diag_section():
    bundle = BundleSpec(2, (2, 1))
    s = SectionSpec((parse_poly("z1^2 - z0^2", 3), parse_poly("z2", 3)))
    ctx = GeometryContext(bundle, s, MetricSpec())
    J = ctx.ds_matrix(0, [1.0, 0.0])
    assert np.allclose(J, np.diag([2.0, 1.0]))


def test_ds_split_section_rank_one():
    ctx = example22_context()
    J = ctx.ds_matrix(0, [0.5, 0.25])
    assert np.allclose(J[1], 0)
    assert np.linalg.matrix_rank(J) == 1


def test_psi_over_det_ds_axis_curve():
    # f = z2 (chart 0: w_2), Z is the w_1 axis; psi/df = psi(w1, 0) dw_1 (x) e_2
    bundle = BundleSpec(2, (1, 3))
    f = parse_poly("z2", 3)
    s = SectionSpec((f, HomogeneousPoly(3, 3, {})))
    psi = PsiSpec(parse_poly("z0 - z1", 3))
    ctx = GeometryContext(bundle, s, MetricSpec(), psi)
    geo = Example22Geometry(ctx)
    for w1 in [0.3, -1.2 + 0.5j]:
        val = geo.psi_over_det_ds(0, [w1, 0.0], base=0)
        assert abs(val - (1.0 - w1)) < 1e-13


def test_psi_over_det_ds_linearity():
    ctx1 = example22_context()
    bundle = ctx1.bundle
    s = ctx1.section
    psi2 = PsiSpec(parse_poly("z2 - 2*z1", 3))
    ctx2 = GeometryContext(bundle, s, ctx1.metric, psi2, certify=False)
    psi_sum = PsiSpec(ctx1.psi.H + psi2.H)
    ctx3 = GeometryContext(bundle, s, ctx1.metric, psi_sum, certify=False)
    g1, g2, g3 = (Example22Geometry(c) for c in (ctx1, ctx2, ctx3))
    w1 = 0.4 - 0.7j
    w = [w1, w1 * w1]
    assert abs(g1.psi_over_det_ds(0, w) + g2.psi_over_det_ds(0, w) - g3.psi_over_det_ds(0, w)) < 1e-13


# ---------------------------------------------------------------- R^{V_1}_s


def test_curvature_term_zero_for_fs():
    ctx = example22_context(eps=0)
    geo = Example22Geometry(ctx)
    w1 = 0.6 + 0.2j
    assert abs(geo.curvature_term(0, [w1, w1 * w1])) < 1e-14


def test_curvature_term_nonzero_for_perturbed():
    ctx = example22_context()
    geo = Example22Geometry(ctx)
    w1 = 0.6 + 0.2j
    assert abs(geo.curvature_term(0, [w1, w1 * w1])) > 1e-5


def test_curvature_term_well_definedness():
    """Feeding tangents in both slots contributes nothing on Z."""
    ctx = example22_context()
    geo = Example22Geometry(ctx)
    rng = np.random.default_rng(10)
    for _ in range(10):
        w1 = complex(rng.normal(), rng.normal()) * 0.7
        val = geo.tangent_tangent_block(0, [w1, w1 * w1])
        assert abs(val) < 1e-8


def test_curvature_term_matches_on_curve_closed_form():
    """r = eps dbar_taubar(Qt/H11) along the sheet, by the hand derivation."""
    ctx = example22_context()
    geo = Example22Geometry(ctx)
    d_sum = sum(ctx.bundle.degrees)
    q = ctx.metric.q.dehomogenize(0)
    h = 1e-6

    def Qt_over_H11(pt):
        qv = np.conj(q.eval(list(pt)))
        wt = 1 + np.abs(pt[0]) ** 2 + np.abs(pt[1]) ** 2
        return qv * wt ** (-(d_sum - 2.0))

    rng = np.random.default_rng(11)
    for _ in range(8):
        w1 = complex(rng.normal(), rng.normal()) * 0.6
        w = np.array([w1, w1 * w1])
        kappa = geo.tangent(0, w, base=0, normal=1)
        # dbar along the conjugated tangent: FD along the sheet parameter
        up = np.array([w1 + h, (w1 + h) ** 2])
        dn = np.array([w1 - h, (w1 - h) ** 2])
        upi = np.array([w1 + 1j * h, (w1 + 1j * h) ** 2])
        dni = np.array([w1 - 1j * h, (w1 - 1j * h) ** 2])
        gx = (Qt_over_H11(up) - Qt_over_H11(dn)) / (2 * h)
        gy = (Qt_over_H11(upi) - Qt_over_H11(dni)) / (2 * h)
        dbar_tau = 0.5 * (gx + 1j * gy)
        expected = ctx.metric.epsilon * dbar_tau
        got = geo.curvature_term(0, w)
        assert abs(got - expected) <= 1e-4 * max(1e-6, abs(expected))


# ---------------------------------------------------------------- charts


def test_proj_point_preferred_chart():
    p = ProjPoint.of([1.0, 3.0j, -0.5])
    assert p.chart == 1
    assert np.allclose(p.affine(), [1.0 / 3.0j, -0.5 / 3.0j])


def test_transition_jacobian_inverse_pair():
    rng = np.random.default_rng(12)
    for _ in range(10):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        w0 = chart_coords(z, 0)
        J01 = transition_jacobian(w0, 0, 1, 2)
        w1 = chart_coords(z, 1)
        J10 = transition_jacobian(w1, 1, 0, 2)
        assert np.allclose(J01 @ J10, np.eye(2), atol=1e-12)


def test_metric_pairing_transition():
    """H^(a) = H^(0) (z_a/z_0)^{d_i} conj(z_a/z_0)^{d_j} entrywise."""
    ctx = example22_context()
    degs = ctx.bundle.degrees
    rng = np.random.default_rng(13)
    for _ in range(20):
        z = rng.normal(size=3) + 1j * rng.normal(size=3)
        H0 = ctx.metric_matrix(0, chart_coords(z, 0))
        H1 = ctx.metric_matrix(1, chart_coords(z, 1))
        r = z[1] / z[0]
        for i in range(2):
            for j in range(2):
                factor = r ** degs[i] * np.conj(r) ** degs[j]
                assert abs(H1[i, j] - H0[i, j] * factor) <= 1e-12 * max(1.0, abs(H0[i, j] * factor))


def test_smooth_curve_certification():
    solver = lambda polys: [list(p.point) for p in solve_square_system(polys, seed=1).points]
    smooth = Example22Geometry(example22_context(eps=0))
    assert smooth.certify_smooth_curve(solver) is True
    # two crossing lines: singular at the node
    bundle = BundleSpec(2, (2, 2))
    s = SectionSpec((parse_poly("z1*z2", 3), HomogeneousPoly(3, 2, {})))
    nodal = Example22Geometry(GeometryContext(bundle, s, MetricSpec()))
    assert nodal.certify_smooth_curve(solver) is False
