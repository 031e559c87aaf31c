"""Residue ledger, Euler-Jacobi vanishing, Cayley-Bacharach on both backends."""

import numpy as np
import pytest

from residue_lab.polycore import (
    GaussianRational,
    HomogeneousPoly,
    monomials_of_degree,
    parse_poly,
)
from residue_lab.residue import (
    ResidueError,
    ResidueLedger,
    cayley_bacharach_verify,
    cb_vanishing_space,
    cb_vanishing_space_exact,
    generalized_cb_check,
    global_residue_sum,
    local_residue,
)


def random_form(nv, deg, rng, scale=1.0):
    terms = {
        e: scale * complex(rng.standard_normal(), rng.standard_normal())
        for e in monomials_of_degree(nv, deg)
    }
    return HomogeneousPoly(nv, deg, terms)


# ---------------------------------------------------------------- local


def test_local_residue_linear():
    s = [parse_poly("z1", 2).dehomogenize(0)]
    psi = parse_poly("1", 2).dehomogenize(0)
    assert local_residue([0.0], s, psi) == 1.0


def test_local_residue_half():
    s = [parse_poly("z1^2 - z0^2", 2).dehomogenize(0)]
    psi = parse_poly("1", 2).dehomogenize(0)
    assert abs(local_residue([1.0], s, psi) - 0.5) < 1e-14


def test_local_residue_chart_invariance():
    # zero of s at (1 : 1), visible in charts 0 and 1
    from residue_lab.residue import psi_chart_rep

    s = parse_poly("z1^2 - z0^2", 2)
    psi = parse_poly("2", 2)
    v0 = local_residue([1.0], [s.dehomogenize(0)], psi_chart_rep(psi, 0))
    v1 = local_residue([1.0], [s.dehomogenize(1)], psi_chart_rep(psi, 1))
    assert abs(v0 - v1) < 1e-10


def test_local_residue_rejects_singular():
    s = [parse_poly("z1^2", 2).dehomogenize(0)]
    psi = parse_poly("1", 2).dehomogenize(0)
    with pytest.raises(ResidueError):
        local_residue([0.0], s, psi)


# ---------------------------------------------------------------- global


def test_global_sum_p1_by_hand():
    section = [parse_poly("z1^2 - z0^2", 2)]
    psi = parse_poly("3", 2)
    ledger = global_residue_sum(section, psi, seed=2)
    vals = sorted(v.real for _, v in ledger.entries)
    assert np.allclose(vals, [-1.5, 1.5])
    assert abs(ledger.total) < 1e-12
    assert ledger.relative_vanishing < 1e-12


def test_global_sum_random_n2_with_mp_oracle():
    """Random (3,3) instances vanish; entries cross-checked at 40 digits."""
    mp = pytest.importorskip("mpmath")
    rng = np.random.default_rng(123)
    section = [random_form(3, 3, rng) for _ in range(2)]
    psi = random_form(3, 3, rng)
    ledger = global_residue_sum(section, psi, seed=3)
    assert ledger.relative_vanishing < 1e-8

    mp.mp.dps = 40
    s_aff = [s.dehomogenize(0) for s in section]
    psi_aff = psi.dehomogenize(0)

    def mp_eval(poly, z):
        tot = mp.mpc(0)
        for e, c in poly.terms.items():
            term = mp.mpc(complex(c))
            for zi, k in zip(z, e):
                term *= zi**k
            tot += term
        return tot

    def mp_partial(poly, z, k):
        # derivative taken in mp arithmetic: float coefficients times integer
        # exponents must not round through float64
        tot = mp.mpc(0)
        for e, c in poly.terms.items():
            if e[k] == 0:
                continue
            term = mp.mpc(complex(c)) * e[k]
            for i, (zi, ki) in enumerate(zip(z, e)):
                term *= zi ** (ki - 1 if i == k else ki)
            tot += term
        return tot

    def refine(z):
        z = [mp.mpc(v) for v in z]
        for _ in range(50):
            F = mp.matrix([mp_eval(p, z) for p in s_aff])
            J = mp.matrix([[mp_partial(p, z, k) for k in range(2)] for p in s_aff])
            dz = mp.lu_solve(J, F)
            z = [zi - di for zi, di in zip(z, dz)]
            if mp.norm(F) < mp.mpf(10) ** -35:
                break
        return z

    total = mp.mpc(0)
    for point, float_val in ledger.entries:
        z = refine(list(point))
        J = mp.matrix([[mp_partial(p, z, k) for k in range(2)] for p in s_aff])
        det = J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]
        val = mp_eval(psi_aff, z) / det
        assert abs(complex(val) - float_val) < 1e-10 * max(1.0, abs(float_val))
        total += val
    assert abs(total) < mp.mpf(10) ** -25


def test_global_sum_negative_control_degree_too_high():
    rng = np.random.default_rng(77)
    section = [random_form(3, 2, rng) for _ in range(2)]
    psi = random_form(3, 2, rng)  # degree sum - n = 2, one above the critical 1
    ledger = global_residue_sum(section, psi, seed=4)
    assert ledger.relative_vanishing > 1e-3


def test_global_sum_n3():
    rng = np.random.default_rng(31)
    section = [random_form(4, 2, rng) for _ in range(3)]
    psi = random_form(4, 2, rng)  # D = 6 - 3 - 1 = 2
    ledger = global_residue_sum(section, psi, seed=5)
    assert len(ledger.entries) == 8
    assert ledger.relative_vanishing < 1e-8


def test_global_sum_rejects_zeros_at_infinity():
    section = [parse_poly("z0*z1", 2)]
    psi = parse_poly("1", 2)
    with pytest.raises(ResidueError):
        global_residue_sum(section, psi)


def test_ledger_scaling_covariance():
    section = [parse_poly("z1^2 - z0^2", 2)]
    lam = 2.5 - 1.5j
    l1 = global_residue_sum(section, parse_poly("1", 2), seed=6)
    l2 = global_residue_sum(section, parse_poly("1", 2).scale(lam), seed=6)
    for (_, a), (_, b) in zip(l1.entries, l2.entries):
        assert abs(b - lam * a) < 1e-14


def test_ledger_cross_seed_total_stability():
    rng = np.random.default_rng(8)
    section = [random_form(3, 2, rng) for _ in range(2)]
    psi = random_form(3, 1, rng)
    t1 = global_residue_sum(section, psi, seed=11).total
    t2 = global_residue_sum(section, psi, seed=99).total
    assert abs(t1 - t2) <= 1e-12


# ---------------------------------------------------------------- CB spaces


def test_vanishing_space_lines_through_point():
    basis = cb_vanishing_space([[1.0, 0.3, -0.7]], 1)
    assert len(basis) == 2
    for form in basis:
        assert abs(form.eval([1.0, 0.3, -0.7])) < 1e-12


def test_vanishing_space_three_general_points():
    pts = [[1.0, 0.0, 0.0], [1.0, 1.0, 0.5], [1.0, -0.5, 2.0]]
    assert cb_vanishing_space(pts, 1) == []


def test_vanishing_space_cubic_pencil():
    rng = np.random.default_rng(15)
    f = random_form(3, 3, rng)
    g = random_form(3, 3, rng)
    from residue_lab.syszero import solve_square_system

    zs = solve_square_system([f.dehomogenize(0), g.dehomogenize(0)], seed=7)
    assert len(zs.points) == 9
    pts = [np.concatenate(([1.0 + 0j], np.array(p.point))) for p in zs.points]
    basis = cb_vanishing_space(pts[:8], 3)
    assert len(basis) == 2


# ---------------------------------------------------------------- CB checks


def test_cb_conics_vacuous_but_passes():
    rng = np.random.default_rng(20)
    rep = cayley_bacharach_verify(random_form(3, 2, rng), random_form(3, 2, rng), seed=8)
    assert rep.num_points == 4
    assert rep.vacuous and rep.max_residual == 0.0


def test_cb_cubics_float_path():
    rng = np.random.default_rng(21)
    rep = cayley_bacharach_verify(random_form(3, 3, rng), random_form(3, 3, rng), seed=9)
    assert rep.num_points == 9
    assert rep.space_dimension == 2
    assert rep.max_residual <= 1e-8


def test_cb_negative_control():
    rng = np.random.default_rng(22)
    f, g = random_form(3, 3, rng), random_form(3, 3, rng)
    from residue_lab.syszero import solve_square_system

    zs = solve_square_system([f.dehomogenize(0), g.dehomogenize(0)], seed=10)
    pts = [np.concatenate(([1.0 + 0j], np.array(p.point))) for p in zs.points]
    # replace one constraint point by a random one
    pts[3] = np.array([1.0, rng.standard_normal() + 0j, rng.standard_normal() + 0j])
    basis = cb_vanishing_space(pts[:8], 3)
    from residue_lab.residue import _normalized_eval

    worst = max(_normalized_eval(b, pts[8]) for b in basis)
    assert worst > 1e-3


def _split_line_instance(rng, d, e):
    """Products of rational lines: all intersection points are rational."""

    def rational_line():
        coeffs = [GaussianRational.of(int(rng.integers(-9, 10)), int(rng.integers(-9, 10))) for _ in range(3)]
        if not any(coeffs):
            coeffs[0] = GaussianRational.of(1)
        terms = {}
        for i, c in enumerate(coeffs):
            if c:
                ee = [0, 0, 0]
                ee[i] = 1
                terms[tuple(ee)] = c
        return HomogeneousPoly(3, 1, terms)

    def product(lines):
        acc = lines[0]
        for l in lines[1:]:
            acc = acc * l
        return acc

    f_lines = [rational_line() for _ in range(d)]
    g_lines = [rational_line() for _ in range(e)]
    # exact pairwise intersections by 2x2 elimination
    pts = []
    for lf in f_lines:
        for lg in g_lines:
            a = [lf.terms.get((1, 0, 0), GaussianRational.of(0)), lf.terms.get((0, 1, 0), GaussianRational.of(0)), lf.terms.get((0, 0, 1), GaussianRational.of(0))]
            b = [lg.terms.get((1, 0, 0), GaussianRational.of(0)), lg.terms.get((0, 1, 0), GaussianRational.of(0)), lg.terms.get((0, 0, 1), GaussianRational.of(0))]
            # cross product of the two coefficient vectors
            pts.append(
                (
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                )
            )
    return product(f_lines), product(g_lines), pts


def test_cb_exact_path_identically_zero():
    rng = np.random.default_rng(23)
    for d, e in [(2, 3), (3, 3)]:
        while True:
            f, g, pts = _split_line_instance(rng, d, e)
            distinct = len({tuple(str(c) for c in p) for p in pts}) == d * e
            if distinct and all(any(c for c in p) for p in pts):
                break
        m = d + e - 3
        held = pts[-1]
        basis = cb_vanishing_space_exact(pts[:-1], m)
        assert len(basis) >= 1
        for form in basis:
            val = form.eval(list(held))
            assert not val  # exactly zero in the Gaussian rationals


def test_cb_exact_vs_float_agreement():
    rng = np.random.default_rng(24)
    f, g, pts = _split_line_instance(rng, 2, 3)
    m = 2
    held = pts[-1]
    basis_e = cb_vanishing_space_exact(pts[:-1], m)
    cpts = [[c.to_complex() for c in p] for p in pts]
    basis_f = cb_vanishing_space(cpts[:-1], m)
    assert len(basis_e) == len(basis_f)
    from residue_lab.residue import _normalized_eval

    for form in basis_f:
        assert _normalized_eval(form, np.array(cpts[-1])) <= 1e-10


# ---------------------------------------------------------------- mixed


def _mixed_instance(rng):
    f = random_form(3, 2, rng)  # curve factor
    u = random_form(3, 2, rng)  # cofactor: isolated points u = g = 0
    g = random_form(3, 3, rng)
    return f, u, g


def test_generalized_cb_positive():
    rng = np.random.default_rng(25)
    f, u, g = _mixed_instance(rng)
    rep = generalized_cb_check(f, u, g, seed=12)
    assert rep.curve_points == 6 and rep.isolated_points == 6
    assert rep.curve_entry_max <= 1e-8  # suppressed identically by divisibility
    assert rep.isolated_relative_vanishing <= 1e-8
    assert rep.hypotheses == "assumed"
    assert rep.forcing_residuals and max(rep.forcing_residuals) <= 1e-8


def test_generalized_cb_negative_control():
    """psi not divisible by the curve factor: the isolated ledger keeps mass."""
    rng = np.random.default_rng(26)
    f, u, g = _mixed_instance(rng)
    s1 = f * u
    psi = random_form(3, s1.degree + g.degree - 3, rng)
    ledger = global_residue_sum([s1, g], psi, seed=13)
    f_aff = f.dehomogenize(0)
    iso = [(p, v) for p, v in ledger.entries if abs(f_aff.eval(list(p))) > 1e-6]
    sub = ResidueLedger.from_entries(iso)
    assert sub.relative_vanishing > 1e-3


def test_ledger_total_permutation_invariance():
    rng = np.random.default_rng(41)
    section = [random_form(3, 3, rng) for _ in range(2)]
    psi = random_form(3, 3, rng)
    ledger = global_residue_sum(section, psi, seed=17)
    shuffled = list(ledger.entries)
    rng.shuffle(shuffled)
    re_total = ResidueLedger.from_entries(shuffled).total
    assert abs(re_total - ledger.total) <= 1e-12
