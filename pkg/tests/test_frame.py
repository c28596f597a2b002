import dataclasses

import numpy as np
import pytest

from loopcmc import birkhoff
from loopcmc.cauchy import CauchyData, noncharacteristic_potential
from loopcmc.frame import (
    NotRegular, _conj_omega1, coordinate_frame_data, dalembert_construct, integrate_loop_ode,
    integrate_nodes, parallel_surface, singular_construct, split_data, sym_point,
    _surface_from_split,
)
from loopcmc.geometry import E0_VEC, E1_VEC, adjoint, to_vector
from loopcmc.loopalg import (
    E2, LoopMatrix, TailOverflow, adjugate, eval_and_dlambda, mul_coeffs, omega, product_window,
)
from loopcmc.potentials import Domain, PolyFn, PotentialPair

from conftest import N, random_plus


def swap_terms(t):
    a = np.zeros(np.shape(t) + (2, 2))
    b = a.copy()
    a[..., 0, 1] = 1.0
    b[..., 1, 0] = 1.0
    return {1: a, -1: b}


def cosh_sinh(t):
    return (np.cosh(t) * LoopMatrix.identity(N).coeffs
            + np.sinh(t) * LoopMatrix.from_terms({1: [[0, 1], [0, 0]], -1: [[0, 0], [1, 0]]}, N).coeffs)


def poly(*c, var="x"):
    return PolyFn(c, var)


def constant_pair(**kw):
    one = poly(1)
    return PotentialPair(one, one, poly(1, var="y"), poly(1, var="y"), **kw)


def test_zero_potential_gives_identity():
    zero = lambda t: {1: np.zeros(np.shape(t) + (2, 2))}
    frame = integrate_loop_ode(zero, (0, 1), 10)
    assert np.all(frame.samples == LoopMatrix.identity(N).coeffs)


def test_rk4_matches_exponential():
    frame = integrate_loop_ode(swap_terms, (0, 1), 1000)
    assert np.abs(frame.samples[-1] - cosh_sinh(1.0)).max() < 1e-10
    assert frame.det_drift < 1e-10


def test_rk4_richardson_order():
    ref = integrate_loop_ode(swap_terms, (0, 1), 200).samples[-1]
    coarse = integrate_loop_ode(swap_terms, (0, 1), 10).samples[-1]
    fine = integrate_loop_ode(swap_terms, (0, 1), 20).samples[-1]
    assert np.abs(coarse - ref).max() / np.abs(fine - ref).max() >= 14


def test_integrate_nodes_both_directions():
    nodes = np.array([0.4, -0.3, 0.0, 1.0])
    frame = integrate_nodes(swap_terms, nodes, 0.0)
    for k, t in enumerate(nodes):
        assert np.abs(frame.samples[k] - cosh_sinh(t)).max() < 1e-12


def test_tail_overflow_on_small_order():
    # A = 5 [[0, lambda^3], [lambda^-1, 0]] has A^2 = 25 lambda^2: the series spreads in degree
    big = lambda t: {3 if k == 1 else k: 5 * v for k, v in swap_terms(t).items()}
    with pytest.raises(TailOverflow):
        integrate_nodes(big, np.array([1.0]), 0.0, N=4)


def test_sym_identity():
    assert np.allclose(sym_point(LoopMatrix.identity(N), 1.0, 2.0), [0, 0, -0.25])


def test_sym_omega1_example():
    w = omega(1, N)
    g, dg = eval_and_dlambda(w, 1.0)
    expected = 0.5 * (2 * dg @ np.linalg.inv(g) - g @ E2 @ np.linalg.inv(g))
    assert np.abs(sym_point(w, 1.0, 1.0) - to_vector(expected)).max() < 1e-15


def test_sym_invariance(rng):
    for _ in range(20):
        g = random_plus(rng) @ LoopMatrix(adjugate(random_plus(rng).coeffs))
        u0, d = rng.uniform(-2, 2), rng.uniform(0.3, 3)
        right = LoopMatrix.from_terms({0: np.diag([d, 1 / d]), 1: [[0, u0 * d], [0, 0]]}, N)
        lam = rng.uniform(0.5, 2)
        assert np.abs(sym_point(g @ right, lam, 1.0) - sym_point(g, lam, 1.0)).max() <= 1e-10


@pytest.mark.parametrize("c1, b2, eps1, eps2, e_omega", [(1, -1, 1, 1, 4), (1, 1, 1, -1, 4)])
def test_coordinate_frame_examples(c1, b2, eps1, eps2, e_omega):
    A1 = np.array([[0, 0], [c1, 0]], float)
    Am1 = np.array([[0, b2], [0, 0]], float)
    fs = coordinate_frame_data(A1, Am1, 1.0)
    assert (fs.eps1, fs.eps2, fs.e_omega, fs.rho) == (eps1, eps2, e_omega, 1.0)
    # eps e^omega = -4 c1 b2 / H^2 with eps = eps1 eps2
    assert fs.eps1 * fs.eps2 * fs.e_omega == -4 * c1 * b2


def test_coordinate_frame_not_regular():
    with pytest.raises(NotRegular):
        coordinate_frame_data(np.zeros((2, 2)), np.array([[0, 1.0], [0, 0]]), 1.0)


def test_constant_pair_structure():
    field = dalembert_construct(constant_pair(domain=Domain((-0.5, 0.5), (-0.5, 0.5), (11, 11))))
    assert np.all(field.big_cell)
    assert field.residual.max() < 1e-12
    assert np.abs(field.f[5, 5]).max() == 0 and np.all(field.F[5, 5] == np.eye(2))
    assert np.allclose(field.c1, 1) and np.allclose(field.b2, 1)


def test_maurer_cartan_support_by_finite_differences():
    # F^-1 dF/dx must be a polynomial of degree <= 1 in lambda
    h = 1e-4
    xs, ys = np.array([0.2 - h, 0.2 + h]), np.array([-0.1])
    vals = []
    lams = np.array([0.5, 1.0, 2.0, 3.0])
    for lam in lams:
        f = dalembert_construct(dataclasses.replace(constant_pair(), lam=lam), axes=(xs, ys))
        F0, F1 = f.F[0, 0], f.F[1, 0]
        mid = 0.5 * (F0 + F1)
        vals.append(np.linalg.inv(mid) @ (F1 - F0) / (2 * h))
    vals = np.array(vals).reshape(len(lams), 4)
    coef, *_ = np.linalg.lstsq(np.stack([np.ones_like(lams), lams], 1), vals, rcond=None)
    fit = np.stack([np.ones_like(lams), lams], 1) @ coef
    assert np.abs(fit - vals).max() < 1e-6


def test_class_one_pair_c1_equals_beta():
    pair = PotentialPair(poly(1), poly(-1, 0, 1), poly(1, var="y"), poly(1, var="y"),
                         domain=Domain((-1.5, 1.5), (-1.5, 1.5), (13, 13)))
    field = dalembert_construct(pair)
    assert np.all(field.big_cell)
    assert np.abs(field.c1 - pair.beta(field.x)).max() < 1e-10


CROSS_CAP = CauchyData(PolyFn((2, 0, 0.2), "v"), PolyFn((0, 1), "v"), PolyFn((0, 1), "v"))


def test_singular_diagonal_data():
    sp = noncharacteristic_potential(CROSS_CAP)
    h = 1e-4
    vs = np.linspace(-0.6, 0.6, 7)
    field = singular_construct(sp, axes=(np.array([-h, 0.0, h]), vs))
    assert np.all(field.stratum[1] == 1) and np.all(field.stratum[[0, 2]] == 0)
    assert np.abs(field.c_minus1[1]).max() < 1e-15
    dcu = (field.c_minus1[2] - field.c_minus1[0]) / (2 * h)
    assert np.abs(dcu - 2 * sp.beta1(vs)).max() < 1e-6
    # limiting derivatives on the diagonal
    null = adjoint(field.F[1], E0_VEC - E1_VEC)
    assert np.abs(field.fx[1] - sp.gamma1(vs)[:, None] * null).max() < 1e-5
    assert np.abs(field.fy[1] + sp.gamma_m3(vs)[:, None] * null).max() < 1e-5


def test_plus_factor_derivative_on_diagonal():
    sp = noncharacteristic_potential(CROSS_CAP)
    h, v = 1e-4, 0.3
    nodes = np.array([v - h, v, v + h])
    X = integrate_nodes(lambda t: sp.terms("x", t), nodes, 0.0)
    # Phi~(u, v) = X(v + u)^-1 X(v - u)
    phis = [mul_coeffs(adjugate(X.samples[2 if u > 0 else 0]), X.samples[0 if u > 0 else 2])[0]
            for u in (h, -h)]
    plus = [birkhoff.factor_coeffs(p)[1] for p in phis]
    d = (plus[0] - plus[1]) / (2 * h)
    assert d[N + 1, 0, 1] == pytest.approx(2 * sp.gamma_m1(v), abs=1e-6)
    assert d[N + 3, 0, 1] == pytest.approx(2 * sp.gamma1(v), abs=1e-6)


def test_two_factorizations_give_same_surface():
    # S(Y H+^-1) from omega_1 Phi~ = H- H+ equals S(Y G+^-1) from Phi~ = G- G+
    sp = noncharacteristic_potential(CROSS_CAP)
    u, v = 0.05, 0.2
    x, y = u + v, v - u
    X = integrate_nodes(lambda t: sp.terms("x", t), np.array([x, y]), 0.0)
    phi = mul_coeffs(adjugate(X.samples[:1]), X.samples[1:])[0]
    gm, gp, *_ = birkhoff.factor_coeffs(phi)
    hm, hp, *_ = birkhoff.factor_coeffs(product_window(omega(1, N).coeffs, phi, -N, N))
    ax, ay = sp.terms("x", np.array([x])), sp.terms("x", np.array([y]))
    a = _surface_from_split(split_data(X.samples[1:], gm, gp, ax, ay, 1.0), 1.0, 1.0)
    b = _surface_from_split(split_data(X.samples[1:], hm, hp, _conj_omega1(ax), ay, 1.0), 1.0, 1.0)
    for p, q in zip(a, b):
        assert np.abs(p - q).max() < 1e-8


def test_parallel_surface_strata_and_blow_up():
    field = dalembert_construct(constant_pair(domain=Domain((-0.2, 0.2), (-0.2, 0.2), (3, 3))))
    assert np.all(parallel_surface(field).big_cell)
    data = CauchyData(PolyFn((2,), "v"), PolyFn((1,), "v"), PolyFn((0, 1), "v"))
    us = np.array([1e-1, 1e-2, 1e-3, 0.0])
    sing = singular_construct(noncharacteristic_potential(data), axes=(us, np.array([0.0])))
    par = parallel_surface(sing)
    assert par.stratum[3, 0] == -1
    norms = np.linalg.norm(par.f[:3, 0], axis=-1)
    assert np.all(np.diff(norms) > 0) and norms[-1] > 1e3
