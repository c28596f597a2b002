"""Integration of potentials, the two construction pipelines and the Sym formula.

Pipelines
---------
pair:        ``Phi = X(x)^-1 Y(y) = H- H+`` and ``F = Y H+^-1``.
singular:    ``X~`` solves ``X~^-1 dX~ = A`` (a singular potential, or the
             x-part of a characteristic pair), ``Phi~ = X~(x)^-1 Y(y) = G- G+``
             and ``F~ = Y G+^-1``; the surface lives on ``omega_1 Phi~``.

Surface derivatives are computed analytically from the Maurer-Cartan form
``alpha = F^-1 dF``, which follows from the factors and the potentials:
``alpha = P_{>=0}(G-^-1 A_x G-) dx + P_{<0}(G+ A_y G+^-1) dy``.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import birkhoff
from .birkhoff import Stratum
from .geometry import (
    E2_VEC, E0_VEC, E1_VEC, ad_e0, ad_e1, adjoint, adjoint_matrix, bracket,
    eucl_ip, eucl_norm, inv2, to_matrix, to_vector,
)
from .loopalg import (
    E2, DEFAULT_ORDER, LoopMatrix, TailOverflow, TailWarning, adjugate,
    det_residual, evaluate, identity_coeffs, mul_coeffs, mul_sparse, omega,
    order_of, product_window,
)
from .tolerances import TOL

MAX_STEP = 1e-3
CHUNK = 2048


class NotRegular(ArithmeticError):
    """c1 or b2 vanishes: the point is a class I singularity or worse."""


# ---------------------------------------------------------------- ODE

@dataclass(frozen=True, eq=False)
class AxisFrame:
    nodes: np.ndarray        # (n,)
    samples: np.ndarray      # (n, 2N+1, 2, 2)
    step: float
    init: LoopMatrix
    tail_mass: float
    det_drift: float

    def __getitem__(self, i):
        return LoopMatrix(self.samples[i], self.tail_mass)


def _stage_terms(terms_fn, times):
    """Evaluate a potential at many times; returns a list of dicts."""
    batch = terms_fn(np.asarray(times))
    return [{d: m[i] for d, m in batch.items()} for i in range(len(times))]


def _rk4_path(terms_fn, X, t_from, t_to, max_step):
    """Advance ``X' = X A(t)`` from ``t_from`` to ``t_to``; returns (X, tail)."""
    span = t_to - t_from
    if span == 0:
        return X, 0.0
    m = max(1, math.ceil(abs(span) / max_step - 1e-9))
    h = span / m
    starts = t_from + h * np.arange(m)
    times = np.stack([starts, starts + 0.5 * h, starts + h], axis=1).ravel()
    terms = _stage_terms(terms_fn, times)
    tail = 0.0
    for i in range(m):
        a0, ah, a1 = terms[3 * i], terms[3 * i + 1], terms[3 * i + 2]
        k1, t1 = mul_sparse(X, a0)
        k2, t2 = mul_sparse(X + 0.5 * h * k1, ah)
        k3, t3 = mul_sparse(X + 0.5 * h * k2, ah)
        k4, t4 = mul_sparse(X + h * k3, a1)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        tail += abs(h) / 6.0 * (t1 + 2 * t2 + 2 * t3 + t4)
    return X, tail


def integrate_nodes(terms_fn, nodes, t0, init=None, N=DEFAULT_ORDER, max_step=MAX_STEP):
    """Solve ``X^-1 dX = A(t) dt`` with ``X(t0) = init`` at every node.

    ``terms_fn(t)`` returns ``{degree: (..., 2, 2)}`` for an array of times.
    Returns an :class:`AxisFrame` with samples in the order of ``nodes``.
    """
    nodes = np.asarray(nodes, dtype=float)
    X0 = identity_coeffs(N) if init is None else np.array(init.coeffs)
    order = np.argsort(nodes)
    sorted_nodes = nodes[order]
    out = np.empty((len(nodes), 2 * N + 1, 2, 2))
    tail = 0.0
    split = np.searchsorted(sorted_nodes, t0)
    for direction, idx in ((1, range(split, len(nodes))), (-1, range(split - 1, -1, -1))):
        X, t = X0, t0
        for k in idx:
            X, dt = _rk4_path(terms_fn, X, t, sorted_nodes[k], max_step)
            tail += dt
            t = sorted_nodes[k]
            if tail > TOL["tail_overflow"]:
                raise TailOverflow(f"truncation tail mass {tail:.3e} exceeds "
                                   f"{TOL['tail_overflow']:.0e} at t={t:.6g}; raise the order")
            out[order[k]] = X
    if tail > TOL["tail_warn"]:
        warnings.warn(f"ODE truncation tail mass {tail:.3e}", TailWarning, stacklevel=2)
    drift = float(np.max(det_residual(out))) if len(nodes) else 0.0
    step = float(np.max(np.diff(sorted_nodes))) if len(nodes) > 1 else 0.0
    return AxisFrame(nodes, out, step, LoopMatrix(X0), tail, drift)


def integrate_loop_ode(terms_fn, interval, steps, init=None, N=DEFAULT_ORDER):
    """Classical RK4 on a uniform grid of ``steps`` steps starting at ``interval[0]``."""
    if steps < 2:
        raise ValueError("need at least 2 steps")
    lo, hi = interval
    nodes = np.linspace(lo, hi, steps + 1)
    h = (hi - lo) / steps
    return integrate_nodes(terms_fn, nodes, lo, init, N, max_step=abs(h) * (1 + 1e-12))


# ---------------------------------------------------------------- per-point evaluation

def _terms_to_coeffs(terms, N, batch):
    c = np.zeros(batch + (2 * N + 1, 2, 2))
    for d, m in terms.items():
        c[..., N + d, :, :] += m
    return c


def _degree_range(terms):
    degs = [d for d, m in terms.items() if np.any(m != 0)] or [0]
    return min(degs), max(degs)


def _eval_window(win, lo, lam):
    """Value and lambda-derivative of a coefficient window starting at degree ``lo``."""
    k = lo + np.arange(win.shape[-3])
    p = np.array([lam ** int(d) for d in k])
    dp = np.array([int(d) * lam ** int(d - 1) if d else 0.0 for d in k])
    return np.einsum("k,...kij->...ij", p, win), np.einsum("k,...kij->...ij", dp, win)


def split_data(Y, gm, gp, ax_terms, ay_terms, lam):
    """Frame quantities at ``lambda = lam`` from ``X^-1 Y = G- G+``.

    ``ax_terms`` / ``ay_terms`` are the potentials at the point as sparse
    dicts of ``(P, 2, 2)`` arrays.  Returns a dict with ``F``, ``F_lam``,
    ``alpha_x``, ``alpha_y`` (values), their lambda-derivatives, the degree
    1 and -1 Maurer-Cartan coefficients and ``xi_x``, ``xi_y`` (the degree -1
    coefficient of ``G-^-1 dG-`` along x and y).
    """
    N = order_of(Y)
    batch = Y.shape[:-3]
    Ax = _terms_to_coeffs(ax_terms, N, batch)
    Ay = _terms_to_coeffs(ay_terms, N, batch)
    _, xmax = _degree_range(ax_terms)
    ymin, _ = _degree_range(ay_terms)
    gm_inv, gp_inv = adjugate(gm), adjugate(gp)

    # x-part: window [-1, xmax] of G-^-1 A_x G-
    B = product_window(Ax, gm, -N, N)
    cx = product_window(gm_inv, B, -1, max(xmax, 0))
    # y-part: window [ymin, -1] of G+ A_y G+^-1
    D = product_window(Ay, gp_inv, -N, N)
    cy = product_window(gp, D, min(ymin, -1), 0)

    ax_val, ax_dl = _eval_window(cx[..., 1:, :, :], 0, lam)
    ay_val, ay_dl = _eval_window(cy[..., :-1, :, :], min(ymin, -1), lam)

    Yv, Yd = evaluate(Y, lam)
    Gv, Gd = evaluate(gp, lam)
    Gi = inv2(Gv)
    F = Yv @ Gi
    F_lam = Yd @ Gi - F @ Gd @ Gi
    return {
        "F": F, "F_lam": F_lam,
        "alpha_x": ax_val, "dalpha_x": ax_dl,
        "alpha_y": ay_val, "dalpha_y": ay_dl,
        "A1": cx[..., 2, :, :] if cx.shape[-3] > 2 else np.zeros(batch + (2, 2)),
        "Am1": cy[..., -2, :, :],
        "xi_x": -cx[..., 0, :, :],
        "xi_y": cy[..., -2, :, :],
    }


def sym_matrix(F, F_lam, lam):
    """``2 lam F_lam F^-1 - Ad_F e2`` as a matrix."""
    Fi = inv2(F)
    return 2 * lam * F_lam @ Fi - F @ E2 @ Fi


def sym_point(G, lam, H):
    """Sym formula ``(2 lam dG/dlam G^-1 - Ad_G e2) / 2H`` as an L^3 vector."""
    if lam == 0 or H == 0:
        raise ValueError("lambda and H must be nonzero")
    g, dg = evaluate(G.coeffs, lam)
    return to_vector(sym_matrix(g, dg, lam)) / (2 * H)


def sym_derivative(F, alpha, dalpha, lam, H):
    """``d f`` along one direction from the Maurer-Cartan value and its lambda-derivative."""
    inner = 2 * lam * dalpha - bracket(alpha, E2)
    return to_vector(adjoint_matrix(F, inner)) / (2 * H)


# ---------------------------------------------------------------- coordinate frame

@dataclass(frozen=True)
class FrameScalars:
    c1: float
    b2: float
    rho: float
    eps1: int
    eps2: int
    e_omega: float
    T: np.ndarray


def frame_scalars(c1, b2, H):
    """Batched ``(eps1, eps2, e_omega, rho)``; NaN where not regular."""
    c1, b2 = np.asarray(c1, float), np.asarray(b2, float)
    with np.errstate(divide="ignore", invalid="ignore"):
        eps1 = np.sign(c1)
        eps2 = -np.sign(b2)
        e_omega = np.abs(4 * c1 * b2) / H ** 2
        rho = np.abs(b2 / c1) ** 0.25
    bad = (c1 == 0) | (b2 == 0)
    return (np.where(bad, 0, eps1), np.where(bad, 0, eps2),
            np.where(bad, np.nan, e_omega), np.where(bad, np.nan, rho))


def coordinate_frame_data(A1, Am1, H):
    """Coordinate-frame scalars from the degree 1 and -1 Maurer-Cartan coefficients.

    ``A1``, ``Am1`` may be 2x2 matrices or :class:`LoopVectorField` values of
    ``alpha_x`` / ``alpha_y``.
    """
    if hasattr(A1, "coefficient"):
        A1 = A1.coefficient(1)
    if hasattr(Am1, "coefficient"):
        Am1 = Am1.coefficient(-1)
    c1 = float(np.real(A1[1, 0]))
    b2 = float(np.real(Am1[0, 1]))
    if c1 == 0 or b2 == 0:
        raise NotRegular(f"c1={c1}, b2={b2}")
    eps1, eps2, e_omega, rho = frame_scalars(c1, b2, H)
    return FrameScalars(c1, b2, float(rho), int(eps1), int(eps2), float(e_omega),
                        np.diag([float(rho), 1 / float(rho)]))


# ---------------------------------------------------------------- frame fields

@dataclass(eq=False)
class FrameField:
    """Per-grid-point surface data; arrays have leading shape ``(na, nb)``.

    ``axes`` names the grid coordinates (``("x", "y")`` or ``("u", "v")``).
    Vectors are ``(..., 3)`` arrays in the ``(e0, e1, e2)`` basis.  Values
    are NaN where the point could not be evaluated (outside the cells the
    pipeline covers).
    """

    kind: str
    axes: tuple
    a: np.ndarray
    b: np.ndarray
    x: np.ndarray
    y: np.ndarray
    H: float
    lam: float
    stratum: np.ndarray
    c_minus1: np.ndarray
    b_minus1: np.ndarray
    residual: np.ndarray
    F: np.ndarray
    f: np.ndarray
    fx: np.ndarray
    fy: np.ndarray
    normal: np.ndarray
    nE: np.ndarray
    dnE_x: np.ndarray
    dnE_y: np.ndarray
    chi: np.ndarray
    c1: np.ndarray = None
    b2: np.ndarray = None
    eps1: np.ndarray = None
    eps2: np.ndarray = None
    e_omega: np.ndarray = None
    rho: np.ndarray = None
    dc_x: np.ndarray = None
    dc_y: np.ndarray = None
    Z: np.ndarray = None
    dZ_x: np.ndarray = None
    dZ_y: np.ndarray = None
    phi_hat: np.ndarray = None
    tail_mass: float = 0.0
    spec: object = None
    extra: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.stratum.shape

    @property
    def fa(self):
        """Derivative of f along the first grid axis."""
        return self.fx - self.fy if self.axes == ("u", "v") else self.fx

    @property
    def fb(self):
        return self.fx + self.fy if self.axes == ("u", "v") else self.fy

    def d_along(self, dx_name, dy_name, which):
        gx, gy = getattr(self, dx_name), getattr(self, dy_name)
        if self.axes == ("u", "v"):
            return gx - gy if which == 0 else gx + gy
        return gx if which == 0 else gy

    @property
    def big_cell(self):
        return self.stratum == int(Stratum.BigCell)


def _chunks(n, size=CHUNK):
    for s in range(0, n, size):
        yield slice(s, min(n, s + size))


def _conj_omega1(terms):
    """Sparse terms of ``omega_1 A omega_1^-1`` for a sparse potential ``A``."""
    out = {}
    for d, m in terms.items():
        a, b, c, dd = m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1]
        z = np.zeros_like(a)
        # omega_1 [[a, b], [c, d]] omega_1^-1 = [[d, -c l^2], [-b l^-2, a]]
        for deg, mat in ((d, _mat(dd, z, z, a)), (d + 2, _mat(z, -c, z, z)),
                         (d - 2, _mat(z, z, -b, z))):
            if np.any(mat):
                out[deg] = out.get(deg, 0) + mat
    return out


def _mat(a, b, c, d):
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _alloc(shape, *names, dim=3):
    return {n: np.full(shape + (dim,), np.nan) if dim else np.full(shape, np.nan) for n in names}


def _surface_from_split(sd, lam, H):
    F = sd["F"]
    S = sym_matrix(F, sd["F_lam"], lam)
    f = (to_vector(S) + E2_VEC) / (2 * H)
    fx = sym_derivative(F, sd["alpha_x"], sd["dalpha_x"], lam, H)
    fy = sym_derivative(F, sd["alpha_y"], sd["dalpha_y"], lam, H)
    return f, fx, fy


def _unit_normal_and_derivative(F, W, dW_x, dW_y, alpha_x, alpha_y):
    """``n = Ad_e0 Ad_F W / |Ad_F W|`` and its derivatives along x and y."""
    V = adjoint(F, W)
    Wm = to_matrix(W)
    dV = []
    for alpha, dW in ((alpha_x, dW_x), (alpha_y, dW_y)):
        dV.append(to_vector(adjoint_matrix(F, bracket(alpha, Wm) + to_matrix(dW))))
    norm = eucl_norm(V)[..., None]
    n = ad_e0(V / norm)
    dn = [ad_e0(d / norm - V * eucl_ip(V, d)[..., None] / norm ** 3) for d in dV]
    return n, dn[0], dn[1], V


def dalembert_construct(pair, axes=None):
    """Surface of a regular potential pair on its (x, y) grid.

    ``axes`` overrides the grid with explicit coordinate arrays ``(xs, ys)``.
    """
    xs, ys = axes if axes is not None else pair.domain.axes()
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    x0, y0 = pair.base_point
    N, lam, H = pair.order, pair.lam, pair.H
    X = integrate_nodes(lambda t: pair.terms("x", t), xs, x0, N=N)
    Y = integrate_nodes(lambda t: pair.terms("y", t), ys, y0, N=N)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    shape = gx.shape
    n = gx.size
    ix, iy = np.meshgrid(np.arange(len(xs)), np.arange(len(ys)), indexing="ij")
    ix, iy = ix.ravel(), iy.ravel()

    out = _alloc((n,), "f", "fx", "fy", "normal", "nE", "dnE_x", "dnE_y")
    out.update(_alloc((n,), "chi", "c_minus1", "b_minus1", "residual", "c1", "b2", dim=0))
    stratum = np.zeros(n, dtype=int)
    Fs = np.full((n, 2, 2), np.nan)
    phi_all = np.empty((n, 2 * N + 1, 2, 2))
    tail = X.tail_mass + Y.tail_mass
    Xinv = adjugate(X.samples)
    for sl in _chunks(n):
        phi, t = mul_coeffs(Xinv[ix[sl]], Y.samples[iy[sl]])
        tail = max(tail, X.tail_mass + Y.tail_mass + float(np.max(t, initial=0)))
        phi_all[sl] = phi
        st, c1m, b1m, minus, plus, res, _ = birkhoff.detect_cells(phi, full=True)
        stratum[sl], out["c_minus1"][sl], out["b_minus1"][sl] = st, c1m, b1m
        out["residual"][sl] = res
        ok = np.nonzero(st == int(Stratum.BigCell))[0]
        if len(ok) == 0:
            continue
        g = np.arange(sl.start, sl.stop)[ok]
        ax = pair.terms("x", gx.ravel()[g])
        ay = pair.terms("y", gy.ravel()[g])
        sd = split_data(Y.samples[iy[g]], minus[ok], plus[ok], ax, ay, lam)
        f, fx, fy = _surface_from_split(sd, lam, H)
        F = sd["F"]
        zero = np.zeros_like(fx)
        nE, dnx, dny, V = _unit_normal_and_derivative(F, np.broadcast_to(E2_VEC, fx.shape),
                                                       zero, zero, sd["alpha_x"], sd["alpha_y"])
        Fs[g] = F
        out["f"][g], out["fx"][g], out["fy"][g] = f, fx, fy
        out["normal"][g], out["nE"][g], out["dnE_x"][g], out["dnE_y"][g] = V, nE, dnx, dny
        out["chi"][g] = eucl_ip(np.cross(fx, fy), nE)
        out["c1"][g] = np.real(sd["A1"][..., 1, 0])
        out["b2"][g] = np.real(sd["Am1"][..., 0, 1])
    eps1, eps2, e_omega, rho = frame_scalars(out["c1"], out["b2"], H)
    r = lambda a: a.reshape(shape + a.shape[1:])
    return FrameField(
        kind="pair", axes=("x", "y"), a=xs, b=ys, x=gx, y=gy, H=H, lam=lam,
        stratum=r(stratum), c_minus1=r(out["c_minus1"]), b_minus1=r(out["b_minus1"]),
        residual=r(out["residual"]), F=r(Fs), f=r(out["f"]), fx=r(out["fx"]), fy=r(out["fy"]),
        normal=r(out["normal"]), nE=r(out["nE"]), dnE_x=r(out["dnE_x"]), dnE_y=r(out["dnE_y"]),
        chi=r(out["chi"]), c1=r(out["c1"]), b2=r(out["b2"]), eps1=r(eps1), eps2=r(eps2),
        e_omega=r(e_omega), rho=r(rho), phi_hat=r(phi_all), tail_mass=tail, spec=pair)


def singular_construct(spec, axes=None, base=0.0):
    """Surface of a singular potential (grid in (u, v)) or a characteristic
    singular pair (grid in (x, y)).

    ``X~`` and ``Y`` are integrated from ``base`` with initial value I; for a
    singular potential ``Y = X~``.  ``axes`` overrides the grid.
    """
    characteristic = spec.kind == "characteristic"
    a, b = axes if axes is not None else spec.domain.axes()
    a, b = np.asarray(a, float), np.asarray(b, float)
    N, lam, H = spec.order, spec.lam, spec.H
    ga, gb = np.meshgrid(a, b, indexing="ij")
    shape = ga.shape
    if characteristic:
        gx, gy = ga, gb
        X = integrate_nodes(lambda t: spec.terms("x", t), a, base, N=N)
        Y = integrate_nodes(lambda t: spec.terms("y", t), b, base, N=N)
        ix, iy = np.meshgrid(np.arange(len(a)), np.arange(len(b)), indexing="ij")
        ix, iy = ix.ravel(), iy.ravel()
        y_terms = lambda t: spec.terms("y", t)
    else:
        gx, gy = ga + gb, gb - ga
        nodes = np.unique(np.concatenate([gx.ravel(), gy.ravel()]))
        X = integrate_nodes(lambda t: spec.terms("x", t), nodes, base, N=N)
        Y = X
        ix = np.searchsorted(nodes, gx.ravel())
        iy = np.searchsorted(nodes, gy.ravel())
        y_terms = lambda t: spec.terms("x", t)
    x_terms = lambda t: spec.terms("x", t)
    n = ga.size
    flat_x, flat_y = gx.ravel(), gy.ravel()

    out = _alloc((n,), "f", "fx", "fy", "normal", "nE", "dnE_x", "dnE_y", "Z", "dZ_x", "dZ_y")
    out.update(_alloc((n,), "chi", "c_minus1", "b_minus1", "residual", "dc_x", "dc_y", dim=0))
    stratum = np.zeros(n, dtype=int)
    Fs = np.full((n, 2, 2), np.nan)
    phi_all = np.empty((n, 2 * N + 1, 2, 2))
    fallback = np.zeros(n, dtype=bool)
    tail = X.tail_mass + Y.tail_mass
    Xinv = adjugate(X.samples)
    w1 = omega(1, N).coeffs
    for sl in _chunks(n):
        g_all = np.arange(sl.start, sl.stop)
        phi_t, t = mul_coeffs(Xinv[ix[sl]], Y.samples[iy[sl]])
        tail = max(tail, X.tail_mass + Y.tail_mass + float(np.max(t, initial=0)))
        phi_h = product_window(w1, phi_t, -N, N)
        phi_all[sl] = phi_h
        st, _, _, hminus, hplus = birkhoff.detect_cells(phi_h)
        stratum[sl] = st
        gm, gp, res, cond = birkhoff.factor_coeffs(phi_t)
        tilde_ok = birkhoff.is_accepted(res, cond)
        out["residual"][sl] = np.where(tilde_ok, res, np.nan)
        out["c_minus1"][sl] = np.where(tilde_ok, np.real(gm[:, N - 1, 1, 0]), np.nan)
        out["b_minus1"][sl] = np.where(tilde_ok, np.real(gm[:, N - 1, 0, 1]), np.nan)

        ok = np.nonzero(tilde_ok)[0]
        if len(ok):
            g = g_all[ok]
            ax, ay = x_terms(flat_x[g]), y_terms(flat_y[g])
            sd = split_data(Y.samples[iy[g]], gm[ok], gp[ok], ax, ay, lam)
            f, fx, fy = _surface_from_split(sd, lam, H)
            F = sd["F"]
            c = out["c_minus1"][g]
            dcx = np.real(sd["xi_x"][..., 1, 0])
            dcy = np.real(sd["xi_y"][..., 1, 0])
            # normal direction W' = c e2 + e0 - e1, smooth across the singular set
            W = c[:, None] * E2_VEC + E0_VEC - E1_VEC
            nE, dnx, dny, V = _unit_normal_and_derivative(
                F, W, dcx[:, None] * E2_VEC, dcy[:, None] * E2_VEC, sd["alpha_x"], sd["alpha_y"])
            with np.errstate(divide="ignore", invalid="ignore"):
                normal = adjoint(F, E2_VEC + (E0_VEC - E1_VEC) / c[:, None])
            Wz = -2 * E2_VEC - c[:, None] * (E1_VEC + E0_VEC)
            Zv = adjoint(F, Wz)
            dZ = [to_vector(adjoint_matrix(F, bracket(al, to_matrix(Wz))
                                           - to_matrix(dc[:, None] * (E1_VEC + E0_VEC))))
                  for al, dc in ((sd["alpha_x"], dcx), (sd["alpha_y"], dcy))]
            Fs[g] = F
            out["f"][g], out["fx"][g], out["fy"][g] = f, fx, fy
            out["nE"][g], out["dnE_x"][g], out["dnE_y"][g] = nE, dnx, dny
            out["normal"][g] = normal
            out["chi"][g] = eucl_ip(np.cross(fx, fy), nE)
            out["dc_x"][g], out["dc_y"][g] = dcx, dcy
            out["Z"][g], out["dZ_x"][g], out["dZ_y"][g] = Zv, dZ[0], dZ[1]

        # points where Phi~ left the big cell but omega_1 Phi~ is in it
        fb = np.nonzero(~tilde_ok & (st == int(Stratum.BigCell)))[0]
        if len(fb):
            g = g_all[fb]
            fallback[g] = True
            ax = _conj_omega1(x_terms(flat_x[g]))
            ay = y_terms(flat_y[g])
            sd = split_data(Y.samples[iy[g]], hminus[fb], hplus[fb], ax, ay, lam)
            f, fx, fy = _surface_from_split(sd, lam, H)
            F = sd["F"]
            zero = np.zeros_like(fx)
            nE, dnx, dny, V = _unit_normal_and_derivative(
                F, np.broadcast_to(E2_VEC, fx.shape), zero, zero, sd["alpha_x"], sd["alpha_y"])
            # sign(c_-1) is unavailable here; continue it from the side of the singular set
            if characteristic:
                side = np.sign(flat_y[g] * spec.sigma(flat_y[g]))
            else:
                side = np.sign(ga.ravel()[g] * spec.beta1(gb.ravel()[g]))
            side = np.where(side == 0, 1.0, side)[:, None]
            Fs[g] = F
            out["f"][g], out["fx"][g], out["fy"][g] = f, fx, fy
            out["nE"][g], out["dnE_x"][g], out["dnE_y"][g] = side * nE, side * dnx, side * dny
            out["normal"][g] = V
            out["chi"][g] = eucl_ip(np.cross(fx, fy), out["nE"][g])

    r = lambda arr: arr.reshape(shape + arr.shape[1:])
    axes_names = ("x", "y") if characteristic else ("u", "v")
    return FrameField(
        kind=spec.kind, axes=axes_names, a=a, b=b, x=gx, y=gy, H=H, lam=lam,
        stratum=r(stratum), c_minus1=r(out["c_minus1"]), b_minus1=r(out["b_minus1"]),
        residual=r(out["residual"]), F=r(Fs), f=r(out["f"]), fx=r(out["fx"]), fy=r(out["fy"]),
        normal=r(out["normal"]), nE=r(out["nE"]), dnE_x=r(out["dnE_x"]), dnE_y=r(out["dnE_y"]),
        chi=r(out["chi"]), dc_x=r(out["dc_x"]), dc_y=r(out["dc_y"]), Z=r(out["Z"]),
        dZ_x=r(out["dZ_x"]), dZ_y=r(out["dZ_y"]), phi_hat=r(phi_all), tail_mass=tail,
        spec=spec, extra={"fallback": r(fallback)})


def parallel_surface(field):
    """Parallel surface ``Ad_e1 (f + N / H)`` with cell classes of ``Ad_e1 Phi``.

    Conjugation by ``e1`` swaps the small cells ``P^k`` and ``P^-k``; points
    that were on the boundary of the big cell become blow-up points.  No base
    point is subtracted, since the natural base point is itself singular.
    """
    N = order_of(field.phi_hat)
    conj = field.phi_hat[..., :, ::-1, ::-1].copy()
    st = np.empty(field.shape, dtype=int)
    flat = conj.reshape((-1,) + conj.shape[-3:])
    st_flat = st.reshape(-1)
    for sl in _chunks(len(flat)):
        st_flat[sl] = birkhoff.detect_cells(flat[sl])[0]
    with np.errstate(invalid="ignore"):
        fp = ad_e1(field.f - E2_VEC / (2 * field.H) + field.normal / field.H)
    res = FrameField(**{k: getattr(field, k) for k in field.__dataclass_fields__})
    res.stratum = st
    res.f = fp
    nan = np.full_like(fp, np.nan)
    res.fx = res.fy = res.nE = res.dnE_x = res.dnE_y = res.normal = nan
    res.chi = np.full(field.shape, np.nan)
    res.extra = dict(field.extra, parallel=True)
    return res
