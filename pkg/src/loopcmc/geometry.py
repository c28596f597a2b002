"""Vector algebra on sl(2, R) = L^3, normals, the degeneracy function and
singularity classification.

Vectors are arrays ``(..., 3)`` holding components ``(t, x1, x2)`` in the
basis ``e0, e1, e2`` of trace-free real 2x2 matrices, with Lorentzian product
``<X, Y> = tr(XY) / 2`` (signature ``-, +, +``).
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from .loopalg import E0, E1, E2
from .tolerances import TOL

BASIS = np.stack([E0, E1, E2])
E0_VEC = np.array([1.0, 0.0, 0.0])
E1_VEC = np.array([0.0, 1.0, 0.0])
E2_VEC = np.array([0.0, 0.0, 1.0])
_AD_E0 = np.array([1.0, -1.0, -1.0])
_AD_E1 = np.array([-1.0, 1.0, -1.0])


class RankZero(ArithmeticError):
    """df vanishes at the point: no null direction is defined."""


class Undefined(ArithmeticError):
    pass


def to_vector(m):
    m = np.real(np.asarray(m))
    t = 0.5 * (m[..., 1, 0] - m[..., 0, 1])
    x1 = 0.5 * (m[..., 0, 1] + m[..., 1, 0])
    x2 = -m[..., 0, 0]
    return np.stack([t, x1, x2], axis=-1)


def to_matrix(v):
    v = np.asarray(v)
    return np.einsum("...i,ijk->...jk", v, BASIS)


def mink_ip(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return -a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def eucl_ip(a, b):
    return np.sum(np.asarray(a) * np.asarray(b), axis=-1)


def eucl_norm(a):
    return np.linalg.norm(a, axis=-1)


def cross(a, b):
    """Euclidean cross product in the e-basis (equals ``-Ad_{e0}[A, B] / 2``)."""
    return np.cross(a, b)


def ad_e0(v):
    return np.asarray(v) * _AD_E0


def ad_e1(v):
    return np.asarray(v) * _AD_E1


def inv2(m):
    """Inverse of unimodular 2x2 matrices (adjugate)."""
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 1, 1] = m[..., 0, 0]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    return out


def adjoint(g, v):
    """``Ad_g v = g v g^-1`` for unimodular ``g`` and vectors ``v``."""
    return to_vector(g @ to_matrix(v) @ inv2(g))


def adjoint_matrix(g, m):
    return g @ m @ inv2(g)


def bracket(a, b):
    return a @ b - b @ a


# ---------------------------------------------------------------- classification

class SingularityType(str, enum.Enum):
    CuspidalEdge = "CuspidalEdge"
    Swallowtail = "Swallowtail"
    CuspidalCrossCap = "CuspidalCrossCap"
    ClassIEdge = "ClassIEdge"
    Degenerate = "Degenerate"
    FoldOther = "Fold/Other"


@dataclass
class SingularityReport:
    location: tuple
    type: SingularityType
    evidence: dict = field(default_factory=dict)
    cls: str = "II"
    source: str = "numeric"

    def to_dict(self):
        return {"location": [float(c) for c in self.location], "type": self.type.value,
                "class": self.cls, "source": self.source,
                "evidence": {k: _jsonable(v) for k, v in self.evidence.items()}}


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, SingularityType):
        return v.value
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


jsonable = _jsonable


def _zero(x, tol=None):
    return abs(x) <= (TOL["zero"] if tol is None else tol)


def symbolic_type(s, t, dtheta, ds, dt, t_vanishes=False):
    """Type of the class II point from Cauchy data values and first derivatives.

    ``t_vanishes`` marks data with ``t`` identically zero near the point.
    """
    if _zero(dtheta) or _zero(s - t) or _zero(s + t):
        return SingularityType.Degenerate
    if not _zero(s) and not _zero(t):
        return SingularityType.CuspidalEdge
    if _zero(s) and not _zero(ds) and not _zero(t):
        return SingularityType.Swallowtail
    if _zero(t) and not _zero(dt) and not _zero(s):
        return SingularityType.CuspidalCrossCap
    if t_vanishes:
        # not a front anywhere on the curve and tau vanishes identically
        return SingularityType.Degenerate
    return SingularityType.FoldOther


# ---------------------------------------------------------------- normals and fields

def euclidean_normal(F, c_minus1=None):
    """Euclidean unit normal ``Ad_e0 Ad_F W / |Ad_F W|``.

    ``W = e2`` on the big cell.  Near the big-cell boundary pass the frame
    ``Y G+^-1`` and ``c_-1``; then ``W = c_-1 e2 + e0 - e1``, which extends
    the normal continuously (and lightlike) across the boundary.
    """
    F = np.asarray(F, float)
    if np.any(np.isnan(F)):
        raise Undefined("no frame at this point (deeper cell)")
    if c_minus1 is None:
        W = np.broadcast_to(E2_VEC, F.shape[:-2] + (3,))
    else:
        c = np.asarray(c_minus1, float)[..., None]
        W = c * E2_VEC + E0_VEC - E1_VEC
    V = adjoint(F, W)
    return ad_e0(V / eucl_norm(V)[..., None])


def _grid_derivatives(field, name_x, name_y):
    return field.d_along(name_x, name_y, 0), field.d_along(name_x, name_y, 1)


def chi_gradient(field):
    """Central-difference gradient of chi along the two grid axes, ``(..., 2)``."""
    ga, gb = np.gradient(field.chi, field.a, field.b)
    return np.stack([ga, gb], axis=-1)


def null_direction(fa, fb, strict=True):
    """Kernel of ``df = [fa, fb]`` in grid coordinates.

    The kernel is written as ``(<fb, l>, -<fa, l>)`` for a generator ``l``
    of the image line.  A lightlike generator is scaled to time component
    -1, so for Cauchy-built surfaces the result is exactly ``s d_u - t d_v``;
    otherwise ``l`` is a Euclidean unit vector.
    """
    fa, fb = np.asarray(fa, float), np.asarray(fb, float)
    J = np.stack([fa, fb], axis=-1)
    u, sv, _ = np.linalg.svd(J)
    if sv[0] <= TOL["rank"]:
        raise RankZero("df vanishes")
    if strict and sv[1] > TOL["rank"] * sv[0]:
        raise Undefined(f"df has rank 2 (singular value ratio {sv[1] / sv[0]:.3e})")
    gen = u[:, 0]
    if abs(mink_ip(gen, gen)) <= TOL["agreement"] and abs(gen[0]) > 0:
        gen = -gen / gen[0]
    elif gen[np.argmax(np.abs(gen))] < 0:
        gen = -gen
    return np.array([eucl_ip(fb, gen), -eucl_ip(fa, gen)]) / eucl_ip(gen, gen)


def tau_value(nE, dZ_a, dZ_b, eta):
    """``<n_E, dZ(eta)>_E`` for the transverse field ``Z`` of a class II curve."""
    if np.any(np.isnan(dZ_a)) or np.any(np.isnan(dZ_b)):
        raise Undefined("Z is only defined on class II curves")
    return float(eucl_ip(nE, eta[0] * dZ_a + eta[1] * dZ_b))


def front_ratio(fa, fb, na, nb):
    """Singular-value ratio of the differential of ``(f, n_E)``."""
    J = np.stack([np.concatenate([fa, na]), np.concatenate([fb, nb])], axis=-1)
    sv = np.linalg.svd(J, compute_uv=False)
    return float(sv[1] / sv[0]) if sv[0] > 0 else 0.0


def image_rank_ratio(field):
    """Per-point ratio of the singular values of ``df`` (NaN where undefined)."""
    J = np.stack([field.fa, field.fb], axis=-1)
    out = np.full(field.shape, np.nan)
    ok = ~np.any(np.isnan(J), axis=(-2, -1))
    sv = np.linalg.svd(J[ok], compute_uv=False)
    with np.errstate(invalid="ignore", divide="ignore"):
        out[ok] = np.where(sv[:, 0] > 0, sv[:, 1] / sv[:, 0], 0.0)
    return out


# ---------------------------------------------------------------- invariant checks

def mean_curvature_fd(field):
    """``<f_xy, N> / <f_x, f_y>`` with ``f_xy`` from central differences of ``f_x``.

    Only for fields on null coordinates ``(x, y)`` with the Minkowski normal
    stored in ``field.normal``; edge rows are NaN.
    """
    fxy = np.full(field.fx.shape, np.nan)
    h = np.diff(field.b)
    fxy[:, 1:-1] = (field.fx[:, 2:] - field.fx[:, :-2]) / (h[1:] + h[:-1])[None, :, None]
    return mink_ip(fxy, field.normal) / mink_ip(field.fx, field.fy)


def conformal_violations(field):
    """Max null-coordinate and normal-orthogonality violations over evaluable points."""
    fx, fy, N = field.fx, field.fy, field.normal
    scale = np.nanmax(np.abs(mink_ip(fx, fy)))
    with np.errstate(invalid="ignore", divide="ignore"):
        null = np.maximum(np.abs(mink_ip(fx, fx)), np.abs(mink_ip(fy, fy))) / scale
        orth = np.maximum(np.abs(mink_ip(fx, N)), np.abs(mink_ip(fy, N)))
        unit = np.abs(mink_ip(N, N) - 1)
    return {"null": float(np.nanmax(null)), "orthogonal": float(np.nanmax(orth)),
            "unit_normal": float(np.nanmax(unit))}


# ---------------------------------------------------------------- singular set

def singular_nodes(field):
    """Boolean mask of grid nodes on the singular set.

    A node is singular when chi vanishes there or when chi changes sign
    towards a neighbour and the node is the closer of the two to zero.
    """
    chi = field.chi
    scale = max(1.0, float(np.nanmax(np.abs(chi)))) if np.any(np.isfinite(chi)) else 1.0
    mask = np.abs(chi) <= TOL["zero"] * scale
    for axis in (0, 1):
        c0 = np.moveaxis(chi, axis, 0)
        m = np.moveaxis(mask, axis, 0)
        flip = (c0[:-1] * c0[1:]) < 0
        left = flip & (np.abs(c0[:-1]) <= np.abs(c0[1:]))
        m[:-1] |= left
        m[1:] |= flip & ~left
    return mask


def singular_polylines(field, mask=None):
    """Connected components of the singular nodes, each ordered along the curve.

    Returns a list of ``(indices, axis)`` where ``indices`` is an ``(n, 2)``
    array of grid indices sorted along grid ``axis``.
    """
    mask = singular_nodes(field) if mask is None else mask
    seen = np.zeros_like(mask)
    lines = []
    na, nb = mask.shape
    for start in zip(*np.nonzero(mask)):
        if seen[start]:
            continue
        comp, stack = [], [start]
        seen[start] = True
        while stack:
            i, j = stack.pop()
            comp.append((i, j))
            for di in (-1, 0, 1):
                for dj in (-1, 0, 1):
                    p = (i + di, j + dj)
                    if 0 <= p[0] < na and 0 <= p[1] < nb and mask[p] and not seen[p]:
                        seen[p] = True
                        stack.append(p)
        comp = np.array(comp)
        axis = 1 if np.ptp(comp[:, 1]) >= np.ptp(comp[:, 0]) else 0
        comp = comp[np.lexsort((comp[:, 1 - axis], comp[:, axis]))]
        lines.append((comp, axis))
    return lines


def _curve_tangent(grad, axis):
    t = np.stack([-grad[..., 1], grad[..., 0]], axis=-1)
    norm = np.linalg.norm(t, axis=-1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = t / norm
    flip = t[..., axis] < 0
    return np.where(flip[..., None], -t, t)


def classify_curve(field, nodes, axis):
    """Numeric classification of every node of one singular polyline."""
    grad = chi_gradient(field)
    gscale = max(1.0, float(np.nanmax(np.linalg.norm(grad, axis=-1))))
    coords = (field.a, field.b)
    param = coords[axis][nodes[:, axis]]
    n = len(nodes)
    fa, fb = field.fa, field.fb
    na_, nb_ = _grid_derivatives(field, "dnE_x", "dnE_y")
    has_z = field.dZ_x is not None
    if has_z:
        za, zb = _grid_derivatives(field, "dZ_x", "dZ_y")
    det = np.full(n, np.nan)
    tau = np.full(n, np.nan)
    rows = []
    for k, (i, j) in enumerate(nodes):
        g = grad[i, j]
        ev = {"chi": float(field.chi[i, j]), "dchi": [float(g[0]), float(g[1])],
              "nondegenerate": bool(np.linalg.norm(g) > TOL["nondegenerate"] * gscale)}
        cls = "I" if field.stratum[i, j] == 0 else "II"
        try:
            eta = null_direction(fa[i, j], fb[i, j], strict=False)
        except (RankZero, np.linalg.LinAlgError):
            eta = None
        if eta is not None:
            tangent = _curve_tangent(g, axis)
            det[k] = tangent[0] * eta[1] - tangent[1] * eta[0]
            ev["eta"] = [float(eta[0]), float(eta[1])]
            ev["front_ratio"] = front_ratio(fa[i, j], fb[i, j], na_[i, j], nb_[i, j])
            if has_z and cls == "II":
                try:
                    tau[k] = tau_value(field.nE[i, j], za[i, j], zb[i, j], eta)
                except Undefined:
                    pass
        rows.append((cls, ev, eta))
    ddet, dtau = _along_curve(det, param), _along_curve(tau, param)
    small = np.abs(tau) <= TOL["zero"]
    flat = small.copy()
    flat[1:] &= small[:-1]
    flat[:-1] &= small[1:]
    reports = []
    for k, (i, j) in enumerate(nodes):
        cls, ev, eta = rows[k]
        ev.update(det_gamma_eta=det[k], det_gamma_eta_prime=ddet[k], tau=tau[k],
                  tau_prime=dtau[k], tau_flat=bool(flat[k] and n > 1))
        loc = (float(field.a[i]), float(field.b[j]))
        kind = _numeric_type(cls, ev, eta)
        reports.append(SingularityReport(loc, kind, ev, cls, "numeric"))
    return reports


def _along_curve(values, param):
    """Central differences over runs of nodes where the curve is a graph of ``param``.

    Nodes sharing their ``param`` value with another node get NaN.
    """
    out = np.full(len(values), np.nan)
    unique = np.ones(len(param), bool)
    same = np.diff(param) == 0
    unique[1:] &= ~same
    unique[:-1] &= ~same
    k = 0
    while k < len(param):
        if not unique[k]:
            k += 1
            continue
        end = k
        while end + 1 < len(param) and unique[end + 1]:
            end += 1
        if end > k:
            out[k:end + 1] = np.gradient(values[k:end + 1], param[k:end + 1])
        k = end + 1
    return out


def _numeric_type(cls, ev, eta):
    if eta is None or not ev["nondegenerate"]:
        return SingularityType.Degenerate
    front = ev["front_ratio"] > TOL["rank"]
    transverse = abs(ev["det_gamma_eta"]) > TOL["transverse"]
    if cls == "I":
        if front and transverse:
            return SingularityType.CuspidalEdge
        return SingularityType.ClassIEdge if transverse else SingularityType.FoldOther
    if front and transverse:
        return SingularityType.CuspidalEdge
    if front:
        if abs(ev["det_gamma_eta_prime"]) > TOL["transverse"]:
            return SingularityType.Swallowtail
        return SingularityType.FoldOther
    tau, dtau = ev["tau"], ev["tau_prime"]
    if ev.get("tau_flat"):
        return SingularityType.Degenerate
    if not np.isfinite(dtau) or abs(dtau) <= TOL["transverse"]:
        return SingularityType.FoldOther
    if transverse and abs(tau) <= TOL["zero"] * max(1.0, abs(dtau)):
        return SingularityType.CuspidalCrossCap
    return SingularityType.FoldOther


def classify_field(field):
    """Singular polylines with one report per singular node."""
    return [(nodes, axis, classify_curve(field, nodes, axis))
            for nodes, axis in singular_polylines(field)]


def classify_point(field, index):
    """Report for the singular grid node ``index`` (numeric path)."""
    index = tuple(int(i) for i in index)
    for nodes, axis in singular_polylines(field):
        hit = np.nonzero((nodes[:, 0] == index[0]) & (nodes[:, 1] == index[1]))[0]
        if len(hit):
            return classify_curve(field, nodes, axis)[hit[0]]
    raise Undefined(f"grid node {index} is not singular")
