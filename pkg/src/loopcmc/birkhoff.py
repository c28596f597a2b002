"""Left-normalized Birkhoff factorization and small-cell detection.

``Phi = minus * plus`` with ``minus`` holomorphic at infinity and equal to I
there, ``plus`` holomorphic at zero.  The factorization is found by solving
for the coefficients of ``minus**-1 = I + sum_k C_k lambda**-k`` so that
``minus**-1 * Phi`` has no negative powers.  The twisting makes each row of
``C_k`` hold a single unknown, so the system splits into two independent
least-squares problems (one per row), each with ``2N`` equations in ``N``
unknowns, solved through a QR factorization; the singular values of the
triangular factor give the condition number.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .loopalg import (
    LoopMatrix, adjugate, identity_coeffs, omega, omega_inverse, order_of,
    product_window,
)
from .tolerances import TOL

# systems worse than this are not solved at all (result is NaN)
_SOLVE_LIMIT = 1e14


class OffBigCell(ArithmeticError):
    """The loop is not (numerically) in the left big cell."""

    def __init__(self, condition, residual):
        super().__init__(f"off big cell: condition={condition:.3e}, residual={residual:.3e}")
        self.condition = condition
        self.residual = residual


class SmallCell(ArithmeticError):
    """Switch pivot vanished: ``omega_k * H_minus = minus * omega_k`` with ``minus`` in G-."""

    def __init__(self, k, minus):
        super().__init__(f"pivot vanished; product lies in the small cell of omega_{k}")
        self.k = k
        self.minus = minus


class Stratum(enum.IntEnum):
    BigCell = 0
    P1 = 1
    Pm1 = -1
    P2 = 2
    Pm2 = -2
    Deeper = 99


PROBE_ORDER = (1, -1, 2, -2)


@dataclass(frozen=True, eq=False)
class BirkhoffFactors:
    minus: LoopMatrix
    plus: LoopMatrix
    residual: float
    condition: float

    @property
    def c_minus1(self):
        return float(np.real(self.minus.coefficient(-1)[1, 0]))

    @property
    def b_minus1(self):
        return float(np.real(self.minus.coefficient(-1)[0, 1]))


@dataclass(frozen=True)
class CellClass:
    stratum: Stratum
    c_minus1: float
    b_minus1: float
    factors: BirkhoffFactors = None


def _column_map(N, r):
    """Column of row ``r`` of ``C_k`` that may be nonzero, for k = 1..N."""
    k = np.arange(1, N + 1)
    return np.where(k % 2 == 0, r, 1 - r)


def factor_coeffs(phi):
    """Batched left-normalized factorization of coefficient stacks.

    Returns ``(minus, plus, residual, condition)`` with the batch shape of
    ``phi``.  Entries whose linear system is numerically singular come back
    as NaN with infinite condition.
    """
    phi = np.asarray(phi)
    N = order_of(phi)
    batch = phi.shape[:-3]
    # pad with zeros down to degree -2N so that equations j = N+1..2N can be
    # formed; the square N x N section is singular for some banded data
    padded = np.concatenate([np.zeros(batch + (N, 2, 2), dtype=phi.dtype), phi], axis=-3)
    j = np.arange(1, 2 * N + 1)
    k = np.arange(1, N + 1)
    deg = 2 * N + k[None, :] - j[:, None]   # row j, column k -> degree k - j
    mats, rhs = [], []
    for r in (0, 1):
        cj = np.where(j % 2 == 0, r, 1 - r)
        ck = _column_map(N, r)
        mats.append(padded[..., deg, ck[None, :], cj[:, None]])
        rhs.append(-padded[..., 2 * N - j, r, cj])
    A = np.stack(mats, axis=-3)
    b = np.stack(rhs, axis=-2)
    q, r_fac = np.linalg.qr(A)
    sv = np.linalg.svd(r_fac, compute_uv=False)
    with np.errstate(all="ignore"):
        cond = sv[..., 0] / sv[..., -1]
    cond = np.where(np.isfinite(cond), cond, np.inf)
    ok = cond < _SOLVE_LIMIT
    r_safe = np.where(ok[..., None, None], r_fac, np.eye(N))
    qb = np.einsum("...ji,...j->...i", q, b)
    x = np.linalg.solve(r_safe, qb[..., None])[..., 0]
    x = np.where(ok[..., None], x, np.nan)

    m = identity_coeffs(N, batch, dtype=np.result_type(phi, float))
    for r in (0, 1):
        m[..., N - k, r, _column_map(N, r)] = x[..., r, :]
    plus = np.zeros_like(m)
    plus[..., N:, :, :] = product_window(m, phi, 0, N)
    minus = adjugate(m)
    recon = product_window(minus, plus, -N, N)
    with np.errstate(invalid="ignore"):
        residual = np.abs(recon - phi).max(axis=(-3, -2, -1))
    residual = np.where(np.isfinite(residual), residual, np.inf)
    return minus, plus, residual, cond.max(axis=-1)


def is_accepted(residual, condition):
    return (residual <= TOL["residual"]) & (condition <= TOL["condition"])


def factor_left(phi):
    """Left-normalized Birkhoff factorization of a single loop.

    Raises :class:`OffBigCell` if the system is too ill-conditioned or the
    reconstruction residual is too large.
    """
    minus, plus, residual, cond = factor_coeffs(phi.coeffs)
    residual, cond = float(residual), float(cond)
    if not is_accepted(residual, cond):
        raise OffBigCell(cond, residual)
    return BirkhoffFactors(LoopMatrix(minus, phi.tail_mass), LoopMatrix(plus, phi.tail_mass),
                           residual, cond)


def _shift_coeffs(k, phi):
    N = order_of(phi)
    w = omega_inverse(k, N).coeffs
    return product_window(w, phi, -N, N)


def shifted_factor(k, phi):
    """Factor ``omega_k**-1 * Phi``."""
    if k not in PROBE_ORDER:
        raise ValueError(f"k must be one of {PROBE_ORDER}")
    shifted = LoopMatrix(_shift_coeffs(k, phi.coeffs), phi.tail_mass)
    return factor_left(shifted)


def _signature(k, minus):
    """Degeneracy test on the minus factor of ``omega_k**-1 * Phi``."""
    N = order_of(minus)
    tol = TOL["signature"]
    b1 = np.abs(minus[..., N - 1, 0, 1])
    c1 = np.abs(minus[..., N - 1, 1, 0])
    if k == 1:
        return c1 <= tol
    if k == -1:
        return b1 <= tol
    b3 = np.abs(minus[..., N - 3, 0, 1])
    c3 = np.abs(minus[..., N - 3, 1, 0])
    if k == 2:
        return (b1 <= tol) & (b3 <= tol)
    return (c1 <= tol) & (c3 <= tol)


def detect_cells(phi, full=False):
    """Batched stratum detection.

    Returns ``(stratum, c_minus1, b_minus1, minus, plus)``.  ``minus`` and
    ``plus`` are the unshifted factors (NaN off the big cell); ``c_minus1``
    and ``b_minus1`` are read from the minus factor that decided the stratum
    (the unshifted one on the big cell).  With ``full=True`` the unshifted
    residual and condition number are appended.
    """
    phi = np.asarray(phi)
    N = order_of(phi)
    minus, plus, residual, cond = factor_coeffs(phi)
    big = is_accepted(residual, cond)
    stratum = np.full(phi.shape[:-3], int(Stratum.Deeper))
    stratum[big] = int(Stratum.BigCell)
    c1 = np.real(minus[..., N - 1, 1, 0]).copy()
    b1 = np.real(minus[..., N - 1, 0, 1]).copy()
    pending = ~big
    for k in PROBE_ORDER:
        if not pending.any():
            break
        idx = np.nonzero(pending)
        sub = phi[idx]
        gm, _, res_k, cond_k = factor_coeffs(_shift_coeffs(k, sub))
        hit = is_accepted(res_k, cond_k) & _signature(k, gm)
        where = tuple(i[hit] for i in idx)
        stratum[where] = k
        c1[where] = np.real(gm[hit, N - 1, 1, 0])
        b1[where] = np.real(gm[hit, N - 1, 0, 1])
        pending[where] = False
    rest = np.nonzero(pending)
    c1[rest] = np.nan
    b1[rest] = np.nan
    minus[~big] = np.nan
    plus[~big] = np.nan
    if full:
        return stratum, c1, b1, minus, plus, residual, cond
    return stratum, c1, b1, minus, plus


def detect_cell(phi):
    stratum, c1, b1, minus, plus = detect_cells(phi.coeffs[None])
    s = Stratum(int(stratum[0]))
    factors = None
    if s == Stratum.BigCell:
        _, _, res, cond = factor_coeffs(phi.coeffs)
        factors = BirkhoffFactors(LoopMatrix(minus[0]), LoopMatrix(plus[0]), float(res), float(cond))
    return CellClass(s, float(c1[0]), float(b1[0]), factors)


def _entries(h):
    N = h.trunc_order
    c = h.coeffs
    return N, c[:, 0, 0], c[:, 0, 1], c[:, 1, 0], c[:, 1, 1]


def _shift(series, d):
    """Multiply a scalar series by lambda**d (truncating)."""
    out = np.zeros_like(series)
    if d >= 0:
        out[d:] = series[:len(series) - d]
    else:
        out[:d] = series[-d:]
    return out


def _assemble(a, b, c, d):
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _normalized(raw_minus, raw_plus, diag):
    """Rescale a factorization so the minus factor is I at infinity."""
    Dinv = np.diag(1.0 / np.asarray(diag))
    minus = raw_minus @ Dinv
    plus = np.diag(diag) @ raw_plus
    return minus, plus


def _finish(minus, plus, phi):
    N = order_of(phi)
    recon = product_window(minus, plus, -N, N)
    residual = float(np.abs(recon - phi).max())
    return BirkhoffFactors(LoopMatrix(minus), LoopMatrix(plus), residual, float("nan"))


def switch_formula(k, h_minus):
    """Closed-form factorization of ``omega_k * H_minus`` for ``k = +-1``.

    ``H_minus`` must be supported in nonpositive degrees with unit
    determinant.  Raises :class:`SmallCell` with the middle-term form when
    the pivot coefficient is zero.
    """
    if k not in (1, -1):
        raise ValueError("switch_formula handles k = 1 and k = -1")
    N, a, b, c, d = _entries(h_minus)
    phi = (omega(k, N) @ h_minus).coeffs
    tol = TOL["signature"]
    if k == 1:
        c1 = c[N - 1]
        if abs(c1) <= tol:
            raise SmallCell(1, LoopMatrix(_assemble(d, -_shift(c, 2), -_shift(b, -2), a)))
        u0 = d[N] / c1
        raw_minus = _assemble(_shift(c, 1), _shift(d, 1) - u0 * _shift(c, 2),
                                -_shift(a, -1), u0 * a - _shift(b, -1))
        raw_plus = np.zeros_like(raw_minus)
        raw_plus[N] = np.eye(2)
        raw_plus[N + 1, 0, 1] = u0
        minus, plus = _normalized(raw_minus, raw_plus, [c1, 1.0 / c1])
    else:
        b1 = b[N - 1]
        if abs(b1) <= tol:
            raise SmallCell(-1, LoopMatrix(_assemble(d, -_shift(c, -2), -_shift(b, 2), a)))
        v0 = a[N] / b1
        raw_minus = _assemble(_shift(c, -1) - v0 * d, _shift(d, -1),
                                -_shift(a, 1) + v0 * _shift(b, 2), -_shift(b, 1))
        raw_plus = np.zeros_like(raw_minus)
        raw_plus[N] = np.eye(2)
        raw_plus[N + 1, 1, 0] = v0
        minus, plus = _normalized(raw_minus, raw_plus, [-1.0 / b1, -b1])
    return _finish(minus, plus, phi)


def omega2_switch(h_minus):
    """Closed-form plus factor of ``omega_2 * H_minus`` (normalized).

    Requires ``b_{-1} != 0`` and ``a_{-2} b_{-1} - a_0 b_{-3} != 0``; the
    minus factor is recovered as ``omega_2 H_minus plus**-1``.
    """
    N, a, b, c, d = _entries(h_minus)
    b1, b3 = b[N - 1], b[N - 3]
    a0, a2 = a[N], a[N - 2]
    delta = a2 * b1 - a0 * b3
    tol = TOL["signature"]
    if abs(b1) <= tol or abs(delta) <= tol:
        raise SmallCell(2, None)
    raw_plus = np.zeros((2 * N + 1, 2, 2), dtype=np.result_type(h_minus.coeffs, float))
    raw_plus[N] = np.eye(2)
    raw_plus[N + 2, 0, 0] = a0 * b1 / delta
    raw_plus[N + 1, 0, 1] = b1 ** 2 / delta
    raw_plus[N + 1, 1, 0] = a0 / b1
    plus = np.diag([delta / b1, b1 / delta]) @ raw_plus
    phi = (omega(2, N) @ h_minus).coeffs
    minus_full = product_window(phi, adjugate(plus), -N, N)
    return _finish(minus_full, plus, phi)
