"""Truncated matrix Laurent series for twisted loops in SL(2, C).

A loop is stored densely as a coefficient stack of shape ``(..., 2N+1, 2, 2)``
where index ``i`` holds the coefficient of ``lambda**(i - N)``.  Leading axes
are batch axes; the array-level helpers in this module broadcast over them so
that a whole grid of loops can be processed at once.  :class:`LoopMatrix`
wraps a single stack with its truncation bookkeeping.

Twisting: a loop is fixed by the involution ``g(lambda) -> P g(-lambda) P``
with ``P = diag(1, -1)`` exactly when diagonal entries carry only even powers
and off-diagonal entries only odd powers.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .tolerances import TOL

DEFAULT_ORDER = 24

E0 = np.array([[0.0, -1.0], [1.0, 0.0]])
E1 = np.array([[0.0, 1.0], [1.0, 0.0]])
E2 = np.array([[-1.0, 0.0], [0.0, 1.0]])


class DetDrift(ArithmeticError):
    """Determinant of a loop drifted away from 1 (truncation order too small)."""


class TailOverflow(ArithmeticError):
    """Discarded Fourier mass exceeded the hard limit."""


class TailWarning(RuntimeWarning):
    pass


def order_of(coeffs):
    return (coeffs.shape[-3] - 1) // 2


def degrees(N):
    return np.arange(-N, N + 1)


def identity_coeffs(N, batch=(), dtype=float):
    c = np.zeros(tuple(batch) + (2 * N + 1, 2, 2), dtype=dtype)
    c[..., N, 0, 0] = 1.0
    c[..., N, 1, 1] = 1.0
    return c


def parity_mask(N):
    """Boolean mask (2N+1, 2, 2) of the entries allowed by the twisting."""
    even = (degrees(N) % 2 == 0)[:, None, None]
    diag = np.eye(2, dtype=bool)[None]
    return np.where(even, diag, ~diag)


def _support(a):
    axes = tuple(i for i in range(a.ndim) if i != a.ndim - 3)
    return np.flatnonzero(np.any(a != 0, axis=axes))


def product_window(a, b, lo, hi):
    """Degrees ``lo..hi`` of the exact Cauchy product ``a * b``.

    ``a`` and ``b`` must share the truncation order ``N``; ``lo`` and ``hi``
    may range over ``[-2N, 2N]``.  Only the nonzero degrees of ``a`` are
    visited, so sparse left factors are cheap.
    """
    N = order_of(a)
    M = 2 * N + 1
    shape = np.broadcast_shapes(a.shape[:-3], b.shape[:-3])
    out = np.zeros(shape + (hi - lo + 1, 2, 2), dtype=np.result_type(a, b))
    for i in _support(a):
        di = i - N
        # degree k = di + dj with dj in [-N, N] and k in [lo, hi]
        j0 = max(lo - di + N, 0)
        j1 = min(hi - di + N, M - 1)
        if j0 > j1:
            continue
        k0 = di + (j0 - N) - lo
        out[..., k0:k0 + j1 - j0 + 1, :, :] += a[..., i, None, :, :] @ b[..., j0:j1 + 1, :, :]
    return out


def mul_coeffs(a, b):
    """Truncated product of two coefficient stacks.

    Returns ``(c, tail)`` where ``c`` keeps degrees ``[-N, N]`` and ``tail``
    is the sum of Frobenius norms of the discarded coefficients (per batch
    element).
    """
    N = order_of(a)
    full = product_window(a, b, -2 * N, 2 * N)
    c = full[..., N:3 * N + 1, :, :]
    dropped = np.concatenate([full[..., :N, :, :], full[..., 3 * N + 1:, :, :]], axis=-3)
    tail = np.linalg.norm(dropped, axis=(-2, -1)).sum(axis=-1)
    return c, tail


def mul_sparse(a, terms):
    """Truncated product ``a * B`` where ``B = sum_d terms[d] lambda**d``.

    ``terms`` maps a degree to a 2x2 matrix (or a batch of them broadcasting
    against ``a``).  Returns ``(c, tail)`` like :func:`mul_coeffs`.
    """
    N = order_of(a)
    M = 2 * N + 1
    dtype = np.result_type(a, *terms.values()) if terms else a.dtype
    c = np.zeros(a.shape, dtype=dtype)
    tail = np.zeros(a.shape[:-3])
    for d, m in terms.items():
        m = np.asarray(m)
        prod = a @ m[..., None, :, :]
        if d >= 0:
            c[..., d:, :, :] += prod[..., :M - d, :, :]
            lost = prod[..., M - d:, :, :]
        else:
            c[..., :M + d, :, :] += prod[..., -d:, :, :]
            lost = prod[..., :-d, :, :]
        if lost.shape[-3]:
            tail = tail + np.linalg.norm(lost, axis=(-2, -1)).sum(axis=-1)
    return c, tail


def adjugate(a):
    """Entrywise adjugate ``[[d, -b], [-c, a]]``; the inverse when det == 1."""
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out


def evaluate(a, lam):
    """Value and lambda-derivative of a coefficient stack at ``lam`` (nonzero)."""
    N = order_of(a)
    k = degrees(N)
    lam = complex(lam) if np.iscomplexobj(lam) else float(lam)
    powers = np.array([lam ** int(d) for d in k])
    dpowers = np.array([int(d) * lam ** int(d - 1) if d else 0.0 for d in k])
    value = np.einsum("k,...kij->...ij", powers, a)
    deriv = np.einsum("k,...kij->...ij", dpowers, a)
    return value, deriv


def det_residual(a):
    """max |det a(lambda) - 1| over lambda = 1 and lambda = -1."""
    r = 0.0
    for lam in (1.0, -1.0):
        v, _ = evaluate(a, lam)
        r = np.maximum(r, np.abs(np.linalg.det(v) - 1.0))
    return r


def parity_violation(a):
    N = order_of(a)
    bad = np.abs(a) * ~parity_mask(N)
    return bad.max(axis=(-3, -2, -1))


def project_parity(a):
    return a * parity_mask(order_of(a))


def _check_tail(tail):
    t = float(np.max(tail)) if np.size(tail) else 0.0
    if t > TOL["tail_warn"]:
        warnings.warn(f"truncation tail mass {t:.3e} exceeds {TOL['tail_warn']:.0e}",
                      TailWarning, stacklevel=3)
    return t


@dataclass(frozen=True)
class StructureReport:
    parity: float
    imaginary: float
    det_residual: float

    @property
    def ok(self):
        return (self.parity <= TOL["parity"] and self.imaginary <= TOL["reality"]
                and self.det_residual <= TOL["det_inverse"])


@dataclass(frozen=True, eq=False)
class LoopMatrix:
    """An element of the twisted loop group, truncated to degrees ``[-N, N]``."""

    coeffs: np.ndarray
    tail_mass: float = 0.0

    def __post_init__(self):
        c = np.array(self.coeffs)
        if c.ndim != 3 or c.shape[1:] != (2, 2) or c.shape[0] % 2 != 1:
            raise ValueError(f"coefficient stack must have shape (2N+1, 2, 2), got {c.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def trunc_order(self):
        return order_of(self.coeffs)

    @classmethod
    def identity(cls, N=DEFAULT_ORDER):
        return cls(identity_coeffs(N))

    @classmethod
    def from_terms(cls, terms, N=DEFAULT_ORDER):
        """Build from a mapping ``degree -> 2x2 matrix``."""
        dtype = np.result_type(float, *[np.asarray(m) for m in terms.values()])
        c = np.zeros((2 * N + 1, 2, 2), dtype=dtype)
        for d, m in terms.items():
            if abs(d) > N:
                raise ValueError(f"degree {d} outside truncation order {N}")
            c[d + N] += np.asarray(m)
        return cls(c)

    def coefficient(self, d):
        N = self.trunc_order
        if abs(d) > N:
            return np.zeros((2, 2), dtype=self.coeffs.dtype)
        return self.coeffs[d + N]

    def entry(self, i, j):
        """Scalar Laurent series of entry (i, j) as a (2N+1,) array."""
        return self.coeffs[:, i, j]

    def __call__(self, lam):
        return evaluate(self.coeffs, lam)[0]

    def __matmul__(self, other):
        return multiply(self, other)

    def __neg__(self):
        return LoopMatrix(-self.coeffs, self.tail_mass)

    @property
    def is_real(self):
        return not np.iscomplexobj(self.coeffs) or np.abs(self.coeffs.imag).max() <= TOL["reality"]

    def max_abs_diff(self, other):
        return float(np.abs(self.coeffs - other.coeffs).max())

    def __repr__(self):
        N = self.trunc_order
        terms = [f"{d}: {self.coeffs[d + N].tolist()}" for d in range(-N, N + 1)
                 if np.any(self.coeffs[d + N] != 0)]
        return f"LoopMatrix(N={N}, tail={self.tail_mass:.1e}, {{{', '.join(terms)}}})"


@dataclass(frozen=True, eq=False)
class LoopVectorField:
    """A trace-free loop-algebra element (a potential or Maurer-Cartan value)."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def trunc_order(self):
        return order_of(self.coeffs)

    def coefficient(self, d):
        N = self.trunc_order
        return self.coeffs[d + N] if abs(d) <= N else np.zeros((2, 2))

    @property
    def support(self):
        return [int(i) - self.trunc_order for i in _support(self.coeffs)]

    def trace_residual(self):
        return float(np.abs(self.coeffs[:, 0, 0] + self.coeffs[:, 1, 1]).max())

    def parity_violation(self):
        return float(parity_violation(self.coeffs))


def omega(k, N=DEFAULT_ORDER):
    """Middle-term monomial ``omega_k`` of the small cell ``P_L^k``."""
    if k % 2 == 0:
        return LoopMatrix.from_terms({k: [[1.0, 0.0], [0.0, 0.0]],
                                      -k: [[0.0, 0.0], [0.0, 1.0]]}, N)
    return LoopMatrix.from_terms({k: [[0.0, 1.0], [0.0, 0.0]],
                                  -k: [[0.0, 0.0], [-1.0, 0.0]]}, N)


def omega_inverse(k, N=DEFAULT_ORDER):
    if k % 2 == 0:
        return omega(-k, N)
    return -omega(k, N)


def multiply(a, b):
    """Group multiplication of truncated loops; discarded mass is recorded."""
    if a.trunc_order != b.trunc_order:
        raise ValueError("truncation orders differ")
    c, tail = mul_coeffs(a.coeffs, b.coeffs)
    total = a.tail_mass + b.tail_mass + float(tail)
    _check_tail(total)
    return LoopMatrix(c, total)


def inverse(a):
    """Inverse by adjugate; exact for unimodular loops."""
    r = float(det_residual(a.coeffs))
    if r > TOL["det_inverse"]:
        raise DetDrift(f"det residual {r:.3e} exceeds {TOL['det_inverse']:.0e}")
    return LoopMatrix(adjugate(a.coeffs), a.tail_mass)


def eval_and_dlambda(a, lam0):
    """Return ``(a(lam0), da/dlambda(lam0))`` from the truncated series."""
    if lam0 == 0:
        raise ValueError("lambda must be nonzero")
    return evaluate(a.coeffs, lam0)


def check_structure(a, real_form=True):
    c = a.coeffs
    imag = float(np.abs(np.imag(c)).max()) if real_form else 0.0
    return StructureReport(parity=float(parity_violation(c)), imaginary=imag,
                           det_residual=float(det_residual(c)))
