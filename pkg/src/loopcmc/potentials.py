"""Polynomial potential data, config parsing and validation.

Three potential families are supported:

* :class:`PotentialPair` - a regular (or semi-regular) pair ``psi_X(x)``,
  ``psi_Y(y)`` with leading terms ``[[0, alpha], [beta, 0]] lambda`` and
  ``[[0, gamma], [delta, 0]] lambda**-1``.
* :class:`SingularPotential` - a single potential ``A(v)`` in the variable
  along the singular curve.
* :class:`CharSingularPair` - a pair whose x-part is upper triangular.

All coefficient functions are polynomials (:class:`PolyFn`).  Config files
are INI style; polynomial entries are lists of coefficients, lowest degree
first, e.g. ``beta = -1 0 1`` for ``x**2 - 1``.
"""

import configparser
import re
from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from .loopalg import DEFAULT_ORDER, LoopVectorField

ROOT_TOL = 1e-9


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class PolyFn:
    coefficients: Tuple[float, ...]
    variable: str = "x"

    def __post_init__(self):
        c = tuple(float(x) for x in self.coefficients) or (0.0,)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def const(cls, value, variable="x"):
        return cls((float(value),), variable)

    @classmethod
    def parse(cls, text, variable="x"):
        try:
            coeffs = tuple(float(tok) for tok in text.split())
        except ValueError as exc:
            raise ParseError(f"bad polynomial '{text}': {exc}") from None
        if not coeffs:
            raise ParseError("empty polynomial")
        return cls(coeffs, variable)

    def to_text(self):
        return " ".join(repr(c) for c in self.coefficients)

    def __call__(self, t):
        return P.polyval(t, self.coefficients)

    def deriv(self, m=1):
        return PolyFn(tuple(P.polyder(self.coefficients, m)), self.variable)

    def _other(self, other):
        if isinstance(other, PolyFn):
            return other.coefficients
        return (float(other),)

    def __add__(self, other):
        return PolyFn(tuple(P.polyadd(self.coefficients, self._other(other))), self.variable)

    __radd__ = __add__

    def __sub__(self, other):
        return PolyFn(tuple(P.polysub(self.coefficients, self._other(other))), self.variable)

    def __rsub__(self, other):
        return PolyFn(tuple(P.polysub(self._other(other), self.coefficients)), self.variable)

    def __mul__(self, other):
        return PolyFn(tuple(P.polymul(self.coefficients, self._other(other))), self.variable)

    __rmul__ = __mul__

    def __neg__(self):
        return PolyFn(tuple(-c for c in self.coefficients), self.variable)

    def with_variable(self, variable):
        return PolyFn(self.coefficients, variable)

    @property
    def is_zero(self):
        return not any(self.coefficients)

    @property
    def is_constant(self):
        return not any(self.coefficients[1:])

    def real_roots(self, lo, hi):
        """Real roots in ``[lo, hi]`` with their multiplicity (1 or 2 meaning >= 2)."""
        c = np.trim_zeros(np.array(self.coefficients), "b")
        if len(c) <= 1:
            return []
        roots = P.polyroots(c)
        scale = max(1.0, np.abs(roots).max())
        found = []
        for r in roots:
            if abs(r.imag) > 1e-6 * scale or not lo - ROOT_TOL <= r.real <= hi + ROOT_TOL:
                continue
            x = float(r.real)
            if any(abs(x - y) <= 1e-6 * scale for y, _ in found):
                found = [(y, 2) if abs(x - y) <= 1e-6 * scale else (y, m) for y, m in found]
                continue
            mult = 1 if abs(self.deriv()(x)) > ROOT_TOL else 2
            found.append((x, mult))
        return sorted(found)


@dataclass(frozen=True)
class Domain:
    """Parameter rectangle and sample counts.

    For pair and characteristic pipelines the axes are ``(x, y)``; for the
    singular and Cauchy pipelines they are ``(u, v)``.
    """

    interval_a: Tuple[float, float] = (-1.0, 1.0)
    interval_b: Tuple[float, float] = (-1.0, 1.0)
    grid: Tuple[int, int] = (201, 201)

    def axes(self):
        return (np.linspace(*self.interval_a, self.grid[0]),
                np.linspace(*self.interval_b, self.grid[1]))


def _extras_key(e):
    return e[0]


@dataclass(frozen=True)
class PotentialPair:
    alpha: PolyFn
    beta: PolyFn
    gamma: PolyFn
    delta: PolyFn
    H: float = 1.0
    domain: Domain = Domain()
    base: Tuple[float, float] = None
    lam: float = 1.0
    order: int = DEFAULT_ORDER
    # ((axis, degree, i, j), PolyFn); x extras have degree <= 0, y extras >= 0
    extras: Tuple = ()
    diagnostics: dict = field(default=None, compare=False, repr=False)

    kind = "pair"

    @property
    def base_point(self):
        if self.base is not None:
            return self.base
        return tuple(0.5 * (lo + hi) for lo, hi in (self.domain.interval_a, self.domain.interval_b))

    def terms(self, axis, t):
        """Sparse Laurent coefficients ``{degree: (..., 2, 2)}`` at parameter values ``t``."""
        t = np.asarray(t, dtype=float)
        if axis == "x":
            terms = {1: _offdiag(self.alpha(t), self.beta(t))}
        else:
            terms = {-1: _offdiag(self.gamma(t), self.delta(t))}
        _add_extras(terms, self.extras, axis, t)
        return terms


@dataclass(frozen=True)
class SingularPotential:
    alpha0: PolyFn
    beta1: PolyFn
    gamma1: PolyFn
    gamma_m1: PolyFn
    gamma_m3: PolyFn
    H: float = 1.0
    domain: Domain = Domain((-0.5, 0.5), (-1.0, 1.0), (101, 201))
    lam: float = 1.0
    order: int = DEFAULT_ORDER
    diagnostics: dict = field(default=None, compare=False, repr=False)

    kind = "singular"

    def terms(self, axis, t):
        t = np.asarray(t, dtype=float)
        a0 = self.alpha0(t)
        zero = np.zeros_like(a0)
        return {
            0: _mat(-a0, zero, zero, a0),
            3: _offdiag(-self.gamma1(t), zero),
            1: _offdiag(-self.gamma_m1(t), zero),
            -1: _offdiag(-self.gamma_m3(t), -self.beta1(t)),
        }

    def is_regular(self, v):
        return (self.gamma1(v) != 0) & (self.gamma_m3(v) != 0)

    def is_nondegenerate(self, v):
        return self.beta1(v) != 0


@dataclass(frozen=True)
class CharSingularPair:
    alpha0: PolyFn
    gamma_m1: PolyFn
    gamma1: PolyFn
    delta: PolyFn
    sigma: PolyFn
    H: float = 1.0
    domain: Domain = Domain()
    lam: float = 1.0
    order: int = DEFAULT_ORDER
    extras: Tuple = ()
    diagnostics: dict = field(default=None, compare=False, repr=False)

    kind = "characteristic"

    def terms(self, axis, t):
        t = np.asarray(t, dtype=float)
        if axis == "x":
            a0 = self.alpha0(t)
            zero = np.zeros_like(a0)
            terms = {0: _mat(-a0, zero, zero, a0),
                     1: _offdiag(-self.gamma_m1(t), zero),
                     3: _offdiag(-self.gamma1(t), zero)}
        else:
            terms = {-1: _offdiag(self.delta(t), self.sigma(t))}
        _add_extras(terms, self.extras, axis, t)
        return terms

    def is_nondegenerate(self):
        return self.sigma(0.0) != 0


def _mat(a, b, c, d):
    return np.stack([np.stack([a, b], -1), np.stack([c, d], -1)], -2)


def _offdiag(upper, lower):
    upper, lower = np.broadcast_arrays(np.asarray(upper, float), np.asarray(lower, float))
    zero = np.zeros_like(upper)
    return _mat(zero, upper, lower, zero)


def _add_extras(terms, extras, axis, t):
    for (ax, deg, i, j), fn in extras:
        if ax != axis:
            continue
        m = np.zeros(np.shape(t) + (2, 2))
        val = fn(t)
        m[..., i, j] = val
        if i == j:
            m[..., 1 - i, 1 - i] = -val
        terms[deg] = terms.get(deg, 0) + m


def to_loop_form(spec, point, axis="x"):
    """Loop-algebra value of a potential at one parameter value."""
    terms = spec.terms(axis, point)
    N = spec.order
    c = np.zeros((2 * N + 1, 2, 2))
    for d, m in terms.items():
        c[N + d] += m
    return LoopVectorField(c)


# ---------------------------------------------------------------- validation

def _zeros(fn, interval):
    if fn.is_zero:
        return "identically zero"
    return fn.real_roots(*interval)


def validate_pair(spec):
    ix, iy = spec.domain.interval_a, spec.domain.interval_b
    diag = {"beta_zeros": _zeros(spec.beta, ix), "gamma_zeros": _zeros(spec.gamma, iy)}
    bz, gz = diag["beta_zeros"], diag["gamma_zeros"]
    if bz and gz:
        raise ValidationError(f"beta (zeros {bz} on x-interval) and gamma (zeros {gz} on "
                              f"y-interval) vanish simultaneously")
    for name, z in (("beta", bz), ("gamma", gz)):
        high = [r for r, m in z if m > 1] if isinstance(z, list) else []
        if high:
            raise ValidationError(f"{name} has a zero of order > 1 at {high[0]:.6g}")
    _check_extras(spec.extras)
    return diag


def validate_singular(spec):
    iv = spec.domain.interval_b
    diag = {name: _zeros(getattr(spec, name), iv) for name in ("beta1", "gamma1", "gamma_m3")}
    for name in ("gamma1", "gamma_m3"):
        z = diag[name]
        if isinstance(z, list):
            high = [r for r, m in z if m > 1]
            if high:
                raise ValidationError(f"{name} has a zero of order > 1 at v={high[0]:.6g}")
    diag["degenerate_everywhere"] = spec.beta1.is_zero
    diag["irregular_everywhere"] = spec.gamma1.is_zero or spec.gamma_m3.is_zero
    return diag


def validate_characteristic(spec):
    ix, iy = spec.domain.interval_a, spec.domain.interval_b
    diag = {"gamma1_zeros": _zeros(spec.gamma1, ix), "delta_zeros": _zeros(spec.delta, iy),
            "nondegenerate": bool(spec.is_nondegenerate())}
    if diag["gamma1_zeros"] and diag["delta_zeros"]:
        raise ValidationError("gamma1 and delta vanish simultaneously")
    _check_extras(spec.extras, char=True)
    return diag


def _check_extras(extras, char=False):
    for (ax, deg, i, j), _ in extras:
        if (deg % 2 == 0) != (i == j):
            raise ValidationError(f"extra term {ax} degree {deg} entry {i + 1}{j + 1} breaks the twisting")
        if ax == "x" and (deg > 0 or char):
            raise ValidationError(f"extra x term of degree {deg} not allowed")
        if ax == "y" and deg < 0:
            raise ValidationError(f"extra y term of degree {deg} must be >= 0")
        if (ax == "x" and deg == 1) or (ax == "y" and deg == -1):
            raise ValidationError("leading terms are set by the named functions")
        if i == 1 and j == 1:
            raise ValidationError("diagonal extras are given by entry 11 only")


# ---------------------------------------------------------------- config I/O

_EXTRA = re.compile(r"^extra_([xy])_(-?\d+)_([12])([12])$")

SECTIONS = ("pair", "singular", "characteristic", "cauchy", "cauchy.characteristic")


def _floats(text, n, key):
    try:
        vals = tuple(float(t) for t in text.split())
    except ValueError:
        raise ParseError(f"{key}: expected {n} numbers, got '{text}'") from None
    if len(vals) != n:
        raise ParseError(f"{key}: expected {n} numbers, got '{text}'")
    return vals


def _ints(text, n, key):
    vals = _floats(text, n, key)
    if any(v != int(v) or v < 2 for v in vals):
        raise ParseError(f"{key}: expected {n} integers >= 2, got '{text}'")
    return tuple(int(v) for v in vals)


class Section:
    """Tracks which keys of a config section have been consumed."""

    def __init__(self, name, items):
        self.name = name
        self.items = dict(items)
        self.used = set()

    def get(self, key, default=None):
        if key in self.items:
            self.used.add(key)
            return self.items[key]
        return default

    def poly(self, key, variable, required=True, default=None):
        text = self.get(key)
        if text is None:
            if required:
                raise ParseError(f"[{self.name}] missing required entry '{key}'")
            return default
        return PolyFn.parse(text, variable)

    def real(self, key, default):
        text = self.get(key)
        return default if text is None else _floats(text, 1, key)[0]

    def pair(self, key, default):
        text = self.get(key)
        return default if text is None else _floats(text, 2, key)

    def grid(self, default):
        text = self.get("grid")
        return default if text is None else _ints(text, 2, "grid")

    def order(self):
        text = self.get("order")
        if text is None:
            return DEFAULT_ORDER
        (n,) = _ints(text, 1, "order")
        return n

    def extras(self):
        out = []
        for key in sorted(self.items):
            m = _EXTRA.match(key)
            if m:
                ax, deg, i, j = m.group(1), int(m.group(2)), int(m.group(3)) - 1, int(m.group(4)) - 1
                out.append(((ax, deg, i, j), self.poly(key, ax)))
        return tuple(sorted(out, key=_extras_key))

    def finish(self):
        unknown = set(self.items) - self.used
        if unknown:
            raise ParseError(f"[{self.name}] unknown entries: {', '.join(sorted(unknown))}")


def _common(sec, default_domain, uv=False):
    if uv:
        iv = sec.pair("interval", default_domain.interval_b)
        half = 0.5 * (iv[1] - iv[0])
        iu = sec.pair("interval_u", (-0.5 * half, 0.5 * half)
                      if "interval" in sec.items else default_domain.interval_a)
        domain = Domain(iu, iv, sec.grid(default_domain.grid))
    else:
        both = sec.pair("interval", None)
        ix = sec.pair("interval_x", both or default_domain.interval_a)
        iy = sec.pair("interval_y", both or default_domain.interval_b)
        domain = Domain(ix, iy, sec.grid(default_domain.grid))
    H = sec.real("H", 1.0)
    if H == 0:
        raise ValidationError("H must be nonzero")
    lam = sec.real("lambda", 1.0)
    if lam == 0:
        raise ValidationError("lambda must be nonzero")
    return dict(H=H, domain=domain, lam=lam, order=sec.order())


def parse_spec(config_text):
    """Parse and validate a config; returns the spec object for its single section."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(config_text)
    except configparser.Error as exc:
        raise ParseError(f"malformed config: {exc}") from None
    names = [s for s in cp.sections()]
    if len(names) != 1:
        raise ParseError(f"expected exactly one section, found {len(names)}: {names}")
    name = names[0]
    if name not in SECTIONS:
        raise ParseError(f"unknown section [{name}]; expected one of {', '.join(SECTIONS)}")
    sec = Section(name, cp.items(name))
    if name == "pair":
        spec = _parse_pair(sec)
    elif name == "singular":
        spec = _parse_singular(sec)
    elif name == "characteristic":
        spec = _parse_characteristic(sec)
    else:
        from . import cauchy
        spec = cauchy.parse_section(sec)
    sec.finish()
    return spec


def _parse_pair(sec):
    kw = _common(sec, Domain())
    base = sec.pair("base", None)
    spec = PotentialPair(sec.poly("alpha", "x"), sec.poly("beta", "x"),
                         sec.poly("gamma", "y"), sec.poly("delta", "y"),
                         base=base, extras=sec.extras(), **kw)
    return _with_diag(spec, validate_pair(spec))


def _parse_singular(sec):
    kw = _common(sec, SingularPotential.__dataclass_fields__["domain"].default, uv=True)
    zero = PolyFn((0.0,), "v")
    spec = SingularPotential(sec.poly("alpha0", "v", False, zero), sec.poly("beta1", "v"),
                             sec.poly("gamma1", "v"), sec.poly("gamma_m1", "v"),
                             sec.poly("gamma_m3", "v"), **kw)
    return _with_diag(spec, validate_singular(spec))


def _parse_characteristic(sec):
    kw = _common(sec, Domain())
    zero = PolyFn((0.0,), "x")
    spec = CharSingularPair(sec.poly("alpha0", "x", False, zero), sec.poly("gamma_m1", "x"),
                            sec.poly("gamma1", "x"), sec.poly("delta", "y"),
                            sec.poly("sigma", "y"), extras=sec.extras(), **kw)
    return _with_diag(spec, validate_characteristic(spec))


def _with_diag(spec, diag):
    object.__setattr__(spec, "diagnostics", diag)
    return spec


def _common_lines(spec, uv=False):
    d = spec.domain
    lines = []
    if uv:
        lines.append(f"interval = {d.interval_b[0]!r} {d.interval_b[1]!r}")
        lines.append(f"interval_u = {d.interval_a[0]!r} {d.interval_a[1]!r}")
    else:
        lines.append(f"interval_x = {d.interval_a[0]!r} {d.interval_a[1]!r}")
        lines.append(f"interval_y = {d.interval_b[0]!r} {d.interval_b[1]!r}")
    lines.append(f"grid = {d.grid[0]} {d.grid[1]}")
    lines.append(f"H = {spec.H!r}")
    lines.append(f"lambda = {spec.lam!r}")
    lines.append(f"order = {spec.order}")
    return lines


def _extra_lines(extras):
    return [f"extra_{ax}_{deg}_{i + 1}{j + 1} = {fn.to_text()}" for (ax, deg, i, j), fn in extras]


def print_spec(spec):
    """Inverse of :func:`parse_spec`."""
    if isinstance(spec, PotentialPair):
        lines = ["[pair]"] + [f"{n} = {getattr(spec, n).to_text()}"
                              for n in ("alpha", "beta", "gamma", "delta")]
        if spec.base is not None:
            lines.append(f"base = {spec.base[0]!r} {spec.base[1]!r}")
        lines += _common_lines(spec) + _extra_lines(spec.extras)
    elif isinstance(spec, SingularPotential):
        lines = ["[singular]"] + [f"{n} = {getattr(spec, n).to_text()}"
                                  for n in ("alpha0", "beta1", "gamma1", "gamma_m1", "gamma_m3")]
        lines += _common_lines(spec, uv=True)
    elif isinstance(spec, CharSingularPair):
        lines = ["[characteristic]"] + [f"{n} = {getattr(spec, n).to_text()}"
                                        for n in ("alpha0", "gamma_m1", "gamma1", "delta", "sigma")]
        lines += _common_lines(spec) + _extra_lines(spec.extras)
    else:
        from . import cauchy
        lines = cauchy.section_lines(spec)
    return "\n".join(lines) + "\n"
