"""Builders turning geometric Cauchy data into singular potentials.

Non-characteristic data: along the curve ``u = 0`` the surface satisfies
``f_v = s V`` and ``f_u = t V`` with ``V = -e0 + cos(theta) e1 + sin(theta) e2``.
Characteristic data has constant ``t = t0`` and produces a singular pair whose
singular curve is the straight line ``y = 0``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import SingularityReport, symbolic_type
from .loopalg import DEFAULT_ORDER
from .potentials import (
    CharSingularPair, Domain, PolyFn, SingularPotential, ValidationError,
    _common, _common_lines, validate_characteristic, validate_singular,
)


class DegenerateData(UserWarning):
    """The data never enters the big cell (s = +-t or theta' = 0 identically)."""


class DegeneracyWarning(UserWarning):
    """The characteristic pair is degenerate (sigma(0) = 0)."""


@dataclass(frozen=True)
class CauchyData:
    s: PolyFn
    t: PolyFn
    theta: PolyFn
    H: float = 1.0
    domain: Domain = Domain((-0.5, 0.5), (-1.0, 1.0), (101, 201))
    lam: float = 1.0
    order: int = DEFAULT_ORDER
    diagnostics: dict = field(default=None, compare=False, repr=False)

    kind = "cauchy"

    def tangent(self, v):
        """``-e0 + cos(theta) e1 + sin(theta) e2`` at ``v``."""
        th = self.theta(np.asarray(v, float))
        return np.stack([-np.ones_like(th), np.cos(th), np.sin(th)], axis=-1)


@dataclass(frozen=True)
class CharCauchyData:
    s: PolyFn
    t0: float
    delta: PolyFn
    sigma: PolyFn
    H: float = 1.0
    domain: Domain = Domain()
    lam: float = 1.0
    order: int = DEFAULT_ORDER
    diagnostics: dict = field(default=None, compare=False, repr=False)

    kind = "cauchy.characteristic"


def noncharacteristic_potential(data):
    """The unique singular potential solving the non-characteristic problem."""
    s, t, H = data.s, data.t, data.H
    dtheta = data.theta.deriv()
    if (s - t).is_zero or (s + t).is_zero or dtheta.is_zero:
        warnings.warn("Cauchy data never enters the big cell (s = +-t or theta' = 0)",
                      DegenerateData, stacklevel=2)
    v = lambda p: p.with_variable("v")
    spec = SingularPotential(
        alpha0=PolyFn((0.0,), "v"),
        beta1=v(dtheta * -0.5),
        gamma1=v((s + t) * (-0.5 * H)),
        gamma_m1=v(dtheta * 0.5 + t * H),
        gamma_m3=v((s - t) * (0.5 * H)),
        H=H, domain=data.domain, lam=data.lam, order=data.order)
    object.__setattr__(spec, "diagnostics", validate_singular(spec))
    return spec


def characteristic_pair(s, t0, delta, sigma, H=1.0, domain=Domain(), lam=1.0,
                        order=DEFAULT_ORDER):
    """Singular pair for characteristic data; ``theta`` and ``alpha0`` vanish."""
    if H == 0:
        raise ValidationError("H must be nonzero")
    if isinstance(t0, PolyFn):
        if not t0.is_constant:
            raise ValidationError("characteristic data needs a constant t")
        t0 = float(t0(0.0))
    if not np.isclose(delta(0.0), -t0 * H, rtol=0, atol=1e-12):
        raise ValidationError(f"delta(0) = {delta(0.0)!r} must equal -t0 H = {-t0 * H!r}")
    if sigma(0.0) == 0:
        warnings.warn("sigma(0) = 0: the characteristic pair is degenerate",
                      DegeneracyWarning, stacklevel=2)
    sx = s.with_variable("x")
    spec = CharSingularPair(
        alpha0=PolyFn((0.0,), "x"), gamma_m1=sx * H, gamma1=sx * -H,
        delta=delta.with_variable("y"), sigma=sigma.with_variable("y"),
        H=H, domain=domain, lam=lam, order=order)
    diag = validate_characteristic(spec)
    diag["singular_curve"] = "y = 0 (straight line)"
    object.__setattr__(spec, "diagnostics", diag)
    return spec


def to_potential(data):
    """Singular potential or pair for either kind of Cauchy data."""
    if isinstance(data, CharCauchyData):
        return characteristic_pair(data.s, data.t0, data.delta, data.sigma, data.H,
                                   data.domain, data.lam, data.order)
    return noncharacteristic_potential(data)


def predict_type(data, v0=0.0):
    """Symbolic classification at ``(u, v) = (0, v0)`` from exact polynomial values."""
    s, t, dth = data.s, data.t, data.theta.deriv()
    s0, t0, th1 = float(s(v0)), float(t(v0)), float(dth(v0))
    s1, t1 = float(s.deriv()(v0)), float(t.deriv()(v0))
    evidence = {"s": s0, "t": t0, "theta_prime": th1, "s_prime": s1, "t_prime": t1,
                "tau": -np.sqrt(2) * t0 * th1, "tau_prime": -np.sqrt(2) * (t1 * th1 + t0 * float(dth.deriv()(v0))),
                "det_gamma_eta": -s0, "det_gamma_eta_prime": -s1}
    kind = symbolic_type(s0, t0, th1, s1, t1, t_vanishes=t.is_zero)
    return SingularityReport(location=(0.0, float(v0)), type=kind, evidence=evidence,
                             cls="II", source="symbolic")


# ---------------------------------------------------------------- config I/O

def _check_no_common_zero(data):
    lo, hi = data.domain.interval_b
    if data.s.is_zero and data.t.is_zero:
        raise ValidationError("s and t vanish identically")
    zs = [lo + (hi - lo) * k / 64 for k in range(65)] if data.s.is_zero else \
        [r for r, _ in data.s.real_roots(lo, hi)]
    for r in zs:
        if abs(data.t(r)) <= 1e-12:
            raise ValidationError(f"s and t vanish simultaneously at v={r:.6g}")


def parse_section(sec):
    if sec.name == "cauchy":
        kw = _common(sec, CauchyData.__dataclass_fields__["domain"].default, uv=True)
        theta = sec.poly("theta", "v")
        if abs(theta(0.0)) > 1e-14:
            raise ValidationError("theta(0) must be 0")
        data = CauchyData(sec.poly("s", "v"), sec.poly("t", "v"), theta, **kw)
        _check_no_common_zero(data)
        return data
    kw = _common(sec, Domain())
    if "t" in sec.items:
        t = sec.poly("t", "x")
        if not t.is_constant:
            raise ValidationError("characteristic data needs a constant t")
        t0 = float(t(0.0))
    else:
        t0 = sec.real("t0", None)
    delta, sigma = sec.poly("delta", "y"), sec.poly("sigma", "y")
    if t0 is None:
        t0 = -float(delta(0.0)) / kw["H"]
    data = CharCauchyData(sec.poly("s", "x"), t0, delta, sigma, **kw)
    characteristic_pair(data.s, data.t0, data.delta, data.sigma, data.H)
    return data


def section_lines(data):
    if isinstance(data, CauchyData):
        lines = ["[cauchy]"] + [f"{n} = {getattr(data, n).to_text()}" for n in ("s", "t", "theta")]
        return lines + _common_lines(data, uv=True)
    if isinstance(data, CharCauchyData):
        lines = ["[cauchy.characteristic]", f"s = {data.s.to_text()}", f"t0 = {data.t0!r}",
                 f"delta = {data.delta.to_text()}", f"sigma = {data.sigma.to_text()}"]
        return lines + _common_lines(data)
    raise TypeError(f"cannot print {type(data).__name__}")
