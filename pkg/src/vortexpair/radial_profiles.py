"""Radial limiting profiles: -u'' - u'/r = nl(u), integral of nl(u) over the plane = kappa.

Shooting on the centre value u(0). Outside the support radius R the profile
continues harmonically, u(r) = R u'(R) log(r/R), matching u and u' at R.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, interpolate, optimize, special

from .model_functions import Nonlinearity

__all__ = [
    "ProfileError",
    "ScalarProfile",
    "solve_radial_profile",
    "lamb_dipole_profile",
    "pohozaev_residual",
    "profile_constant_Cg",
    "CgResult",
    "radial_integral",
    "export_profile",
    "N_SAMPLES",
    "J0_FIRST_ZERO",
]

N_SAMPLES = 4096
J0_FIRST_ZERO = float(special.jn_zeros(0, 1)[0])
_RTOL = 1e-12
_ATOL = 1e-14


class ProfileError(RuntimeError):
    pass


@dataclass
class ScalarProfile:
    """Sampled radial profile on [0, support_radius] with a log exterior."""

    radii: np.ndarray
    values: np.ndarray
    slopes: np.ndarray
    support_radius: float
    mass: float
    center_value: float
    label: str = ""
    _spline: interpolate.CubicSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._spline = interpolate.CubicSpline(
            self.radii, self.values,
            bc_type=((1, 0.0), (1, float(self.slopes[-1]))))

    @property
    def boundary_slope(self) -> float:
        return float(self.slopes[-1])

    def __call__(self, r):
        r = np.abs(np.asarray(r, dtype=float))
        R = self.support_radius
        inside = np.minimum(r, R)
        out = self._spline(inside)
        with np.errstate(divide="ignore"):
            ext = R * self.boundary_slope * np.log(np.where(r > R, r, R) / R)
        return np.where(r > R, ext, out)


def _rhs(nl):
    def rhs(r, y):
        u, du = y
        return [du, -du / r - float(nl(u))]
    return rhs


def _hit_zero(r, y):
    return y[0]


_hit_zero.terminal = True
_hit_zero.direction = -1


def _shoot(nl, a, dense=False, r_max=1e4):
    """Integrate from the axis with centre value a; return the OdeResult."""
    q = float(nl(a))
    if q <= 0:
        raise ProfileError(f"nl(u(0)) = 0 at u(0) = {a!r}; no compact core")
    r0 = min(1e-6, 1e-3 / math.sqrt(q))
    y0 = [a - q * r0 * r0 / 4.0, -q * r0 / 2.0]
    sol = integrate.solve_ivp(_rhs(nl), (r0, r_max), y0, method="DOP853",
                              rtol=_RTOL, atol=_ATOL * max(1.0, abs(a)),
                              events=_hit_zero, dense_output=dense)
    if sol.status != 1 or len(sol.t_events[0]) == 0:
        raise ProfileError(f"profile with u(0) = {a!r} never reaches zero before r = {r_max}")
    return sol


def _mass_of(nl, a) -> float:
    sol = _shoot(nl, a)
    R = sol.t_events[0][0]
    du = sol.y_events[0][0][1]
    return -2.0 * math.pi * R * du


def solve_radial_profile(nl: Nonlinearity, kappa: float, *, n_samples: int = N_SAMPLES,
                         a_lo: float = 1e-8, a_hi: float = 1e8) -> ScalarProfile:
    """Radial solution of -Lap u = nl(u) with mass kappa, by shooting on u(0)."""
    if not kappa > 0:
        raise ProfileError("kappa must be positive")
    # geometric expansion from u(0) = 1 until the mass brackets kappa
    lo = hi = 1.0
    m = _mass_of(nl, 1.0)
    if m < kappa:
        while m < kappa:
            lo, hi = hi, hi * 2.0
            if hi > a_hi:
                raise ProfileError(f"no bracket: mass {m:.6g} < kappa for u(0) in [1, {lo:.3g}]")
            m = _mass_of(nl, hi)
    elif m > kappa:
        while m > kappa:
            lo, hi = lo / 2.0, lo
            if lo < a_lo:
                raise ProfileError(f"no bracket: mass {m:.6g} > kappa for u(0) in [{hi:.3g}, 1]")
            m = _mass_of(nl, lo)
    if m == kappa:
        a = hi if _mass_of(nl, hi) == kappa else lo
    else:
        a = optimize.brentq(lambda s: _mass_of(nl, s) - kappa, lo, hi,
                            xtol=1e-15, rtol=1e-15, maxiter=200)
    return _sample_profile(nl, a, n_samples, label=repr(nl))


def _sample_profile(nl, a, n_samples, label=""):
    sol = _shoot(nl, a, dense=True)
    R = float(sol.t_events[0][0])
    du_R = float(sol.y_events[0][0][1])
    r0 = sol.t[0]
    radii = np.linspace(0.0, R, n_samples)
    vals = np.empty(n_samples)
    slopes = np.empty(n_samples)
    body = radii > r0
    y = sol.sol(radii[body])
    vals[body], slopes[body] = y[0], y[1]
    q = float(nl(a))
    vals[~body] = a - q * radii[~body] ** 2 / 4.0
    slopes[~body] = -q * radii[~body] / 2.0
    vals[-1], slopes[-1] = 0.0, du_R
    return ScalarProfile(radii, vals, slopes, R, -2.0 * math.pi * R * du_R, a, label)


def radial_integral(profile: ScalarProfile, integrand_values) -> float:
    """2 pi * int_0^R F(r) r dr by Simpson's rule on the stored samples."""
    return 2.0 * math.pi * float(integrate.simpson(
        np.asarray(integrand_values) * profile.radii, x=profile.radii))


def lamb_dipole_profile(kappa: float, n_samples: int = N_SAMPLES) -> ScalarProfile:
    """Closed form A J0(r) on [0, j01] for nl = s+, A = kappa / (2 pi j01 J1(j01))."""
    j = J0_FIRST_ZERO
    amp = kappa / (2.0 * math.pi * j * special.j1(j))
    radii = np.linspace(0.0, j, n_samples)
    vals = amp * special.j0(radii)
    vals[-1] = 0.0
    slopes = -amp * special.j1(radii)
    return ScalarProfile(radii, vals, slopes, j, kappa, amp, "lamb-dipole")


def pohozaev_residual(profile: ScalarProfile, nl: Nonlinearity) -> tuple[float, float]:
    """Relative residuals of
    int_B G(u) = (pi/2) (u'(R) R)^2   and   int_B nl(u) = 2 pi (-u'(R)) R.
    """
    R, du = profile.support_radius, profile.boundary_slope
    if abs(du) * R < 1e-14:
        raise ProfileError("boundary derivative below noise floor")
    lhs1 = radial_integral(profile, nl.primitive(profile.values))
    lhs2 = radial_integral(profile, nl(profile.values))
    res1 = (lhs1 - 0.5 * math.pi * (du * R) ** 2) / lhs1
    res2 = (lhs2 - 2.0 * math.pi * (-du) * R) / lhs2
    return float(res1), float(res2)


@dataclass(frozen=True)
class CgResult:
    value: float
    discrepancy: float

    def __iter__(self):
        return iter((self.value, self.discrepancy))

    def __float__(self):
        return self.value


def profile_constant_Cg(profile: ScalarProfile, nl: Nonlinearity, kappa: float | None = None) -> CgResult:
    """int G(V) over the core, and its discrepancy with int (V g(V) - J_G(g(V))).

    ``kappa`` is accepted for reporting symmetry with the other calls; the
    value only depends on the profile.
    """
    v = profile.values
    gv = nl(v)
    direct = radial_integral(profile, nl.primitive(v))
    jg, _ = nl.conjugate(gv)
    legendre = radial_integral(profile, v * gv - jg)
    return CgResult(direct, abs(direct - legendre))


def export_profile(path, profile: ScalarProfile, nl_label: str, kappa: float) -> None:
    """Two-column text (r, u(r)) with a commented header."""
    header = "\n".join([
        f"nl {nl_label}",
        f"kappa {kappa!r}",
        f"support_radius {profile.support_radius!r}",
        f"center_value {profile.center_value!r}",
        f"exterior u(r) = {profile.support_radius * profile.boundary_slope!r} * log(r / support_radius)"
        " (continuity of u and u' at the support radius)",
        "columns r u",
    ])
    np.savetxt(path, np.column_stack([profile.radii, profile.values]), fmt="%.17g",
               header=header)
