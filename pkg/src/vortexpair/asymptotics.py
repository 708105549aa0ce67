"""Limit heights, travel potentials, and the epsilon sweep harness.

The travel potentials are

    theorem2:  k^2/(4 pi) log(1/(2t)) + k W t
    theorem1:  theorem2 + int (1+a r*)/(1+a t) J_F((1+a t)/(1+a r*) f(U)) dz
    theorem3:  theorem2 + (r2*/t) int J_G((t/r2*) g(V)) dz

with U, V the radial profiles of mass k. ``core_balance_height`` is a second,
independent prediction: it lets the core size follow the local strength of
i(x2, .) (the core is U(sqrt(w(t)) y) when i = w(x2) h), which adds
-(k^2/(8 pi)) log w(t) to the theorem2 potential.
"""
from __future__ import annotations

import csv
import enum
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .energy import Params, speed_condition_bound
from .halfplane_green import VorticityField
from .maximizer import Solution, initialize_field, run_maximizer
from .model_functions import ModelFunctions, Nonlinearity
from .radial_profiles import ScalarProfile, radial_integral

__all__ = [
    "TravelPotentialKind",
    "PotentialSetup",
    "AsymptoticsError",
    "rstar",
    "r1star",
    "r2star",
    "core_balance_height",
    "alpha_of",
    "kind_of",
    "limit_height",
    "travel_potential_eval",
    "travel_potential_derivative",
    "minimize_travel_potential",
    "derivative_sign_changes",
    "m_function",
    "m_prime",
    "n_prime",
    "c1_window",
    "SweepReport",
    "epsilon_sweep",
    "rescale_field",
    "rescaled_profile_error",
]


class AsymptoticsError(RuntimeError):
    pass


class TravelPotentialKind(enum.Enum):
    THEOREM1 = "theorem1"
    THEOREM2 = "theorem2"
    THEOREM3 = "theorem3"

    @classmethod
    def parse(cls, value) -> "TravelPotentialKind":
        if isinstance(value, cls):
            return value
        return cls(str(value).strip().lower())


def rstar(kappa: float, W: float, alpha: float = 0.0, *, rtol: float = 1e-12) -> float:
    """Root of -k^2/(4 pi r) + k W + (a/(1+a r)) k^2/(8 pi) on (0, k/(2 pi W)]."""
    if not (kappa > 0 and W > 0 and alpha >= 0):
        raise ValueError("need kappa > 0, W > 0, alpha >= 0")
    if W < speed_condition_bound(alpha, kappa):
        warnings.warn("travel speed below (2-alpha)_+^2 kappa/(32 pi); the root may not be"
                      " the unique minimizer of the potential", stacklevel=2)

    def balance(r):
        return -kappa**2 / (4 * math.pi * r) + kappa * W + alpha / (1 + alpha * r) * kappa**2 / (8 * math.pi)

    lo, hi = 0.0, kappa / (2 * math.pi * W)
    # balance(hi) = k W / 2 + positive > 0 and balance -> -inf at 0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if balance(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def r1star(kappa: float, W: float) -> float:
    """Height at which a +-kappa point pair travels at speed W."""
    return kappa / (4 * math.pi * W)


def r2star(kappa: float, W: float, c_g: float | None = None) -> float:
    """(k^2/(4 pi) - C_g)/(k W); C_g defaults to its profile-independent value k^2/(8 pi)."""
    if c_g is None:
        c_g = kappa**2 / (8 * math.pi)
    return (kappa**2 / (4 * math.pi) - c_g) / (kappa * W)


def core_balance_height(kind, kappa: float, W: float, alpha: float = 0.0) -> float:
    """Stationary height of k^2/(4 pi) log(1/(2t)) + k W t - k^2/(8 pi) log w(t).

    w(t) = 1 + alpha t (theorem1), 1 (theorem2), t (theorem3).
    """
    kind = TravelPotentialKind.parse(kind)
    if kind is TravelPotentialKind.THEOREM2:
        return r1star(kappa, W)
    if kind is TravelPotentialKind.THEOREM3:
        return 3 * kappa / (8 * math.pi * W)
    # k/(4 pi t) + a k/(8 pi (1 + a t)) = W  <=>  8 pi W a t^2 + (8 pi W - 3 k a) t - 2k = 0
    a2 = 8 * math.pi * W * alpha
    a1 = 8 * math.pi * W - 3 * kappa * alpha
    if a2 == 0:
        return 2 * kappa / a1
    return (-a1 + math.sqrt(a1 * a1 + 8 * a2 * kappa)) / (2 * a2)


def alpha_of(model: ModelFunctions) -> float:
    """alpha for i = (1 + alpha x2) f, i.e. g = f (or g switched off)."""
    if model.cg == 0:
        return 0.0
    if model.cf > 0 and model.f == model.g:
        return model.cg / model.cf
    raise AsymptoticsError("model is not of the form (1 + alpha x2) f")


def kind_of(model: ModelFunctions) -> TravelPotentialKind:
    if model.cf == 0:
        return TravelPotentialKind.THEOREM3
    if model.cg == 0:
        return TravelPotentialKind.THEOREM2
    alpha_of(model)
    return TravelPotentialKind.THEOREM1


def limit_height(kind, kappa: float, W: float, alpha: float = 0.0) -> float:
    """The predicted limit height for each configuration (r*, r1*, r2*)."""
    kind = TravelPotentialKind.parse(kind)
    if kind is TravelPotentialKind.THEOREM1:
        return rstar(kappa, W, alpha)
    if kind is TravelPotentialKind.THEOREM2:
        return r1star(kappa, W)
    return r2star(kappa, W)


@dataclass
class PotentialSetup:
    """Everything a travel potential needs: kind, kappa, W, alpha and the profile's nonlinearity."""

    kind: TravelPotentialKind
    kappa: float
    W: float
    nl: Nonlinearity | None = None
    alpha: float = 0.0
    profile: ScalarProfile | None = None
    c1: float | None = None

    def __post_init__(self):
        self.kind = TravelPotentialKind.parse(self.kind)
        if self.kind is not TravelPotentialKind.THEOREM2 and (self.nl is None or self.profile is None):
            raise AsymptoticsError(f"{self.kind.value} potential needs a profile and its nonlinearity")

    @property
    def reference_height(self) -> float:
        return limit_height(self.kind, self.kappa, self.W, self.alpha)


def _point_vortex_part(t, kappa, W):
    return kappa**2 / (4 * math.pi) * math.log(1.0 / (2.0 * t)) + kappa * W * t


def travel_potential_eval(setup: PotentialSetup, t: float) -> float:
    """Value of the configured potential at height t (+inf if the conjugate diverges)."""
    if not t > 0:
        raise ValueError("height must be positive")
    base = _point_vortex_part(t, setup.kappa, setup.W)
    if setup.kind is TravelPotentialKind.THEOREM2:
        return base
    prof, nl = setup.profile, setup.nl
    source = nl(prof.values)
    if setup.kind is TravelPotentialKind.THEOREM1:
        ref = setup.reference_height
        ratio = (1 + setup.alpha * t) / (1 + setup.alpha * ref)
    else:
        ratio = t / setup.reference_height
    vals, _ = nl.conjugate(ratio * source)
    if not np.all(np.isfinite(vals)):
        warnings.warn(f"conjugate diverges at t={t:g}: the scaled source exceeds the range of"
                      " the nonlinearity", stacklevel=2)
        return math.inf
    return base + radial_integral(prof, vals) / ratio


def travel_potential_derivative(setup: PotentialSetup, t: float, rel_step: float = 1e-5) -> float:
    d = rel_step * t
    return (travel_potential_eval(setup, t + d) - travel_potential_eval(setup, t - d)) / (2 * d)


def _search_interval(setup: PotentialSetup):
    if setup.kind is TravelPotentialKind.THEOREM3:
        c1 = setup.c1 if setup.c1 is not None else c1_window(setup)
        r2 = setup.reference_height
        return c1 * r2, r2 / c1
    upper = 4 * setup.kappa / (math.pi * setup.W)
    return upper * 1e-6, upper


def minimize_travel_potential(setup: PotentialSetup, n_scan: int = 600) -> tuple[float, float]:
    """(t_min, |dW/dt| at t_min): log scan, golden section, then a root of the derivative."""
    lo, hi = _search_interval(setup)
    ts = np.geomspace(lo, hi, n_scan)
    vals = np.array([travel_potential_eval(setup, t) for t in ts])
    interior = np.nonzero((vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:]))[0] + 1
    if interior.size > 1:
        warnings.warn(f"potential is not unimodal on the scan ({interior.size} local minima);"
                      " refining the global one", stacklevel=2)
    k = int(np.argmin(vals))
    a, b = ts[max(k - 1, 0)], ts[min(k + 1, n_scan - 1)]
    res = optimize.minimize_scalar(lambda t: travel_potential_eval(setup, t),
                                   bracket=(a, ts[k], b) if 0 < k < n_scan - 1 else None,
                                   bounds=None if 0 < k < n_scan - 1 else (a, b),
                                   method="golden" if 0 < k < n_scan - 1 else "bounded",
                                   options={"xtol": 1e-10} if 0 < k < n_scan - 1 else {"xatol": 1e-12})
    t_min = float(res.x)
    # function values only pin the minimum to ~sqrt(machine eps); polish on the derivative
    left, right = max(a, t_min * (1 - 1e-3)), min(b, t_min * (1 + 1e-3))
    dl = travel_potential_derivative(setup, left)
    dr = travel_potential_derivative(setup, right)
    if dl < 0 < dr:
        t_min = optimize.brentq(lambda t: travel_potential_derivative(setup, t), left, right,
                                xtol=1e-14 * t_min, rtol=1e-14)
    return t_min, abs(travel_potential_derivative(setup, t_min))


def derivative_sign_changes(setup: PotentialSetup, ts) -> int:
    d = np.array([travel_potential_derivative(setup, t) for t in ts])
    s = np.sign(d[d != 0])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def m_function(t, kappa: float, W: float, alpha: float):
    """(1 + a t)^2 (-k^2/(4 pi t) + k W)."""
    t = np.asarray(t, dtype=float)
    return (1 + alpha * t) ** 2 * (-kappa**2 / (4 * math.pi * t) + kappa * W)


def m_prime(t, kappa: float, W: float, alpha: float):
    """k (1 + a t)/(4 pi t^2) (8 pi W t^2 - (2 - a) k t + k)."""
    t = np.asarray(t, dtype=float)
    return kappa * (1 + alpha * t) / (4 * math.pi * t**2) * (
        8 * math.pi * W * t**2 - (2 - alpha) * kappa * t + kappa)


def n_prime(setup: PotentialSetup, t) -> np.ndarray:
    """N'(t) = -k^2/(4 pi) + 2 k W t + int g(J_G'(s)) J_G''(s) g(V) dz, s = (t/r2*) g(V).

    With q = J_G'(s) = g^{-1}(s): g(q) = s and J_G''(s) = 1/g'(q).
    """
    prof, g = setup.profile, setup.nl
    r2 = setup.reference_height
    gv = g(prof.values)
    out = []
    for tt in np.atleast_1d(np.asarray(t, dtype=float)):
        s = (tt / r2) * gv
        _, q = g.conjugate(s)
        with np.errstate(divide="ignore", invalid="ignore"):
            integrand = np.where(gv > 0, s * gv / g.derivative(q), 0.0)
        out.append(-setup.kappa**2 / (4 * math.pi) + 2 * setup.kappa * setup.W * tt
                   + radial_integral(prof, integrand))
    return np.asarray(out)


def c1_window(setup: PotentialSetup, *, step: float = 0.05, floor: float = 0.5,
              n_grid: int = 201, tol: float = 1e-10) -> float:
    """Smallest c1 in 0.9, 0.85, ..., down to 0.5 with N' > 0 on [c1 r2*, r2*/c1]."""
    r2 = setup.reference_height
    best = None
    for j in range(int(round((0.9 - floor) / step)) + 1):
        c1 = round(0.9 - j * step, 10)
        ts = np.linspace(c1 * r2, r2 / c1, n_grid)
        if np.all(n_prime(setup, ts) > tol * setup.kappa**2):
            best = c1
        else:
            break
    if best is None:
        raise AsymptoticsError("no window with N' > 0 found down to c1 = 0.5")
    return best


# ---------------------------------------------------------------- sweeps

@dataclass
class SweepReport:
    epsilons: list = field(default_factory=list)
    energies: list = field(default_factory=list)
    multipliers: list = field(default_factory=list)
    diameters: list = field(default_factory=list)
    centroids_x2: list = field(default_factory=list)
    el_residuals: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    grid_steps: list = field(default_factory=list)
    solutions: list = field(default_factory=list, repr=False)
    slope_E: float = math.nan
    slope_mu: float = math.nan
    rbar_extrapolated: float = math.nan
    dropped_for_E: bool = False
    dropped_for_mu: bool = False

    @property
    def tainted(self) -> bool:
        return not all(self.converged)

    def rows(self):
        for i in range(len(self.epsilons)):
            yield (self.epsilons[i], self.energies[i], self.multipliers[i],
                   self.diameters[i], self.centroids_x2[i], self.el_residuals[i])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epsilon", "energy", "mu", "diameter", "centroid_x2", "el_residual"])
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])


def _log_slope(eps, values):
    """Least-squares slope of values vs log(1/eps); drop the largest eps if it is a 3x-RMS outlier."""
    x = np.log(1.0 / np.asarray(eps, dtype=float))
    y = np.asarray(values, dtype=float)
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    rms = math.sqrt(float(np.mean(resid**2)))
    big = int(np.argmin(x))
    if len(x) > 3 and rms > 0 and abs(resid[big]) > 3 * rms:
        keep = np.arange(len(x)) != big
        return float(np.polyfit(x[keep], y[keep], 1)[0]), True
    return float(coef[0]), False


def rescale_field(sol: Solution, p_new: Params, eps_old: float) -> VorticityField:
    """Warm start: z(x) <- z(xc + s (x - xc)) s^2 with s = eps_old/eps_new, then renormalize."""
    s = eps_old / p_new.eps
    old = sol.zeta
    xc1 = 0.0
    xc2 = old.centroid[1]
    X1, X2 = p_new.grid.mesh()
    src1 = xc1 + s * (X1 - xc1)
    src2 = xc2 + s * (X2 - xc2)
    g = old.grid
    col = (src1 - g.x1_min) / g.h - 0.5
    row = (src2 - g.x2_min) / g.h - 0.5
    data = ndimage.map_coordinates(old.data, [row, col], order=1, mode="constant", cval=0.0)
    data = np.where(p_new.domain_mask, np.maximum(data, 0.0) * s * s, 0.0)
    data = np.minimum(data, p_new.cap)
    total = data.sum() * p_new.grid.h**2
    if total <= 0:
        raise AsymptoticsError("rescaled warm start is empty")
    data *= p_new.kappa / total
    return VorticityField(p_new.grid, np.minimum(data, p_new.cap))


def _solve_one(args):
    p, center = args
    return run_maximizer(p, center)


def epsilon_sweep(p: Params, eps_list, center_guess=None, *, warm_start: bool = True,
                  workers: int = 1, cells_per_eps: float | None = None,
                  keep_solutions: bool = False, callback=None) -> SweepReport:
    """Solve for each eps (decreasing); fit energy and multiplier slopes vs log(1/eps)."""
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 4:
        raise AsymptoticsError("a sweep needs at least four eps values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise AsymptoticsError("eps values must be strictly decreasing")
    if center_guess is None:
        x1lo, x1hi, x2lo, x2hi = p.D_bounds
        center_guess = (0.0, math.sqrt(x2lo * x2hi))
    cpe = cells_per_eps if cells_per_eps is not None else p.eps / p.grid.h
    params = [p.with_eps(e, cells_per_eps=cpe) for e in eps_list]
    report = SweepReport()
    if warm_start or workers <= 1:
        sols = []
        prev = None
        for q in params:
            if warm_start and prev is not None:
                sol = run_maximizer(q, init=rescale_field(prev, q, prev_eps))
            else:
                sol = run_maximizer(q, center_guess)
            prev, prev_eps = sol, q.eps
            sols.append(sol)
            if callback is not None:
                callback(q, sol)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            sols = list(pool.map(_solve_one, [(q, center_guess) for q in params]))
    for q, sol in zip(params, sols):
        report.epsilons.append(q.eps)
        report.energies.append(sol.energy.total)
        report.multipliers.append(sol.mu)
        report.diameters.append(sol.zeta.support_diameter())
        report.centroids_x2.append(sol.zeta.centroid[1])
        report.el_residuals.append(sol.el_residual)
        report.converged.append(sol.converged)
        report.grid_steps.append(q.grid.h)
        if keep_solutions:
            report.solutions.append(sol)
    ok = np.asarray(report.converged)
    if ok.sum() >= 3:
        eps_ok = np.asarray(report.epsilons)[ok]
        report.slope_E, report.dropped_for_E = _log_slope(eps_ok, np.asarray(report.energies)[ok])
        report.slope_mu, report.dropped_for_mu = _log_slope(eps_ok, np.asarray(report.multipliers)[ok])
        coef = np.polyfit(eps_ok, np.asarray(report.centroids_x2)[ok], 1)
        report.rbar_extrapolated = float(coef[1])
    return report


def rescaled_profile_error(s: Solution, prof: ScalarProfile, p: Params,
                           rbar: float | None = None) -> float:
    """sup |eps^2 zeta(x_eps + eps y) - w h(U(sqrt(w) |y|))| with i = w(x2) h, w = w(rbar).

    ``prof`` is the radial profile of h with mass kappa. Cells are compared at
    their centres over the union of both supports.
    """
    fac = p.model.factorized()
    if fac is None:
        raise AsymptoticsError("rescaled limit needs i(x2, t) = w(x2) h(t)")
    h_nl, weight = fac
    zeta = s.zeta
    xc1, xc2 = zeta.centroid
    if rbar is None:
        rbar = xc2
    w = float(weight(rbar))
    rows, cols = np.nonzero(zeta.support)
    drows = np.nonzero(p.domain_mask.any(axis=1))[0]
    dcols = np.nonzero(p.domain_mask.any(axis=0))[0]
    if rows.size == 0:
        raise AsymptoticsError("empty support")
    if rows.min() <= drows[0] or rows.max() >= drows[-1] or cols.min() <= dcols[0] or cols.max() >= dcols[-1]:
        raise AsymptoticsError("support touches the boundary of D; comparison is contaminated")
    X1, X2 = p.grid.mesh()
    dist = np.hypot(X1 - xc1, X2 - xc2) / p.eps
    limit = w * h_nl(prof(math.sqrt(w) * dist))
    region = zeta.support | (limit > 0)
    discrete = p.eps**2 * zeta.data
    return float(np.max(np.abs(discrete - limit)[region]))
