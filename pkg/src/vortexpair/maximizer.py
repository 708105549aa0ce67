"""Energy maximizer over the capped, mass-constrained class supported in D.

One step linearizes the kinetic term at the current field, maximizes the
linearized functional pointwise (a bathtub problem whose multiplier mu fixes
the mass), then Steiner-symmetrizes. Because the Green quadratic form is
positive semidefinite, each plain step cannot decrease the energy.

Plain steps move the core's height by O(eps^2) per step, so ``run_maximizer``
wraps them in Anderson extrapolation of the stream field. A candidate is kept
only if its energy does not drop; otherwise the plain step is taken.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, optimize

from .energy import EnergyReport, Params, energy_eval, steiner_symmetrize
from .halfplane_green import VorticityField, apply_green_operator, dump_field
from .model_functions import conjugate_slope, eval_i

__all__ = [
    "Solution",
    "MaximizerError",
    "AscentError",
    "initialize_field",
    "solve_multiplier",
    "iterate_once",
    "run_maximizer",
    "euler_lagrange_residual",
    "density_field",
    "export_solution",
]

ASCENT_TOL = 1e-9
MAX_LAMBDA_DOUBLINGS = 6


class MaximizerError(RuntimeError):
    pass


class AscentError(MaximizerError):
    def __init__(self, msg, solution=None):
        super().__init__(msg)
        self.solution = solution


@dataclass
class Solution:
    zeta: VorticityField
    psi: np.ndarray
    mu: float
    energy: EnergyReport
    iterations: int = 0
    el_residual: float = math.nan
    patch_measure: float = 0.0
    converged: bool = False
    lambda_cap: float = math.nan
    lambda_doublings: int = 0
    energy_history: list = field(default_factory=list)
    stream: np.ndarray | None = field(default=None, repr=False)
    eta: np.ndarray | None = field(default=None, repr=False)

    @property
    def mass(self) -> float:
        return self.zeta.mass

    @property
    def patch_vanished(self) -> bool:
        return self.patch_measure == 0.0

    def summary(self) -> dict:
        c = self.zeta.centroid
        out = {"mu": self.mu, **{f"energy_{k}": v for k, v in self.energy.as_dict().items()},
               "iterations": self.iterations, "el_residual": self.el_residual,
               "patch_measure": self.patch_measure, "converged": self.converged,
               "lambda_cap": self.lambda_cap, "lambda_doublings": self.lambda_doublings,
               "mass": self.mass, "centroid_x1": c[0], "centroid_x2": c[1],
               "support_diameter": self.zeta.support_diameter()}
        return out


def initialize_field(p: Params, center_guess) -> VorticityField:
    """Uniform disc of radius eps*sqrt(kappa/pi), value 1/eps^2, rescaled to mass kappa."""
    cx, cy = float(center_guess[0]), float(center_guess[1])
    radius = p.eps * math.sqrt(p.kappa / math.pi)
    x1lo, x1hi, x2lo, x2hi = p.D_bounds
    if min(cx - x1lo, x1hi - cx, cy - x2lo, x2hi - cy) <= radius:
        raise MaximizerError(f"seed disc of radius {radius:.4g} at {(cx, cy)} is not inside D")
    X1, X2 = p.grid.mesh()
    disc = ((X1 - cx) ** 2 + (X2 - cy) ** 2 < radius**2) & p.domain_mask
    if not disc.any():
        raise MaximizerError("seed disc contains no cell centres; refine the grid")
    data = np.where(disc, 1.0 / p.eps**2, 0.0)
    field_ = VorticityField(p.grid, data)
    data *= p.kappa / field_.mass
    np.minimum(data, p.cap, out=data)
    return VorticityField(p.grid, data)


class _Bathtub:
    """zeta_mu = min(cap, i(x2, (u - mu)_+)/eps^2) on D, restricted to cells with u > 0."""

    def __init__(self, u: np.ndarray, p: Params):
        self.p = p
        live = p.domain_mask & (u > 0)
        self.rows, self.cols = np.nonzero(live)
        self.u = u[self.rows, self.cols]
        self.x2 = p.grid.x2[self.rows]
        self.area = p.grid.h**2

    def values(self, mu: float) -> np.ndarray:
        t = np.maximum(self.u - mu, 0.0)
        return np.minimum(eval_i(self.p.model, self.x2, t) / self.p.eps**2, self.p.cap)

    def mass(self, mu: float) -> float:
        return self.area * float(np.sum(self.values(mu)))

    def field(self, mu: float) -> VorticityField:
        data = np.zeros(self.p.grid.shape)
        data[self.rows, self.cols] = self.values(mu)
        return VorticityField(self.p.grid, data)


def solve_multiplier(u: np.ndarray, p: Params) -> tuple[float, VorticityField]:
    """Smallest mu >= 0 with mass(zeta_mu) <= kappa, and zeta_mu."""
    if not np.all(np.isfinite(u[p.domain_mask])):
        raise MaximizerError("non-finite stream values in D")
    bath = _Bathtub(u, p)
    if bath.u.size == 0:
        return 0.0, VorticityField.zeros(p.grid)
    if bath.mass(0.0) <= p.kappa:
        return 0.0, bath.field(0.0)
    hi = float(bath.u.max())
    target = p.kappa

    def excess(mu):
        return bath.mass(mu) - target

    mu = optimize.brentq(excess, 0.0, hi, xtol=p.bisection_tol * max(hi, 1e-300),
                         rtol=4.0 * np.finfo(float).eps, maxiter=500)
    # brentq may land a hair below the root; nudge up so the mass never exceeds kappa
    step = np.spacing(mu)
    for _ in range(64):
        if excess(mu) <= p.mass_tol * target:
            break
        mu += step
        step *= 2.0
    else:
        raise MaximizerError(f"multiplier bracket failure; largest probed mu = {mu!r}")
    return float(mu), bath.field(mu)


def _state(zeta: VorticityField, p: Params, mu: float, iterations=0, history=None,
           stream=None) -> Solution:
    if stream is None:
        stream = apply_green_operator(zeta)
    energy = energy_eval(zeta, p, stream=stream)
    psi = stream - p.W * p.heights - mu
    return Solution(zeta=zeta, psi=psi, mu=mu, energy=energy, iterations=iterations,
                    lambda_cap=p.lambda_cap, stream=stream,
                    energy_history=list(history or []) + [energy.total])


def _plain_step(stream: np.ndarray, p: Params):
    mu, z = solve_multiplier(stream - p.W * p.heights, p)
    return mu, steiner_symmetrize(z)


def iterate_once(s: Solution, p: Params) -> Solution:
    """One linearize-bathtub-symmetrize step; raises AscentError if the energy drops."""
    stream = s.stream if s.stream is not None else apply_green_operator(s.zeta)
    mu, z = _plain_step(stream, p)
    new = _state(z, p, mu, s.iterations + 1, s.energy_history)
    if new.energy.total < s.energy.total - ASCENT_TOL:
        raise AscentError(f"energy decreased from {s.energy.total!r} to {new.energy.total!r}", s)
    return new


def _rel_change(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.max(np.abs(a))), 1e-300)
    return float(np.max(np.abs(a - b))) / scale


class _Anderson:
    """Type-II Anderson mixing on x -> T(x), x restricted to the cells of D."""

    def __init__(self, depth: int):
        self.depth = depth
        self.reset()

    def reset(self):
        self.dx, self.df = [], []
        self.prev = None

    def propose(self, x: np.ndarray, fx: np.ndarray) -> np.ndarray:
        if self.prev is not None:
            px, pf = self.prev
            self.dx.append(x - px)
            self.df.append(fx - pf)
            if len(self.dx) > self.depth:
                self.dx.pop(0)
                self.df.pop(0)
        self.prev = (x, fx)
        if not self.df:
            return x + fx
        F = np.column_stack(self.df)
        X = np.column_stack(self.dx)
        gamma, *_ = np.linalg.lstsq(F, fx, rcond=1e-12)
        return x + fx - (X + F) @ gamma


def run_maximizer(p: Params, center_guess=None, *, init: VorticityField | None = None,
                  anderson_depth: int = 6, double_lambda: bool = True,
                  callback=None) -> Solution:
    """Iterate to a fixed point; double Lambda (up to 6 times) while a patch remains."""
    if init is None:
        if center_guess is None:
            raise MaximizerError("need a centre guess or an initial field")
        init = initialize_field(p, center_guess)
    doublings = 0
    history: list = []
    zeta = init
    total_iters = 0
    while True:
        sol = _iterate_to_fixed_point(p, zeta, anderson_depth, history, callback)
        total_iters += sol.iterations
        history = sol.energy_history
        sol.iterations = total_iters
        sol.lambda_doublings = doublings
        if sol.patch_measure > 0 and double_lambda and doublings < MAX_LAMBDA_DOUBLINGS:
            doublings += 1
            p = p.with_lambda(2.0 * p.lambda_cap)
            zeta = sol.zeta
            continue
        return sol


def _iterate_to_fixed_point(p, zeta, depth, history, callback,
                            translate_every=8) -> Solution:
    """x_k is the stream fed to the bathtub; zeta_k its image; f_k = G zeta_k - x_k."""
    mask = p.domain_mask
    cur = _state(zeta, p, math.nan, 0, history)
    aa = _Anderson(depth)
    # first plain step defines (x_1, zeta_1)
    x = cur.stream[mask]
    mu, z = _plain_step(cur.stream, p)
    cur = _checked(cur, _state(z, p, mu, 1, cur.energy_history), 1)
    converged = False
    searching = translate_every > 0
    quiet_searches = 0
    it = 1
    for it in range(2, p.max_iter + 1):
        fx = cur.stream[mask] - x
        resid = float(np.max(np.abs(fx))) / max(cur.mu, 1e-300)
        nxt = None
        if searching and it % translate_every == 0:
            shift, moved = _translation_search(cur, p, it)
            if moved is not None and moved.energy.total > cur.energy.total:
                nxt, cand_x = moved, _shifted_stream(cur.stream, shift, p)[mask]
                aa.reset()
            quiet_searches = quiet_searches + 1 if abs(shift) < 1e-3 else 0
            searching = quiet_searches < 2
        if nxt is None:
            cand_x = aa.propose(x, fx) if depth > 0 else cur.stream[mask]
            nxt = _from_stream(cand_x, p, it, cur.energy_history)
            if nxt.energy.total < cur.energy.total - 1e-3 * ASCENT_TOL:
                # extrapolation overshot; take the plain step, which ascends
                cand_x = cur.stream[mask]
                nxt = _from_stream(cand_x, p, it, cur.energy_history)
        nxt = _checked(cur, nxt, it)
        change = _rel_change(nxt.zeta.data, cur.zeta.data)
        if callback is not None:
            callback(it, nxt, change, resid)
        prev_resid = resid
        cur, x = nxt, cand_x
        if change < p.fixedpoint_tol and prev_resid < p.fixedpoint_tol:
            converged = True
            break
    cur.iterations = it
    cur.converged = converged
    cur.el_residual = euler_lagrange_residual(cur, p)
    cur.patch_measure = _patch_measure(cur.zeta, p)
    return cur


def _shifted_stream(stream: np.ndarray, cells: float, p: Params) -> np.ndarray:
    return ndimage.shift(stream, (cells, 0.0), order=3, mode="nearest")


def _translation_search(cur: Solution, p: Params, it: int):
    """Maximize the energy over rigid vertical shifts of the stream (in cells).

    The core's height is the one mode the bathtub map barely contracts; this
    moves it directly. Returns (shift, state) with state None if nothing beat
    the unshifted step.
    """
    rows = np.nonzero(cur.zeta.data.any(axis=1))[0]
    drows = np.nonzero(p.domain_mask.any(axis=1))[0]
    if rows.size == 0:
        return 0.0, None
    down = float(rows[0] - drows[0] - 2)
    up = float(drows[-1] - rows[-1] - 2)
    if down <= 0 and up <= 0:
        return 0.0, None
    cache = {}

    def neg_energy(cells):
        st = _from_stream(_shifted_stream(cur.stream, cells, p)[p.domain_mask], p, it,
                          cur.energy_history)
        cache[cells] = st
        return -st.energy.total

    base = neg_energy(0.0)
    res = optimize.minimize_scalar(neg_energy, bounds=(-max(down, 0.0), max(up, 0.0)),
                                   method="bounded", options={"xatol": 1e-4})
    if res.fun < base:
        return float(res.x), cache[res.x]
    return 0.0, None


def _from_stream(x_d: np.ndarray, p: Params, it: int, history) -> Solution:
    u = np.zeros(p.grid.shape)
    u[p.domain_mask] = x_d
    mu, z = _plain_step(u, p)
    return _state(z, p, mu, it, history)


def _checked(cur: Solution, nxt: Solution, it: int) -> Solution:
    if nxt.energy.total < cur.energy.total - ASCENT_TOL:
        raise AscentError(f"energy decreased from {cur.energy.total!r} to "
                          f"{nxt.energy.total!r} at iteration {it}", cur)
    return nxt


def _patch_measure(zeta: VorticityField, p: Params) -> float:
    return float(np.count_nonzero(zeta.data >= p.cap * (1.0 - 1e-12)) * zeta.cell_area)


def euler_lagrange_residual(s: Solution, p: Params) -> float:
    """Sup over D of the violation of the three-case optimality system, divided by mu."""
    stream = s.stream if s.stream is not None else apply_green_operator(s.zeta)
    psi = (stream - p.W * p.heights - s.mu)[p.domain_mask]
    z = s.zeta.data[p.domain_mask]
    x2 = np.broadcast_to(p.heights, p.grid.shape)[p.domain_mask]
    cap = p.cap * (1.0 - 1e-12)
    zero = z == 0
    full = z >= cap
    mid = ~zero & ~full
    worst = 0.0
    if np.any(zero):
        worst = max(worst, float(np.max(np.maximum(psi[zero], 0.0))))
    if np.any(mid):
        slope = conjugate_slope(p.model, x2[mid], p.eps**2 * z[mid])
        worst = max(worst, float(np.max(np.abs(psi[mid] - slope))))
    if np.any(full):
        slope = conjugate_slope(p.model, x2[full], np.full(full.sum(), p.lambda_cap))
        worst = max(worst, float(np.max(np.maximum(slope - psi[full], 0.0))))
    scale = s.mu if s.mu > 0 else 1.0
    return worst / scale


def density_field(s: Solution, p: Params) -> np.ndarray:
    """eta = -(cg/eps^2) * Gprim(psi_+) on D, Gprim the primitive of g."""
    m = p.model
    if m.cg == 0:
        return np.zeros(p.grid.shape)
    pos = np.where(p.domain_mask, np.maximum(s.psi, 0.0), 0.0)
    return -(m.cg / p.eps**2) * m.g.primitive(pos)


def export_solution(directory, s: Solution, p: Params) -> dict:
    """Field dumps for zeta, psi, eta plus a key-value summary file."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    dump_field(out / "zeta.txt", p.grid, s.zeta.data, "zeta")
    dump_field(out / "psi.txt", p.grid, s.psi, "psi")
    dump_field(out / "eta.txt", p.grid, density_field(s, p), "eta")
    summary = s.summary()
    with open(out / "summary.txt", "w") as fh:
        for k, v in summary.items():
            fh.write(f"{k} = {v!r}\n")
    return summary
