"""Penalized energy on the admissible class, and Steiner symmetrization in x1."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .halfplane_green import GridSpec, VorticityField, apply_green_operator, quadratic_form
from .model_functions import ModelFunctions, conjugate_value

__all__ = [
    "AdmissibilityError",
    "Params",
    "EnergyReport",
    "make_params",
    "energy_eval",
    "check_admissible",
    "steiner_symmetrize",
    "steiner_row_order",
    "speed_condition_bound",
]

CELLS_PER_EPS = 6


class AdmissibilityError(ValueError):
    pass


def speed_condition_bound(alpha: float, kappa: float) -> float:
    """Smallest travel speed for which the one-height potential is unimodal: (2-alpha)_+^2 kappa/(32 pi)."""
    return max(2.0 - alpha, 0.0) ** 2 * kappa / (32.0 * math.pi)


@dataclass
class Params:
    W: float
    kappa: float
    eps: float
    lambda_cap: float
    model: ModelFunctions
    D_bounds: tuple[float, float, float, float]
    grid: GridSpec
    mass_tol: float = 1e-8
    fixedpoint_tol: float = 1e-9
    bisection_tol: float = 1e-12
    max_iter: int = 400
    _mask: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not (self.W > 0 and self.kappa > 0 and self.eps > 0):
            raise ValueError("W, kappa and eps must be positive")
        floor = max(1.0, self.model.f_jump)
        if not self.lambda_cap > floor:
            raise ValueError(f"lambda_cap must exceed max(1, f(0+)) = {floor:g}")
        x1lo, x1hi, x2lo, x2hi = self.D_bounds
        if not (x1lo < x1hi and 0 <= x2lo < x2hi):
            raise ValueError(f"bad working box {self.D_bounds}")
        g = self.grid
        if not (g.x1_min < x1lo and x1hi < g.x1_max and g.x2_min <= x2lo and x2hi < g.x2_max):
            raise ValueError("working box must lie strictly inside the grid")

    @property
    def cap(self) -> float:
        """Pointwise bound Lambda / eps^2 on the vorticity."""
        return self.lambda_cap / self.eps**2

    @property
    def domain_mask(self) -> np.ndarray:
        """Cells whose centre lies in the open box D."""
        if self._mask is None:
            x1lo, x1hi, x2lo, x2hi = self.D_bounds
            X1, X2 = self.grid.mesh()
            self._mask = (X1 > x1lo) & (X1 < x1hi) & (X2 > x2lo) & (X2 < x2hi)
        return self._mask

    @property
    def heights(self) -> np.ndarray:
        """x2 at cell centres, shape (n2, 1) for broadcasting."""
        return self.grid.x2[:, None]

    def with_lambda(self, lambda_cap: float) -> "Params":
        return Params(self.W, self.kappa, self.eps, lambda_cap, self.model, self.D_bounds,
                      self.grid, self.mass_tol, self.fixedpoint_tol, self.bisection_tol,
                      self.max_iter)

    def with_eps(self, eps: float, cells_per_eps: float = CELLS_PER_EPS) -> "Params":
        return make_params(self.model, self.W, self.kappa, eps, self.lambda_cap,
                           self.D_bounds, cells_per_eps=cells_per_eps,
                           mass_tol=self.mass_tol, fixedpoint_tol=self.fixedpoint_tol,
                           bisection_tol=self.bisection_tol, max_iter=self.max_iter)

    def summary(self) -> dict:
        return {"W": self.W, "kappa": self.kappa, "eps": self.eps,
                "lambda_cap": self.lambda_cap, "D_bounds": list(self.D_bounds),
                "grid": self.grid.header(), "model": self.model.spec(),
                "mass_tol": self.mass_tol, "fixedpoint_tol": self.fixedpoint_tol,
                "bisection_tol": self.bisection_tol, "max_iter": self.max_iter}


def make_params(model: ModelFunctions, W: float, kappa: float, eps: float, lambda_cap: float,
                D_bounds, *, cells_per_eps: float = CELLS_PER_EPS, grid_n: int | None = None,
                margin: int = 3, **tols) -> Params:
    """Params with a grid of spacing eps/cells_per_eps (or 2/grid_n) covering D."""
    x1lo, x1hi, x2lo, x2hi = map(float, D_bounds)
    h = (x1hi - x1lo) / grid_n if grid_n else eps / cells_per_eps
    grid = GridSpec.covering(x1lo, x1hi, x2lo, x2hi, h, margin=margin)
    fac = model.factorized()
    if fac is not None and model.cf > 0 and model.cg > 0:
        alpha = model.cg / model.cf
        if W < speed_condition_bound(alpha, kappa):
            warnings.warn("travel speed below (2-alpha)_+^2 kappa/(32 pi); the limiting height"
                          " may not be the unique minimizer", stacklevel=2)
    return Params(W, kappa, eps, lambda_cap, model, (x1lo, x1hi, x2lo, x2hi), grid, **tols)


@dataclass(frozen=True)
class EnergyReport:
    kinetic: float
    transport: float
    penalty: float
    total: float

    @classmethod
    def from_terms(cls, kinetic, transport, penalty):
        return cls(kinetic, transport, penalty, kinetic - transport - penalty)

    def as_dict(self) -> dict:
        return {"kinetic": self.kinetic, "transport": self.transport,
                "penalty": self.penalty, "total": self.total}


def _cells(mask, limit=5):
    idx = np.argwhere(mask)
    shown = ", ".join(f"(row {r}, col {c})" for r, c in idx[:limit])
    more = f" and {len(idx) - limit} more" if len(idx) > limit else ""
    return shown + more


def check_admissible(zeta: VorticityField, p: Params, *, rel_tol: float = 1e-12) -> None:
    if zeta.grid != p.grid:
        raise AdmissibilityError("field grid differs from the parameter grid")
    z = zeta.data
    if not np.all(np.isfinite(z)):
        raise AdmissibilityError(f"non-finite values at {_cells(~np.isfinite(z))}")
    neg = z < 0
    if np.any(neg):
        raise AdmissibilityError(f"negative vorticity at {_cells(neg)}")
    over = z > p.cap * (1.0 + rel_tol)
    if np.any(over):
        raise AdmissibilityError(f"vorticity above Lambda/eps^2 at {_cells(over)}")
    outside = (z > 0) & ~p.domain_mask
    if np.any(outside):
        raise AdmissibilityError(f"support leaves D at {_cells(outside)}")


def energy_eval(zeta: VorticityField, p: Params, *, stream: np.ndarray | None = None,
                check: bool = True) -> EnergyReport:
    """kinetic - W int x2 zeta - eps^-2 int J(x2, eps^2 zeta), midpoint rule on cells."""
    if check:
        check_admissible(zeta, p)
    if stream is None:
        stream = apply_green_operator(zeta)
    area = zeta.cell_area
    kinetic = quadratic_form(zeta, stream)
    transport = p.W * area * float(np.sum(p.heights * zeta.data))
    rows, cols = np.nonzero(zeta.data)
    if rows.size:
        x2 = p.grid.x2[rows]
        vals = conjugate_value(p.model, x2, p.eps**2 * zeta.data[rows, cols])
        penalty = area / p.eps**2 * float(np.sum(vals))
    else:
        penalty = 0.0
    return EnergyReport.from_terms(kinetic, transport, penalty)


def steiner_row_order(n: int) -> np.ndarray:
    """Column positions to receive a row's values sorted in decreasing order.

    Odd n: centre, then left/right pairs outward. Even n: the two central
    columns (left first), then pairs outward.
    """
    c = n // 2
    order = []
    if n % 2:
        order.append(c)
        for k in range(1, c + 1):
            order += [c - k, c + k]
    else:
        for k in range(1, c + 1):
            order += [c - k, c + k - 1]
    return np.asarray(order, dtype=int)


def steiner_symmetrize(zeta: VorticityField) -> VorticityField:
    """Rowwise symmetric-decreasing rearrangement about x1 = 0 (ties go left)."""
    if not zeta.grid.x1_symmetric:
        raise ValueError("Steiner symmetrization needs a grid symmetric about x1 = 0")
    z = zeta.data
    order = steiner_row_order(z.shape[1])
    out = np.empty_like(z)
    out[:, order] = -np.sort(-z, axis=1, kind="stable")
    return VorticityField(zeta.grid, out)
