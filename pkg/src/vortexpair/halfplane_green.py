"""Dirichlet Green function of the upper half-plane and its discrete operator.

Fields are piecewise constant on a uniform grid of square cells. The discrete
operator is the Galerkin one: entry (i, j) is the double cell average of
G(x, y) over cell i x cell j, so ``h^2 * sum(z * Gz) / 2`` is the exact
kinetic energy of the piecewise-constant field. The half-plane is handled
with an image field; both convolutions run through zero-padded FFTs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sfft

__all__ = [
    "GridSpec",
    "VorticityField",
    "VelocityField",
    "GridError",
    "green_value",
    "cell_log_average",
    "apply_green_operator",
    "green_pairing",
    "quadratic_form",
    "velocity_from_vorticity",
    "dump_field",
    "load_field",
    "SELF_CELL_LOG_MEAN",
]

TWO_PI = 2.0 * math.pi
# mean of ln|x - y| for x, y uniform in the unit square; equals
# -25/12 + pi/3 + ln(2)/3, recomputed by quadrature in the test-suite
SELF_CELL_LOG_MEAN = -25.0 / 12.0 + math.pi / 3.0 + math.log(2.0) / 3.0

_NEAR = 6  # Chebyshev offset (in cells) up to which the closed form is used


class GridError(ValueError):
    pass


def green_value(x, y) -> float:
    """G(x, y) = (1/2pi) log(|xbar - y| / |x - y|) with xbar = (x1, -x2)."""
    x1, x2 = float(x[0]), float(x[1])
    y1, y2 = float(y[0]), float(y[1])
    if x2 < 0 or y2 < 0:
        raise ValueError("points must lie in the closed upper half-plane")
    if x2 == 0.0 or y2 == 0.0:
        return 0.0
    d = math.hypot(x1 - y1, x2 - y2)
    if d == 0.0:
        raise ValueError("Green function is singular at x = y")
    return math.log(math.hypot(x1 - y1, x2 + y2) / d) / TWO_PI


def _phi(x, y):
    """Fourth antiderivative: d^2/dx^2 d^2/dy^2 phi = ln(x^2 + y^2)."""
    x = np.abs(x)
    y = np.abs(y)
    r2 = x * x + y * y
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(r2 > 0, np.log(np.where(r2 > 0, r2, 1.0)), 0.0)
        return (-(x**4 - 6.0 * x * x * y * y + y**4) * lg / 24.0
                - 25.0 * x * x * y * y / 24.0
                + (x**3 * y * np.arctan2(y, x) + x * y**3 * np.arctan2(x, y)) / 3.0)


_TENT = (1.0, -2.0, 1.0)


def cell_log_average(a, b):
    """Mean of ln|u - v| over u in the unit cell at offset (a, b) and v in the unit cell at 0.

    Offsets are in cell units and may be non-integer. Near offsets use the
    closed form; far ones the expansion ln r + Re(z^-4)/120 - Re(z^-8)/360
    (only cos(4k theta) terms survive the square's symmetry).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a, b = np.broadcast_arrays(a, b)
    out = np.empty(a.shape)
    near = np.maximum(np.abs(a), np.abs(b)) <= _NEAR
    if np.any(near):
        an, bn = a[near], b[near]
        acc = np.zeros(an.shape)
        for i, ci in enumerate(_TENT):
            for j, cj in enumerate(_TENT):
                acc += ci * cj * _phi(an + (i - 1), bn + (j - 1))
        out[near] = 0.5 * acc
    far = ~near
    if np.any(far):
        z = a[far] + 1j * b[far]
        z4 = z**-4
        out[far] = np.log(np.abs(z)) + z4.real / 120.0 - (z4 * z4).real / 360.0
    return out


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of square cells; array index order is [x2-row, x1-column]."""

    x1_min: float
    x1_max: float
    x2_min: float
    x2_max: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise GridError("cell counts must be positive")
        if self.x2_min < 0:
            raise GridError("grid must lie in the closed upper half-plane")
        h1 = (self.x1_max - self.x1_min) / self.n1
        h2 = (self.x2_max - self.x2_min) / self.n2
        if not h1 > 0 or abs(h1 - h2) > 1e-9 * h1:
            raise GridError(f"cells must be square (h1={h1!r}, h2={h2!r})")

    @property
    def h(self) -> float:
        return (self.x1_max - self.x1_min) / self.n1

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n2, self.n1)

    @property
    def x1(self) -> np.ndarray:
        return self.x1_min + (np.arange(self.n1) + 0.5) * self.h

    @property
    def x2(self) -> np.ndarray:
        return self.x2_min + (np.arange(self.n2) + 0.5) * self.h

    def mesh(self):
        """Cell-center coordinates (X1, X2), each of shape (n2, n1)."""
        return np.meshgrid(self.x1, self.x2)

    @property
    def x1_symmetric(self) -> bool:
        return abs(self.x1_min + self.x1_max) <= 1e-9 * self.h

    @classmethod
    def covering(cls, x1_lo, x1_hi, x2_lo, x2_hi, h, margin=2):
        """Smallest x1-symmetric grid of spacing h containing the box plus margin cells."""
        half = max(abs(x1_lo), abs(x1_hi))
        m1 = int(math.ceil(half / h - 1e-9)) + margin
        j_lo = max(int(math.floor(x2_lo / h + 1e-9)) - margin, 0)
        j_hi = int(math.ceil(x2_hi / h - 1e-9)) + margin
        return cls(-m1 * h, m1 * h, j_lo * h, j_hi * h, 2 * m1, j_hi - j_lo)

    def index_of(self, point) -> tuple[int, int]:
        """(row, column) of the cell containing the point."""
        j1 = int(math.floor((point[0] - self.x1_min) / self.h))
        j2 = int(math.floor((point[1] - self.x2_min) / self.h))
        if not (0 <= j1 < self.n1 and 0 <= j2 < self.n2):
            raise GridError(f"point {tuple(point)} lies outside the grid")
        return j2, j1

    def header(self) -> dict:
        return {"x1_min": self.x1_min, "x1_max": self.x1_max, "x2_min": self.x2_min,
                "x2_max": self.x2_max, "n1": self.n1, "n2": self.n2, "h": self.h}


@dataclass
class VorticityField:
    """Nonnegative cell values of the vorticity on a GridSpec."""

    grid: GridSpec
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.shape != self.grid.shape:
            raise GridError(f"data shape {self.data.shape} != grid shape {self.grid.shape}")

    @classmethod
    def zeros(cls, grid: GridSpec) -> "VorticityField":
        return cls(grid, np.zeros(grid.shape))

    @property
    def cell_area(self) -> float:
        return self.grid.h**2

    @property
    def mass(self) -> float:
        return float(self.cell_area * self.data.sum())

    @property
    def centroid(self) -> tuple[float, float]:
        m = self.data.sum()
        if m == 0:
            return (math.nan, math.nan)
        X1, X2 = self.grid.mesh()
        return (float((X1 * self.data).sum() / m), float((X2 * self.data).sum() / m))

    @property
    def support(self) -> np.ndarray:
        return self.data > 0

    def support_diameter(self) -> float:
        """Largest distance between centers of supported cells (plus one cell)."""
        rows, cols = np.nonzero(self.support)
        if rows.size == 0:
            return 0.0
        pts = np.column_stack([self.grid.x1[cols], self.grid.x2[rows]])
        # diameter is attained on the convex hull; boundary cells per row suffice
        keep = np.zeros(rows.size, dtype=bool)
        for r in np.unique(rows):
            idx = np.nonzero(rows == r)[0]
            keep[idx[np.argmin(cols[idx])]] = True
            keep[idx[np.argmax(cols[idx])]] = True
        pts = pts[keep]
        diff = pts[:, None, :] - pts[None, :, :]
        return float(np.sqrt((diff**2).sum(-1)).max() + self.grid.h)

    def x1_asymmetry(self) -> float:
        """max |z(x1, x2) - z(-x1, x2)| (requires an x1-symmetric grid)."""
        if not self.grid.x1_symmetric:
            raise GridError("grid is not symmetric about x1 = 0")
        return float(np.max(np.abs(self.data - self.data[:, ::-1])))

    def copy(self) -> "VorticityField":
        return VorticityField(self.grid, self.data.copy())


@dataclass
class VelocityField:
    v1: np.ndarray
    v2: np.ndarray
    one_sided: np.ndarray = field(repr=False)


class _GreenKernel:
    """FFT-ready free-space and image kernels for one grid."""

    def __init__(self, grid: GridSpec):
        n1, n2, h = grid.n1, grid.n2, grid.h
        if n1 < 4 or n2 < 4:
            raise GridError("grid too small for padded convolution (need n1, n2 >= 4)")
        self.grid = grid
        self.p2 = sfft.next_fast_len(2 * n2 - 1, real=True)
        self.p1 = sfft.next_fast_len(2 * n1 - 1, real=True)
        d2 = np.arange(-(n2 - 1), n2)
        d1 = np.arange(-(n1 - 1), n1)
        D1, D2 = np.meshgrid(d1, d2)
        log_h = math.log(h)
        free = -(log_h + cell_log_average(D1, D2)) / TWO_PI
        # image offset in x2: (x2_i + y2_j)/h for row difference d = i - j'
        # where j' indexes the field flipped along x2
        base = 2.0 * grid.x2_min / h + n2  # (x2_i + y2_j)/h at i + j = n2 - 1
        img = -(log_h + cell_log_average(D1, D2 + base)) / TWO_PI
        self.free_hat = sfft.rfft2(self._wrap(free), workers=-1)
        self.img_hat = sfft.rfft2(self._wrap(img), workers=-1)

    def _wrap(self, k):
        n2, n1 = self.grid.n2, self.grid.n1
        out = np.zeros((self.p2, self.p1))
        r = np.arange(-(n2 - 1), n2) % self.p2
        c = np.arange(-(n1 - 1), n1) % self.p1
        out[np.ix_(r, c)] = k
        return out

    def apply(self, data: np.ndarray) -> np.ndarray:
        n2, n1 = self.grid.n2, self.grid.n1
        shape = (self.p2, self.p1)
        z_hat = sfft.rfft2(data, s=shape, workers=-1)
        zf_hat = sfft.rfft2(data[::-1, :], s=shape, workers=-1)
        out = sfft.irfft2(z_hat * self.free_hat - zf_hat * self.img_hat, s=shape,
                          workers=-1)
        return out[:n2, :n1] * grid_cell_area(self.grid)


def grid_cell_area(grid: GridSpec) -> float:
    return grid.h * grid.h


@lru_cache(maxsize=8)
def _kernel_for(grid: GridSpec) -> _GreenKernel:
    return _GreenKernel(grid)


def apply_green_operator(zeta: VorticityField) -> np.ndarray:
    """Cell averages of the stream function G*zeta on the same grid."""
    if not np.any(zeta.data):
        return np.zeros(zeta.grid.shape)
    return _kernel_for(zeta.grid).apply(zeta.data)


def green_pairing(a: VorticityField, b: VorticityField) -> float:
    """h^2 * sum(a * G b)."""
    if a.grid != b.grid:
        raise GridError("fields live on different grids")
    return float(a.cell_area * np.sum(a.data * apply_green_operator(b)))


def quadratic_form(zeta: VorticityField, stream: np.ndarray | None = None) -> float:
    """Kinetic energy 0.5 * h^2 * sum(zeta * G zeta)."""
    if stream is None:
        stream = apply_green_operator(zeta)
    return 0.5 * zeta.cell_area * float(np.sum(zeta.data * stream))


def velocity_from_vorticity(zeta: VorticityField) -> VelocityField:
    """v = (d psi/dx2, -d psi/dx1) with psi = G zeta.

    Central differences inside, one-sided on the outer ring of cells (flagged
    in ``one_sided``).
    """
    psi = apply_green_operator(zeta)
    h = zeta.grid.h
    d_dx2, d_dx1 = np.gradient(psi, h, h, edge_order=1)
    flag = np.zeros(psi.shape, dtype=bool)
    flag[0, :] = flag[-1, :] = flag[:, 0] = flag[:, -1] = True
    return VelocityField(v1=d_dx2, v2=-d_dx1, one_sided=flag)


def dump_field(path, grid: GridSpec, data: np.ndarray, name: str = "field") -> None:
    """Text dump: '#'-header with the grid, then rows (fixed x2) of 17-digit values."""
    data = np.asarray(data, dtype=float)
    if data.shape != grid.shape:
        raise GridError("data does not match grid")
    with open(path, "w") as fh:
        fh.write(f"# name {name}\n")
        for k, v in grid.header().items():
            fh.write(f"# {k} {v!r}\n")
        np.savetxt(fh, data, fmt="%.17g")


def load_field(path):
    """Inverse of dump_field; returns (grid, data, name)."""
    meta = {}
    with open(path) as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            _, key, val = line.split(None, 2)
            meta[key] = val.strip()
    grid = GridSpec(float(meta["x1_min"]), float(meta["x1_max"]),
                    float(meta["x2_min"]), float(meta["x2_max"]),
                    int(meta["n1"]), int(meta["n2"]))
    data = np.loadtxt(path, comments="#", ndmin=2)
    return grid, data.reshape(grid.shape), meta.get("name", "field")
