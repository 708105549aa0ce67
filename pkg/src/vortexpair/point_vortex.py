"""Point-vortex dynamics in the plane.

    dX_i/dt = -sum_{j != i} (k_j / 2 pi) (X_i - X_j)^perp / |X_i - X_j|^2,  (a, b)^perp = (b, -a)

With this sign a pair +k at (0, r), -k at (0, -r) travels in +e1 at k/(4 pi r).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PointVortexState",
    "Trajectory",
    "PairCheck",
    "SingularityError",
    "pv_velocity",
    "pv_integrate",
    "traveling_pair_check",
    "corotating_order",
    "write_trajectory_csv",
]

MIN_DISTANCE = 1e-12


class SingularityError(ValueError):
    pass


@dataclass
class PointVortexState:
    positions: np.ndarray
    strengths: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 2)
        self.strengths = np.array(self.strengths, dtype=float).ravel()
        if len(self.positions) != len(self.strengths):
            raise ValueError("positions and strengths differ in length")

    @property
    def n(self) -> int:
        return len(self.strengths)

    def min_distance(self) -> float:
        if self.n < 2:
            return math.inf
        d = self.positions[:, None, :] - self.positions[None, :, :]
        r = np.hypot(d[..., 0], d[..., 1])
        r[np.diag_indices(self.n)] = math.inf
        return float(r.min())


def _rhs(pos: np.ndarray, k: np.ndarray) -> np.ndarray:
    d = pos[:, None, :] - pos[None, :, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    np.fill_diagonal(r2, np.inf)
    if np.any(r2 < MIN_DISTANCE**2):
        raise SingularityError("coincident vortices")
    w = k[None, :] / (2 * math.pi * r2)
    # perp of d is (d2, -d1)
    v1 = -np.sum(w * d[..., 1], axis=1)
    v2 = np.sum(w * d[..., 0], axis=1)
    return np.column_stack([v1, v2])


def pv_velocity(s: PointVortexState) -> np.ndarray:
    """Velocity of every vortex, shape (N, 2)."""
    return _rhs(s.positions, s.strengths)


@dataclass
class Trajectory:
    times: np.ndarray
    positions: np.ndarray  # (n_records, N, 2)
    strengths: np.ndarray
    aborted: bool = False
    message: str = ""
    separation_drift: float = 0.0

    @property
    def final(self) -> PointVortexState:
        return PointVortexState(self.positions[-1], self.strengths, float(self.times[-1]))


def pv_integrate(s: PointVortexState, dt: float, n: int, *, record_every: int = 1) -> Trajectory:
    """Classical fixed-step RK4; aborts (partial trajectory) if vortices come within 10 dt |v|."""
    k = s.strengths
    x = s.positions.copy()
    t = s.time
    times, recs = [t], [x.copy()]
    d0 = s.min_distance()
    aborted, msg = False, ""
    for step in range(1, n + 1):
        k1 = _rhs(x, k)
        # checked before stepping: a too-coarse step can fling the vortices apart
        speed = float(np.max(np.hypot(k1[:, 0], k1[:, 1]))) if len(k) else 0.0
        if PointVortexState(x, k, t).min_distance() < 10 * dt * speed:
            aborted, msg = True, f"near collision at t={t:.6g}"
            break
        k2 = _rhs(x + 0.5 * dt * k1, k)
        k3 = _rhs(x + 0.5 * dt * k2, k)
        k4 = _rhs(x + dt * k3, k)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = s.time + step * dt
        if step % record_every == 0 or step == n:
            times.append(t)
            recs.append(x.copy())
    if aborted and times[-1] != t:
        times.append(t)
        recs.append(x.copy())
    traj = Trajectory(np.asarray(times), np.asarray(recs), k.copy(), aborted, msg)
    if s.n >= 2:
        traj.separation_drift = abs(traj.final.min_distance() - d0)
    return traj


@dataclass(frozen=True)
class PairCheck:
    kappa: float
    r: float
    measured_speed: float
    expected_speed: float
    x2_drift: float

    @property
    def rel_error(self) -> float:
        return abs(self.measured_speed - self.expected_speed) / self.expected_speed


def traveling_pair_check(kappa: float, r: float, *, dt: float = 1e-3, duration: float = 1.0) -> PairCheck:
    """Integrate +kappa at (0, r), -kappa at (0, -r) and return the mean horizontal speed."""
    n = int(round(duration / dt))
    s = PointVortexState([[0.0, r], [0.0, -r]], [kappa, -kappa])
    traj = pv_integrate(s, dt, n, record_every=n)
    end = traj.positions[-1]
    speed = float(end[0, 0]) / (traj.times[-1] - traj.times[0])
    drift = float(np.max(np.abs(traj.positions[:, :, 1] - s.positions[None, :, 1])))
    return PairCheck(kappa, r, speed, kappa / (4 * math.pi * r), drift)


def corotating_order(kappa: float = 4 * math.pi, radius: float = 1.0, duration: float = 1.0,
                     dt: float = 0.02) -> float:
    """Observed order of accuracy from dt and dt/2 on a same-sign pair.

    Two equal positive vortices at distance 2a circle their midpoint
    counterclockwise with angular speed k/(4 pi a^2).
    """
    omega = kappa / (4 * math.pi * radius**2)

    def error(step):
        n = int(round(duration / step))
        s = PointVortexState([[radius, 0.0], [-radius, 0.0]], [kappa, kappa])
        end = pv_integrate(s, step, n, record_every=n).positions[-1]
        th = omega * n * step
        exact = np.array([[radius * math.cos(th), radius * math.sin(th)],
                          [-radius * math.cos(th), -radius * math.sin(th)]])
        return float(np.max(np.abs(end - exact)))

    e1, e2 = error(dt), error(dt / 2)
    return math.log2(e1 / e2)


def write_trajectory_csv(path, traj: Trajectory) -> None:
    """Columns: time, then x1_i, x2_i for each vortex i (1-based)."""
    n = traj.positions.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["time"] + [f"{c}_{i + 1}" for i in range(n) for c in ("x1", "x2")])
        for t, pos in zip(traj.times, traj.positions):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in pos.ravel()])
