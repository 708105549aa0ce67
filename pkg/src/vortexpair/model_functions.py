"""Vorticity/density nonlinearities, their primitives and Legendre conjugates.

The vortex profile function is ``i(x2, t) = cf*f(t) + x2*cg*g(t)`` with
primitive ``I(x2, t)`` and the modified conjugate

    J(x2, s) = sup_t [s*t - I(x2, t)]   (s >= 0),   J(x2, s) = 0   (s < 0).

Power laws ``s_+^p`` carry closed forms; arbitrary callables go through
adaptive quadrature and monotone bisection.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

__all__ = [
    "Nonlinearity",
    "PowerLaw",
    "ZeroNonlinearity",
    "CustomNonlinearity",
    "ModelFunctions",
    "ConjugateEval",
    "HypothesisResult",
    "HypothesisReport",
    "ModelError",
    "eval_i",
    "eval_I",
    "conjugate_J",
    "conjugate_slope",
    "conjugate_value",
    "validate_hypotheses",
    "nonlinearity_from_spec",
]

BISECTION_TOL = 1e-12
_BISECTION_ITERS = 200


class ModelError(ValueError):
    """Invalid model specification or a numerically unsupported request."""


def _check_finite(t):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ModelError("non-finite argument passed to a model function")
    return arr


class Nonlinearity:
    """A nonnegative, nondecreasing scalar function vanishing for t <= 0."""

    name = "nonlinearity"

    def __call__(self, t):
        raise NotImplementedError

    def primitive(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    @property
    def jump_at_zero(self) -> float:
        """Right limit f(0+)."""
        return float(self(np.array(0.0) + 1e-300))

    @property
    def sup_value(self) -> float:
        return math.inf

    def inverse(self, s):
        """Smallest t >= 0 with f(t) >= s (0 when s <= f(0+))."""
        return _bisect_inverse(lambda t: self(t), np.asarray(s, dtype=float))

    def conjugate(self, s):
        """Return (J_f(s), dJ_f/ds) for the conjugate of the primitive."""
        s = np.asarray(s, dtype=float)
        t = self.inverse(np.maximum(s, 0.0))
        finite = np.isfinite(t)
        tf = np.where(finite, t, 0.0)
        val = np.where(finite, np.maximum(s * tf - self.primitive(tf), 0.0), np.inf)
        val = np.where(s > 0, val, 0.0)
        slope = np.where(s > 0, t, 0.0)
        over = s > self.sup_value
        if np.any(over):
            val = np.where(over, np.inf, val)
            slope = np.where(over, np.inf, slope)
        return val, slope

    def spec(self) -> dict:
        return {"family": self.name}


class ZeroNonlinearity(Nonlinearity):
    name = "zero"

    def __call__(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def primitive(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    @property
    def jump_at_zero(self) -> float:
        return 0.0

    @property
    def sup_value(self) -> float:
        return 0.0

    def inverse(self, s):
        s = np.asarray(s, dtype=float)
        return np.where(s > 0, np.inf, 0.0)

    def __eq__(self, other):
        return isinstance(other, ZeroNonlinearity)

    def __hash__(self):
        return hash("zero")

    def __repr__(self):
        return "ZeroNonlinearity()"


class PowerLaw(Nonlinearity):
    """f(t) = t_+^p with p >= 0; p = 0 is the Heaviside step."""

    name = "power"

    def __init__(self, p: float):
        if not p >= 0 or not math.isfinite(p):
            raise ModelError(f"power-law exponent must be finite and >= 0, got {p}")
        self.p = float(p)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        tp = np.maximum(t, 0.0)
        if self.p == 0.0:
            return (t > 0).astype(float)
        return tp**self.p

    def primitive(self, t):
        tp = np.maximum(np.asarray(t, dtype=float), 0.0)
        return tp ** (self.p + 1.0) / (self.p + 1.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        if self.p == 0.0:
            return np.zeros_like(t)
        with np.errstate(divide="ignore"):
            return np.where(t > 0, self.p * np.maximum(t, 0.0) ** (self.p - 1.0), 0.0)

    @property
    def jump_at_zero(self) -> float:
        return 1.0 if self.p == 0.0 else 0.0

    @property
    def sup_value(self) -> float:
        return 1.0 if self.p == 0.0 else math.inf

    def inverse(self, s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        if self.p == 0.0:
            return np.where(s > 1.0, np.inf, 0.0)
        return s ** (1.0 / self.p)

    def conjugate(self, s):
        s = np.asarray(s, dtype=float)
        sp = np.maximum(s, 0.0)
        if self.p == 0.0:
            val = np.where(s > 1.0, np.inf, 0.0)
            return val, np.where(s > 1.0, np.inf, 0.0)
        q = 1.0 / self.p
        val = self.p / (self.p + 1.0) * sp ** (1.0 + q)
        return val, sp**q

    def spec(self) -> dict:
        return {"family": "power", "p": self.p}

    def __eq__(self, other):
        return isinstance(other, PowerLaw) and other.p == self.p

    def __hash__(self):
        return hash(("power", self.p))

    def __repr__(self):
        return f"PowerLaw(p={self.p:g})"


class CustomNonlinearity(Nonlinearity):
    """User-supplied callable; the primitive is computed by adaptive quadrature.

    ``func`` must accept scalars. Values for t <= 0 are forced to zero, so the
    callable only has to be meaningful on t > 0.
    """

    name = "custom"

    def __init__(self, func: Callable[[float], float], label: str = "custom",
                 primitive: Callable[[float], float] | None = None,
                 quad_tol: float = 1e-12):
        self.func = func
        self.label = label
        self._primitive = primitive
        self.quad_tol = quad_tol

    def _scalar(self, t: float) -> float:
        return float(self.func(t)) if t > 0 else 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.vectorize(self._scalar, otypes=[float])(t)

    def _prim_scalar(self, t: float) -> float:
        if t <= 0:
            return 0.0
        if self._primitive is not None:
            return float(self._primitive(t))
        val, err = integrate.quad(self._scalar, 0.0, t, epsabs=0.0,
                                  epsrel=self.quad_tol, limit=200)
        if err > max(1e-8 * abs(val), 1e-13):
            raise ModelError(
                f"quadrature for primitive of {self.label} at t={t:g} did not "
                f"converge (achieved error estimate {err:.3g})")
        return val

    def primitive(self, t):
        t = np.asarray(t, dtype=float)
        return np.vectorize(self._prim_scalar, otypes=[float])(t)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        step = 1e-6 * np.maximum(np.abs(t), 1e-3)
        lo = np.maximum(t - step, 0.0)
        return (self(t + step) - self(lo)) / (t + step - lo)

    def spec(self) -> dict:
        return {"family": "custom", "label": self.label}

    def __repr__(self):
        return f"CustomNonlinearity({self.label!r})"


def nonlinearity_from_spec(family: str, p: float | None = None) -> Nonlinearity:
    """Build a named family: ``power`` (needs p), ``heaviside``/``step``, ``zero``."""
    family = family.strip().lower()
    if family in ("power", "pow", "s+^p"):
        if p is None:
            raise ModelError("power family requires an exponent p")
        return PowerLaw(p)
    if family in ("linear", "s+"):
        return PowerLaw(1.0)
    if family in ("heaviside", "step"):
        return PowerLaw(0.0)
    if family in ("zero", "none", "0"):
        return ZeroNonlinearity()
    raise ModelError(f"unknown nonlinearity family {family!r}")


def _bisect_inverse(func, s, tol=BISECTION_TOL):
    """Vectorized smallest t >= 0 with func(t) >= s for nondecreasing func."""
    s = np.asarray(s, dtype=float)
    lo = np.zeros_like(s)
    hi = np.ones_like(s)
    # grow the bracket geometrically until func(hi) >= s
    for _ in range(80):
        short = func(hi) < s
        if not np.any(short):
            break
        hi = np.where(short, hi * 4.0, hi)
    unbracketed = func(hi) < s
    for _ in range(_BISECTION_ITERS):
        mid = 0.5 * (lo + hi)
        up = func(mid) >= s
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= tol * np.maximum(1.0, hi)):
            break
    t = np.where(s <= 0, 0.0, hi)
    return np.where(unbracketed, np.inf, t)


@dataclass(frozen=True)
class ModelFunctions:
    """The pair (f, g) with coefficients: i(x2, t) = cf*f(t) + x2*cg*g(t)."""

    f: Nonlinearity
    g: Nonlinearity = field(default_factory=ZeroNonlinearity)
    cf: float = 1.0
    cg: float = 0.0

    def __post_init__(self):
        if self.cf < 0 or self.cg < 0:
            raise ModelError("coefficients cf, cg must be nonnegative")
        if self.cf == 0 and self.cg == 0:
            raise ModelError("cf and cg cannot both vanish")

    @property
    def family_tag(self) -> str:
        parts = []
        if self.cf > 0:
            parts.append(f"f={self.f!r}")
        if self.cg > 0:
            parts.append(f"g={self.g!r}")
        return ",".join(parts)

    @property
    def f_jump(self) -> float:
        """cf*f(0+), the lower edge of the nonzero range of i(x2, .)."""
        return self.cf * self.f.jump_at_zero if self.cf > 0 else 0.0

    def factorized(self):
        """Return (h, weight(x2)) when i(x2, t) = weight(x2)*h(t), else None."""
        f_on = self.cf > 0 and not isinstance(self.f, ZeroNonlinearity)
        g_on = self.cg > 0 and not isinstance(self.g, ZeroNonlinearity)
        if f_on and g_on:
            if self.f == self.g:
                return self.f, lambda x2: self.cf + x2 * self.cg
            return None
        if f_on:
            return self.f, lambda x2: self.cf + 0.0 * np.asarray(x2, dtype=float)
        if g_on:
            return self.g, lambda x2: self.cg * np.asarray(x2, dtype=float)
        return None

    def with_coefficients(self, cf=None, cg=None) -> "ModelFunctions":
        return ModelFunctions(self.f, self.g, self.cf if cf is None else cf,
                              self.cg if cg is None else cg)

    def spec(self) -> dict:
        return {"f": self.f.spec(), "g": self.g.spec(), "cf": self.cf, "cg": self.cg}


def eval_i(m: ModelFunctions, x2, t):
    """i(x2, t) = cf*f(t) + x2*cg*g(t); zero for t <= 0."""
    x2 = np.asarray(x2, dtype=float)
    t = _check_finite(t)
    if np.any(x2 <= 0):
        raise ModelError("x2 must be positive")
    out = np.zeros(np.broadcast(x2, t).shape)
    if m.cf > 0:
        out = out + m.cf * m.f(t)
    if m.cg > 0:
        out = out + x2 * m.cg * m.g(t)
    return np.where(t > 0, out, 0.0)


def eval_I(m: ModelFunctions, x2, t):
    """I(x2, t) = cf*F(t) + x2*cg*G(t); zero for t <= 0."""
    x2 = np.asarray(x2, dtype=float)
    t = _check_finite(t)
    if np.any(x2 <= 0):
        raise ModelError("x2 must be positive")
    out = np.zeros(np.broadcast(x2, t).shape)
    if m.cf > 0:
        out = out + m.cf * m.f.primitive(t)
    if m.cg > 0:
        out = out + x2 * m.cg * m.g.primitive(t)
    return np.where(t > 0, out, 0.0)


@dataclass(frozen=True)
class ConjugateEval:
    value: float
    slope: float
    argmax_t: float

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


def _conjugate_arrays(m: ModelFunctions, x2, s):
    x2 = np.asarray(x2, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(x2 <= 0):
        raise ModelError("x2 must be positive")
    x2, s = np.broadcast_arrays(x2, s)
    fac = m.factorized()
    if fac is not None:
        h, weight = fac
        w = weight(x2)
        val, slope = h.conjugate(s / w)
        val = np.where(s > 0, w * val, 0.0)
        slope = np.where(s > 0, slope, 0.0)
        return val, slope
    t = _bisect_inverse(lambda tt: eval_i(m, x2, tt), np.maximum(s, 0.0))
    # linear segment below the jump of f at zero: the sup sits at t = 0
    t = np.where(s <= m.f_jump, 0.0, t)
    finite = np.isfinite(t)
    tf = np.where(finite, t, 0.0)
    val = np.where(finite, np.maximum(s * tf - eval_I(m, x2, tf), 0.0), np.inf)
    val = np.where(s > 0, val, 0.0)
    slope = np.where(s > 0, t, 0.0)
    return val, slope


def conjugate_value(m: ModelFunctions, x2, s):
    """Vectorized J(x2, s)."""
    return _conjugate_arrays(m, x2, s)[0]


def conjugate_slope(m: ModelFunctions, x2, s):
    """Vectorized dJ/ds(x2, s), i.e. the inverse of i(x2, .) at s."""
    return _conjugate_arrays(m, x2, s)[1]


def conjugate_J(m: ModelFunctions, x2: float, s: float) -> ConjugateEval:
    """Scalar conjugate with its slope; +inf when s exceeds the range of i."""
    if not math.isfinite(s):
        raise ModelError("non-finite s")
    val, slope = _conjugate_arrays(m, float(x2), float(s))
    val, slope = float(val), float(slope)
    return ConjugateEval(value=val, slope=slope, argmax_t=slope)


@dataclass
class HypothesisResult:
    name: str
    passed: bool
    message: str
    witness: dict = field(default_factory=dict)


@dataclass
class HypothesisReport:
    results: dict
    probe: dict

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.results.values())

    def __getitem__(self, key) -> HypothesisResult:
        return self.results[key]

    def lines(self) -> list[str]:
        out = [f"probe: {self.probe}"]
        for r in self.results.values():
            out.append(f"{r.name}: {'pass' if r.passed else 'FAIL'} - {r.message}")
        return out


def validate_hypotheses(m: ModelFunctions, d: float, *, t_max: float = 50.0,
                        n_t: int = 400, n_x2: int = 12,
                        taus=(0.05, 0.1, 0.5, 1.0),
                        growth_horizon: float = 200.0) -> HypothesisReport:
    """Check (H1)-(H4) numerically on a finite probe grid.

    Passing means "no counterexample on the probe", not a proof; the probe
    ranges are returned in the report.
    """
    if not d > 0:
        raise ModelError("d must be positive")
    if n_t < 2 or n_x2 < 1:
        raise ModelError("probe grid is empty")
    t_pos = np.geomspace(1e-3, t_max, n_t)
    t_all = np.concatenate([-t_pos[::-1], [0.0], t_pos])
    x2s = np.linspace(d / n_x2, d, n_x2)
    probe = {"t_range": (float(-t_max), float(t_max)), "n_t": n_t,
             "x2_range": (float(x2s[0]), float(d)), "n_x2": n_x2,
             "taus": tuple(taus), "growth_horizon": growth_horizon}
    results = {}

    # (H1)
    bad = []
    for name, nl, coef in (("f", m.f, m.cf), ("g", m.g, m.cg)):
        if coef == 0:
            continue
        vals = nl(t_all)
        if np.any(vals < 0):
            bad.append(f"{name} negative at t={t_all[np.argmax(vals < 0)]:g}")
        dv = np.diff(vals)
        if np.any(dv < -1e-14 * np.maximum(1.0, np.abs(vals[1:]))):
            k = int(np.argmax(dv < 0))
            bad.append(f"{name} decreasing near t={t_all[k]:g}")
    results["H1"] = HypothesisResult("H1", not bad, "; ".join(bad) or
                                     "nonnegative and nondecreasing on probe")

    # (H2)
    bad = []
    witness = {}
    for x2 in x2s:
        neg = eval_i(m, x2, t_all[t_all <= 0])
        if np.any(neg != 0):
            bad.append(f"i(x2={x2:g}, t<=0) nonzero")
            break
        iv = eval_i(m, x2, t_pos)
        dv = np.diff(iv)
        flat = dv <= 0
        if iv[0] <= 0 or np.any(flat):
            k = int(np.argmax(flat)) if np.any(flat) else 0
            witness = {"x2": float(x2), "t": float(t_pos[k])}
            bad.append(f"i(x2={x2:g}, .) not strictly increasing near t={t_pos[k]:g}")
            break
    msg = "; ".join(bad)
    if witness:
        msg += " - step-function nonlinearities are rejected"
    results["H2"] = HypothesisResult("H2", not bad, msg or
                                     "vanishes for t<=0, strictly increasing on probe",
                                     witness)

    # (H3): delta0 from the large-t tail of I/(i*t), then the smallest delta1
    X2, T = np.meshgrid(x2s, t_pos, indexing="ij")
    iv = eval_i(m, X2, T)
    Iv = eval_I(m, X2, T)
    if not np.all(iv > 0):
        results["H3"] = HypothesisResult("H3", False, "i vanishes on part of the probe")
    else:
        tail = T >= 0.5 * t_max
        ratio = float(np.max(Iv[tail] / (iv[tail] * T[tail])))
        d0 = ratio + 1e-3 * (1.0 - ratio)
        need = (Iv - d0 * iv * T) / iv
        d1 = max(float(np.max(need)), 0.0) + 1e-12
        ok = ratio < 1.0 - 1e-9 and math.isfinite(d1)
        msg = (f"feasible with delta0={d0:.6g}, delta1={d1:.3g}" if ok else
               f"tail ratio I/(i t) = {ratio:.6g} leaves no delta0 < 1")
        results["H3"] = HypothesisResult("H3", ok, msg, {"delta0": d0, "delta1": d1})

    # (H4): secant log-growth rate of i at a long horizon
    T1, T2 = 0.5 * growth_horizon, growth_horizon
    rates = []
    for x2 in (x2s[0], x2s[-1]):
        with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
            a = float(eval_i(m, x2, T1))
            b = float(eval_i(m, x2, T2))
            rate = (math.log(b) - math.log(a)) / (T2 - T1) if a > 0 and b > 0 \
                and math.isfinite(b) else math.inf
        rates.append(rate)
    rate = max(rates)
    failing = [tau for tau in taus if not rate < tau]
    with np.errstate(over="ignore", invalid="ignore"):
        decay = {tau: float(eval_i(m, d, t_max) * math.exp(-tau * t_max)) for tau in taus}
    results["H4"] = HypothesisResult(
        "H4", not failing,
        f"log-growth rate {rate:.4g} on [{T1:g}, {T2:g}]" +
        (f"; fails for tau in {failing}" if failing else "; below every probed tau"),
        {"growth_rate": rate, "i_exp_decay_at_t_max": decay})
    return HypothesisReport(results, probe)
