import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import optimize

from vortexpair.model_functions import (
    CustomNonlinearity,
    ModelError,
    ModelFunctions,
    PowerLaw,
    ZeroNonlinearity,
    conjugate_J,
    conjugate_slope,
    conjugate_value,
    eval_I,
    eval_i,
    nonlinearity_from_spec,
    validate_hypotheses,
)

LIN = PowerLaw(1)
SQ = PowerLaw(2)


def grid_sup_conjugate(m, x2, s, t_hi=10.0, step=1e-5):
    """Brute-force sup_t [s t - I] on a uniform grid, the conjugate oracle."""
    t = np.arange(0.0, t_hi + step, step)
    return float(np.max(s * t - eval_I(m, x2, t)))


def mixed_model():
    # f and g differ, so the general bisection path is exercised
    return ModelFunctions(SQ, LIN, 1.0, 0.5)


# ---------------------------------------------------------------- eval_i / eval_I

def test_eval_i_linear_pair():
    m = ModelFunctions(LIN, LIN, 1.0, 1.0)
    assert eval_i(m, 1.0, 2.0) == 4.0


@pytest.mark.parametrize("m", [ModelFunctions(LIN, LIN, 1, 1), mixed_model(),
                               ModelFunctions(ZeroNonlinearity(), SQ, 0, 1)])
def test_eval_i_vanishes_for_negative_argument(m):
    assert eval_i(m, 0.7, -1.0) == 0.0
    assert eval_I(m, 0.7, -1.0) == 0.0


def test_eval_i_mixed_coefficients():
    m = mixed_model()
    expected = SQ(3.0) + 2.0 * 0.5 * LIN(3.0)
    assert expected == 12.0
    assert eval_i(m, 2.0, 3.0) == pytest.approx(12.0, abs=1e-14)


def test_eval_I_values():
    assert eval_I(ModelFunctions(LIN, LIN, 1, 1), 1.0, 2.0) == 4.0
    assert eval_I(mixed_model(), 1.3, 0.0) == 0.0
    # quadrature oracle for F(t) = t^3/3
    from scipy.integrate import quad
    ref, _ = quad(lambda t: t * t, 0, 3)
    assert eval_I(ModelFunctions(SQ), 1.0, 3.0) == pytest.approx(ref, rel=1e-14)
    assert ref == pytest.approx(9.0)


def test_custom_primitive_matches_closed_form():
    cube = CustomNonlinearity(lambda t: t**3, "cube")
    ts = np.array([0.0, 0.5, 1.7, 4.0])
    assert np.allclose(cube.primitive(ts), PowerLaw(3).primitive(ts), rtol=1e-12, atol=0)


def test_non_finite_argument_rejected():
    with pytest.raises(ModelError):
        eval_i(mixed_model(), 1.0, math.nan)
    with pytest.raises(ModelError):
        conjugate_J(mixed_model(), 1.0, math.inf)


def test_coefficients_cannot_both_vanish():
    with pytest.raises(ModelError):
        ModelFunctions(LIN, LIN, 0.0, 0.0)


def test_nonlinearity_from_spec_families():
    assert nonlinearity_from_spec("power", 2) == SQ
    assert nonlinearity_from_spec("s+") == LIN
    assert nonlinearity_from_spec("heaviside").p == 0.0
    assert isinstance(nonlinearity_from_spec("zero"), ZeroNonlinearity)
    with pytest.raises(ModelError):
        nonlinearity_from_spec("power")
    with pytest.raises(ModelError):
        nonlinearity_from_spec("cosine")


# ---------------------------------------------------------------- conjugate

def test_conjugate_factorized_example():
    m = ModelFunctions(LIN, LIN, 1.0, 1.0)
    c = conjugate_J(m, 1.0, 2.0)
    oracle = grid_sup_conjugate(m, 1.0, 2.0)
    assert oracle == pytest.approx(1.0, abs=1e-9)
    assert c.value == pytest.approx(1.0, abs=1e-14)
    assert c.slope == pytest.approx(1.0, abs=1e-14)


def test_conjugate_negative_argument_is_zero():
    for m in (ModelFunctions(LIN, LIN, 1, 1), mixed_model()):
        c = conjugate_J(m, 0.4, -3.0)
        assert (c.value, c.slope) == (0.0, 0.0)


def test_conjugate_f_only():
    m = ModelFunctions(LIN)
    c = conjugate_J(m, 0.7, 1.0)
    assert grid_sup_conjugate(m, 0.7, 1.0) == pytest.approx(0.5, abs=1e-9)
    assert c.value == pytest.approx(0.5, abs=1e-14)
    assert c.slope == pytest.approx(1.0, abs=1e-14)


def test_conjugate_general_path_matches_grid_oracle():
    m = mixed_model()
    for x2, s in [(0.5, 0.3), (1.0, 2.0), (2.0, 7.5)]:
        assert conjugate_J(m, x2, s).value == pytest.approx(grid_sup_conjugate(m, x2, s), abs=1e-8)


def test_bounded_nonlinearity_gives_infinite_conjugate():
    step = ModelFunctions(PowerLaw(0.0))
    assert conjugate_J(step, 1.0, 2.0).is_infinite
    bounded = ModelFunctions(CustomNonlinearity(lambda t: 1 - math.exp(-t), "sat"))
    assert conjugate_J(bounded, 1.0, 1.5).is_infinite
    assert not conjugate_J(bounded, 1.0, 0.5).is_infinite


def test_heaviside_conjugate_linear_segment():
    # the jump at zero makes argmax 0 for s up to cf*f(0+)
    m = ModelFunctions(PowerLaw(0.0), LIN, 1.0, 1.0)
    assert m.f_jump == 1.0
    c = conjugate_J(m, 1.0, 0.8)
    assert c.value == 0.0 and c.argmax_t == 0.0


def _biconjugate(m, x2, t):
    """sup_s [s t - J(x2, s)] by bounded Brent, independent of the closed forms."""
    s_hi = 2.0 * float(eval_i(m, x2, t)) + 1.0
    res = optimize.minimize_scalar(lambda s: -(s * t - float(conjugate_value(m, x2, s))),
                                   bounds=(0.0, s_hi), method="bounded",
                                   options={"xatol": 1e-12})
    return -res.fun


@pytest.mark.parametrize("m", [ModelFunctions(LIN, LIN, 1, 1), mixed_model(),
                               ModelFunctions(ZeroNonlinearity(), PowerLaw(1.5), 0, 1)])
def test_biconjugate_recovers_primitive(m):
    for x2 in (0.3, 1.0, 2.5):
        for t in (0.2, 1.0, 3.0):
            ref = float(eval_I(m, x2, t))
            assert _biconjugate(m, x2, t) == pytest.approx(ref, rel=1e-8)


def test_reduction_identity():
    alpha = 1.7
    for p in (1.0, 2.0, 0.5):
        f = PowerLaw(p)
        m = ModelFunctions(f, f, 1.0, alpha)
        for x2 in (0.1, 0.9, 3.0):
            s = np.linspace(0, 5, 41)
            w = 1 + alpha * x2
            lhs = conjugate_value(m, x2, s)
            rhs = w * f.conjugate(s / w)[0]
            assert np.max(np.abs(lhs - rhs)) <= 1e-10


@settings(max_examples=60, deadline=None)
@given(x2=st.floats(0.05, 4.0), t=st.floats(1e-3, 20.0))
def test_slope_inverts_profile_function(x2, t):
    m = mixed_model()
    s = float(eval_i(m, x2, t))
    assert float(conjugate_slope(m, x2, s)) == pytest.approx(t, rel=1e-9, abs=1e-11)


@settings(max_examples=40, deadline=None)
@given(x2=st.floats(0.05, 4.0), s=st.floats(1e-3, 30.0), t=st.floats(0.0, 30.0))
def test_conjugate_dominates_every_linear_bound(x2, s, t):
    m = mixed_model()
    assert float(conjugate_value(m, x2, s)) >= s * t - float(eval_I(m, x2, t)) - 1e-9 * (1 + s * t)


@settings(max_examples=30, deadline=None)
@given(x2=st.floats(0.05, 4.0), cg=st.floats(0.0, 3.0))
def test_conjugate_monotone_and_convex(x2, cg):
    m = ModelFunctions(SQ, LIN, 1.0, cg)
    s = np.linspace(-1, 8, 181)
    J = conjugate_value(m, x2, s)
    assert np.all(np.diff(J) >= -1e-12)
    assert np.all(J[2:] - 2 * J[1:-1] + J[:-2] >= -1e-10)
    slope = conjugate_slope(m, x2, s)
    assert np.all(np.diff(slope) >= -1e-12)


# ---------------------------------------------------------------- hypotheses

def test_power_law_pair_passes_all_hypotheses():
    rep = validate_hypotheses(ModelFunctions(SQ, SQ, 1, 1), 2.0)
    assert rep.all_passed, rep.lines()
    # for a power law I = i t/(p+1), so delta0 sits just above 1/3
    d0 = rep["H3"].witness["delta0"]
    assert 1 / 3 < d0 < 1 / 3 + 1e-3


def test_step_function_rejected():
    rep = validate_hypotheses(ModelFunctions(PowerLaw(0.0)), 1.0)
    assert not rep["H2"].passed
    assert "step-function" in rep["H2"].message


def test_exponential_growth_fails_h4():
    expm1 = CustomNonlinearity(math.expm1, "exp-1", primitive=lambda t: math.expm1(t) - t)
    rep = validate_hypotheses(ModelFunctions(expm1), 1.0)
    assert not rep["H4"].passed
    assert rep["H1"].passed and rep["H2"].passed


def test_report_states_probe_range():
    rep = validate_hypotheses(ModelFunctions(LIN), 1.0, t_max=20.0)
    assert rep.probe["t_range"] == (-20.0, 20.0)
    assert rep.lines()[0].startswith("probe:")


def test_empty_probe_rejected():
    with pytest.raises(ModelError):
        validate_hypotheses(ModelFunctions(LIN), 1.0, n_t=1)
