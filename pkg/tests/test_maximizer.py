import math

import numpy as np
import pytest

from conftest import first_params, second_params
from vortexpair.energy import energy_eval, make_params
from vortexpair.halfplane_green import VorticityField, apply_green_operator, load_field
from vortexpair.maximizer import (
    MaximizerError,
    Solution,
    density_field,
    euler_lagrange_residual,
    export_solution,
    initialize_field,
    iterate_once,
    run_maximizer,
    solve_multiplier,
)


def seed_state(p, center=(0, 1.0)):
    z = initialize_field(p, center)
    stream = apply_green_operator(z)
    mu, _ = solve_multiplier(stream - p.W * p.heights, p)
    return Solution(zeta=z, psi=stream - p.W * p.heights - mu, mu=mu,
                    energy=energy_eval(z, p, stream=stream), stream=stream)


# ---------------------------------------------------------------- seed

def test_initial_disc():
    p = second_params(0.05)
    z = initialize_field(p, (0, 1.0))
    assert z.mass == pytest.approx(1.0, rel=1e-12)
    assert z.data.max() <= p.cap
    assert z.x1_asymmetry() == 0.0
    with pytest.raises(MaximizerError, match="not inside D"):
        initialize_field(p, (0, 0.52))
    with pytest.raises(MaximizerError):
        run_maximizer(p)


# ---------------------------------------------------------------- multiplier

def test_nonpositive_stream_gives_zero_field():
    p = second_params(0.08)
    mu, z = solve_multiplier(-np.ones(p.grid.shape), p)
    assert mu == 0.0 and not np.any(z.data)


def test_multiplier_linear_case_against_scan():
    p = second_params(0.08)
    s = seed_state(p)
    u = s.stream - p.W * p.heights
    mu, z = solve_multiplier(u, p)
    assert abs(z.mass - p.kappa) <= p.mass_tol * p.kappa
    # independent dense scan of the closed-form mass curve
    ud = u[p.domain_mask]
    mus = np.linspace(0, ud.max(), 4001)
    masses = np.array([p.grid.h**2 * np.sum(np.minimum(p.cap, np.maximum(ud - m, 0) / p.eps**2))
                       for m in mus])
    alive = masses > 0
    assert np.all(np.diff(masses[alive]) < 0)
    k = np.nonzero(masses <= p.kappa)[0][0]
    assert mus[k - 1] <= mu <= mus[k]


def test_multiplier_zero_when_mass_is_short():
    p = second_params(0.08)
    u = np.where(p.domain_mask, 1e-6, 0.0)
    mu, z = solve_multiplier(u, p)
    assert mu == 0.0 and 0 < z.mass < p.kappa


# ---------------------------------------------------------------- iteration

def test_first_step_increases_energy_and_stays_admissible():
    p = second_params(0.05)
    s0 = seed_state(p)
    s1 = iterate_once(s0, p)
    assert s1.energy.total > s0.energy.total
    energy_eval(s1.zeta, p)  # raises if inadmissible
    assert abs(s1.zeta.mass - p.kappa) <= p.mass_tol * p.kappa


def test_seed_residual_is_order_one():
    p = second_params(0.05)
    assert euler_lagrange_residual(seed_state(p), p) > 0.05


def test_vacuous_residual():
    p = second_params(0.08)
    z = VorticityField.zeros(p.grid)
    s = Solution(zeta=z, psi=-p.W * p.heights - 1.0, mu=1.0,
                 energy=energy_eval(z, p), stream=np.zeros(p.grid.shape))
    assert euler_lagrange_residual(s, p) == 0.0


def test_fixed_point_is_reproduced(solved_second):
    p, sol, _ = solved_second[0.04]
    again = iterate_once(sol, p)
    change = np.max(np.abs(again.zeta.data - sol.zeta.data)) / np.max(sol.zeta.data)
    assert change < 10 * p.fixedpoint_tol


@pytest.mark.parametrize("eps", [0.08, 0.04])
def test_converged_invariants(solved_second, eps):
    p, sol, trace = solved_second[eps]
    assert sol.converged
    assert sol.patch_measure == 0.0 and sol.lambda_doublings == 0
    assert abs(sol.mass - p.kappa) <= p.mass_tol * p.kappa
    assert sol.el_residual < 10 * p.fixedpoint_tol
    assert sol.zeta.x1_asymmetry() <= 1e-10 * sol.zeta.data.max()
    assert np.all(np.diff(trace) >= -1e-9)
    assert sol.energy.total >= max(trace) - 1e-9
    assert sol.mu > 0


def test_doubling_the_cap_changes_nothing(solved_second):
    p, sol, _ = solved_second[0.04]
    doubled = run_maximizer(p.with_lambda(2 * p.lambda_cap), (0, 1.0), anderson_depth=3)
    assert doubled.converged and doubled.patch_measure == 0
    assert np.max(np.abs(doubled.zeta.data - sol.zeta.data)) < 1e-8


def test_support_shrinks_with_core_scale(solved_second):
    d08 = solved_second[0.08][1].zeta.support_diameter()
    d04 = solved_second[0.04][1].zeta.support_diameter()
    assert d04 / d08 == pytest.approx(0.5, rel=0.2)


def test_multiplier_grows_as_core_shrinks(solved_second):
    assert solved_second[0.04][1].mu > solved_second[0.08][1].mu


def test_iteration_cap_flags_nonconvergence():
    p = second_params(0.08, max_iter=3)
    sol = run_maximizer(p, (0, 1.0))
    assert not sol.converged
    assert sol.iterations == 3


def test_patch_triggers_lambda_doubling():
    # kappa = 10 puts the limiting peak of eps^2 zeta near 1.27, above a cap of 1.0001
    base = second_params(0.08)
    p = make_params(base.model, 10 / (4 * math.pi), 10.0, 0.08, 1.0001, base.D_bounds)
    sol = run_maximizer(p, (0, 1.0), anderson_depth=3)
    assert sol.converged
    assert sol.lambda_doublings >= 1
    assert sol.lambda_cap == pytest.approx(1.0001 * 2**sol.lambda_doublings)
    assert sol.patch_measure == 0.0 or sol.lambda_doublings == 6


# ---------------------------------------------------------------- density

def test_density_vanishes_without_g(solved_second):
    p, sol, _ = solved_second[0.08]
    assert not np.any(density_field(sol, p))


def test_density_sign_and_support():
    p = first_params(0.08)
    sol = run_maximizer(p, (0, 1.0), anderson_depth=3)
    eta = density_field(sol, p)
    assert np.all(eta <= 0)
    assert np.array_equal(eta < 0, sol.zeta.data > 0)


def test_export_bundle(tmp_path, solved_second):
    p, sol, _ = solved_second[0.08]
    summary = export_solution(tmp_path, sol, p)
    for name in ("zeta", "psi", "eta"):
        grid, data, label = load_field(tmp_path / f"{name}.txt")
        assert grid == p.grid and label == name
    _, zeta, _ = load_field(tmp_path / "zeta.txt")
    assert np.array_equal(zeta, sol.zeta.data)
    text = (tmp_path / "summary.txt").read_text()
    for key in ("mu", "el_residual", "patch_measure", "centroid_x2", "support_diameter"):
        assert f"{key} = " in text
    assert summary["mu"] == sol.mu
    assert math.isfinite(summary["energy_total"])
