import math
import time

import pytest

from vortexpair.energy import make_params
from vortexpair.maximizer import run_maximizer
from vortexpair.model_functions import ModelFunctions, PowerLaw, ZeroNonlinearity

LIN = PowerLaw(1)
SWEEP_EPS = (0.08, 0.057, 0.04, 0.028, 0.02)


def second_params(eps, lam=10.0, **kw):
    """f = s+, g = 0, kappa = 1, W = 1/(4 pi): limit height 1."""
    return make_params(ModelFunctions(LIN, ZeroNonlinearity(), 1.0, 0.0), 1 / (4 * math.pi), 1.0,
                       eps, lam, (-1, 1, 0.5, 2.0), **kw)


def first_params(eps, **kw):
    """g = f = s+, alpha = 1, kappa = 4 pi, W = 1."""
    r = (-1 + math.sqrt(17)) / 4
    return make_params(ModelFunctions(LIN, LIN, 1.0, 1.0), 1.0, 4 * math.pi, eps, 10.0,
                       (-1, 1, r / 2, 2 * r), **kw)


@pytest.fixture(scope="session")
def solved_second():
    """Converged solutions at eps = 0.08 and 0.04 with their energy traces."""
    out = {}
    for eps in (0.08, 0.04):
        p = second_params(eps)
        trace = []
        sol = run_maximizer(p, (0, 1.0), anderson_depth=3,
                            callback=lambda it, s, change, resid: trace.append(s.energy.total))
        out[eps] = (p, sol, trace)
    return out


def third_params(eps, c1=0.55, box=None, **kw):
    """f switched off, g = s+, kappa = 1, W = 1/(8 pi): reference height 1."""
    box = box or (-1, 1, c1, 1 / c1)
    return make_params(ModelFunctions(ZeroNonlinearity(), LIN, 0.0, 1.0), 1 / (8 * math.pi), 1.0,
                       eps, 10.0, box, **kw)


HALVING_EPS = (0.08, 0.04, 0.02)


def _chain(make, center):
    out = {}
    for eps in HALVING_EPS:
        p = make(eps)
        out[eps] = (p, run_maximizer(p, center, anderson_depth=3))
    return out


@pytest.fixture(scope="session")
def second_sweep():
    from vortexpair.asymptotics import epsilon_sweep

    p = second_params(SWEEP_EPS[0])
    start = time.perf_counter()
    rep = epsilon_sweep(p, SWEEP_EPS, (0, 1.0), keep_solutions=True)
    return p, rep, time.perf_counter() - start


@pytest.fixture(scope="session")
def first_chain():
    return _chain(first_params, (0, (-1 + math.sqrt(17)) / 4))


@pytest.fixture(scope="session")
def third_chain():
    return _chain(third_params, (0, 1.0))


# acceptance verdict lines, echoed again at the end of the run
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in VERDICTS:
            terminalreporter.write_line(line)
