"""Shared fixtures: the relaxed wave profile and the handful of long PDE runs
that several test modules (and the acceptance suite) fit speeds from."""
import numpy as np
import pytest

from fkpplab.model import Grid, ScaledParams
from fkpplab import pde_solver


def _grid():
    return Grid.centered(window_len=400.0, dx=0.05)


@pytest.fixture(scope="session")
def wave():
    return pde_solver.default_wave()


@pytest.fixture(scope="session")
def coupled_run_a(wave):
    """(gamma_t, beta_t) = (0.75, 0.1), t = 200, with fixed-frame probes for
    the tip-growth check."""
    s = ScaledParams(gamma_t=0.75, beta_t=0.1)
    return pde_solver.run(
        s, _grid(), t_end=200.0, wave=wave,
        probe_x=(80.0, 100.0, 120.0, 140.0, 160.0, 180.0),
    )


@pytest.fixture(scope="session")
def flat_run_a(wave):
    s = ScaledParams(gamma_t=0.75, beta_t=0.1)
    return pde_solver.run_flat_background(s, _grid(), t_end=200.0)


@pytest.fixture(scope="session")
def coupled_run_b(wave):
    s = ScaledParams(gamma_t=0.75, beta_t=0.6)
    return pde_solver.run(s, _grid(), t_end=200.0, wave=wave)


@pytest.fixture(scope="session")
def flat_run_b():
    s = ScaledParams(gamma_t=0.75, beta_t=0.6)
    return pde_solver.run_flat_background(s, _grid(), t_end=200.0)


@pytest.fixture(scope="session")
def flat_run_c():
    s = ScaledParams(gamma_t=0.96, beta_t=0.2)
    return pde_solver.run_flat_background(s, _grid(), t_end=200.0)


@pytest.fixture(scope="session")
def heaviside_run_a(wave):
    """Steep v data, used for the logarithmic front-delay fit."""
    s = ScaledParams(gamma_t=0.75, beta_t=0.1)
    return pde_solver.run(s, _grid(), t_end=200.0, wave=wave, v_init="heaviside")


@pytest.fixture(scope="session")
def fk_env(wave):
    """PDE trajectory with stored fields at (0.75, 0.1), t = 10, plus the
    interpolating lookup the Feynman-Kac estimator consumes."""
    from fkpplab.feynman_kac import WLookup

    s = ScaledParams(gamma_t=0.75, beta_t=0.1)
    grid = Grid.centered(window_len=200.0, dx=0.05)
    run = pde_solver.run(s, grid, t_end=10.0, sample_dt=0.25, wave=wave,
                         keep_fields=True)
    hist = run.history
    wlook = WLookup(hist, w_cap=s.w_ceiling)

    def pde_w(t, x):
        j = int(np.argmin(np.abs(hist.times - t)))
        xs = hist.x_window + hist.offsets[j]
        return float(np.interp(x, xs, hist.w[j]))

    i10 = int(np.argmin(np.abs(run.times - 10.0)))
    return {"s": s, "run": run, "wlook": wlook, "pde_w": pde_w,
            "xw10": float(run.x_front_w[i10]), "wave": wave}
