"""Parameters, rescaling, fixpoints, and the discretised field state.

The biological model carries rates (alpha, beta, gamma) and a carrying
capacity K; after rescaling only the dimensionless pair (gamma_t, beta_t)
remains.  Everything downstream (solver, Monte Carlo, speed theory) works in
the rescaled variables.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConstraintError

CFL_MAX_DEFAULT = 0.25


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PhysicalParams:
    """Biological rates; admissible iff alpha > gamma > beta/K >= 0."""

    alpha: float
    beta: float
    gamma: float
    carrying_capacity: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ConstraintError(f"alpha must be positive, got {self.alpha}")
        if self.carrying_capacity <= 0:
            raise ConstraintError(
                f"carrying capacity must be positive, got {self.carrying_capacity}"
            )
        if self.beta < 0:
            raise ConstraintError(f"beta must be nonnegative, got {self.beta}")
        if not self.gamma > self.beta / self.carrying_capacity:
            raise ConstraintError(
                "admissibility needs gamma > beta/K; got "
                f"gamma={self.gamma}, beta/K={self.beta / self.carrying_capacity}"
            )
        if not self.alpha > self.gamma:
            raise ConstraintError(
                f"admissibility needs alpha > gamma; got alpha={self.alpha}, gamma={self.gamma}"
            )


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless pair with 1 > gamma_t > beta_t > 0."""

    gamma_t: float
    beta_t: float

    def __post_init__(self):
        if not (0.0 < self.beta_t < self.gamma_t < 1.0):
            raise ConstraintError(
                f"need 1 > gamma_t > beta_t > 0, got gamma_t={self.gamma_t}, beta_t={self.beta_t}"
            )
        if self.gamma_t - self.beta_t < 1e-9:
            warnings.warn(
                "beta_t is within 1e-9 of gamma_t: the stable w-mass "
                f"1 - beta_t/gamma_t = {1.0 - self.beta_t / self.gamma_t:.3e} degenerates",
                RuntimeWarning,
                stacklevel=2,
            )

    @property
    def w_ceiling(self) -> float:
        """Upper a-priori bound for w, the stable coexistence mass 1 - beta_t/gamma_t."""
        return 1.0 - self.beta_t / self.gamma_t


def rescale(p: PhysicalParams) -> ScaledParams:
    """Eliminate alpha and K: gamma_t = gamma/alpha, beta_t = beta/(alpha*K).

    beta is divided by alpha first so that pre-dividing the rates by alpha
    and rescaling with alpha=1 gives bitwise-identical results.
    """
    return ScaledParams(
        gamma_t=p.gamma / p.alpha,
        beta_t=p.beta / p.alpha / p.carrying_capacity,
    )


# ---------------------------------------------------------------------------
# fixpoints
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Fixpoint:
    v_val: float
    w_val: float
    label: str      # extinct | unphysical | resident_only | coexistence
    stability: str  # stable | unstable | unphysical


def fixpoints(s: ScaledParams) -> tuple[Fixpoint, Fixpoint, Fixpoint, Fixpoint]:
    """The four spatially constant states of the coupled system.

    (0, (1-beta_t)/gamma_t) solves the equations but has w above total mass,
    hence is flagged unphysical.
    """
    return (
        Fixpoint(0.0, 0.0, "extinct", "unstable"),
        Fixpoint(0.0, (1.0 - s.beta_t) / s.gamma_t, "unphysical", "unphysical"),
        Fixpoint(1.0, 0.0, "resident_only", "unstable"),
        Fixpoint(1.0, s.w_ceiling, "coexistence", "stable"),
    )


def reaction_rhs(v, w, s: ScaledParams):
    """Pointwise reaction terms of the coupled system (no diffusion).

    Returns (v*(1-v), (1-beta_t-(1-gamma_t)*v-gamma_t*w)*w); used by the
    fixpoint tests and the solver kernel alike.
    """
    fv = v * (1.0 - v)
    fw = (1.0 - s.beta_t - (1.0 - s.gamma_t) * v - s.gamma_t * w) * w
    return fv, fw


# ---------------------------------------------------------------------------
# grid and field state
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid plus the explicit time step.

    dt is derived from the CFL number (cfl = dt/dx^2) unless given; the
    explicit scheme needs cfl <= cfl_max.
    """

    x_left: float
    dx: float
    n_cells: int
    cfl: float = CFL_MAX_DEFAULT
    cfl_max: float = CFL_MAX_DEFAULT

    def __post_init__(self):
        if self.dx <= 0:
            raise ConstraintError(f"dx must be positive, got {self.dx}")
        if self.n_cells < 3:
            raise ConstraintError(f"need at least 3 cells, got {self.n_cells}")
        if self.cfl <= 0 or self.cfl > self.cfl_max:
            raise ConstraintError(
                f"cfl={self.cfl} outside (0, {self.cfl_max}] for the explicit scheme"
            )

    @property
    def dt(self) -> float:
        return self.cfl * self.dx * self.dx

    @property
    def x_right(self) -> float:
        return self.x_left + (self.n_cells - 1) * self.dx

    def positions(self, window_offset: float = 0.0) -> np.ndarray:
        """Fixed-frame cell coordinates for a window shifted by window_offset."""
        return self.x_left + window_offset + self.dx * np.arange(self.n_cells)

    @classmethod
    def centered(cls, window_len: float, dx: float, x_left: float | None = None,
                 cfl: float = CFL_MAX_DEFAULT) -> "Grid":
        """Window of given length; by default 3/8 of it lies left of x = 0.

        The asymmetric split leaves a long run-out ahead of the fronts while
        keeping the left boundary far behind the initial interface.
        """
        n = int(round(window_len / dx)) + 1
        if x_left is None:
            x_left = -0.375 * window_len
        return cls(x_left=x_left, dx=dx, n_cells=n, cfl=cfl)


@dataclass
class FieldState:
    """Discretised (v, w) on the current window.

    window_offset is the fixed-frame displacement of the window: cell i sits
    at grid.x_left + window_offset + i*dx.
    """

    grid: Grid
    v: np.ndarray
    w: np.ndarray
    time: float
    params: ScaledParams
    window_offset: float = 0.0
    clamp_events: int = 0
    step_index: int = 0
    v_frozen: bool = field(default=False)

    def positions(self) -> np.ndarray:
        return self.grid.positions(self.window_offset)

    def check_bounds(self, atol: float = 0.0):
        """Assert the a-priori bounds 0 <= v <= 1 and 0 <= w <= 1 - beta_t/gamma_t."""
        wmax = self.params.w_ceiling
        if self.v.min() < -atol or self.v.max() > 1.0 + atol:
            raise ConstraintError(
                f"v outside [0,1]: min={self.v.min():.3e}, max={self.v.max():.3e}"
            )
        if self.w.min() < -atol or self.w.max() > wmax + atol:
            raise ConstraintError(
                f"w outside [0,{wmax:.6f}]: min={self.w.min():.3e}, max={self.w.max():.3e}"
            )


def initial_state(grid: Grid, s: ScaledParams, wave, a: float = 0.0,
                  v_init: str = "wave") -> FieldState:
    """Initial condition v(0,x) = omega(x+a), w(0,x) = (1-beta_t/gamma_t)*1_{x<=0}.

    v_init = "heaviside" replaces the wave with v(0,x) = 1_{x<=0} (steep data,
    used to measure the logarithmic front delay of the scalar equation).
    x = 0 must be strictly inside the window.
    """
    xs = grid.positions(0.0)
    if not (xs[0] < 0.0 < xs[-1]):
        raise ConfigError(
            f"grid [{xs[0]}, {xs[-1]}] does not strictly contain x=0"
        )
    if v_init == "wave":
        from .travelling_wave import evaluate
        v = evaluate(wave, xs + a)
    elif v_init == "heaviside":
        v = (xs <= 0.0).astype(np.float64)
    else:
        raise ConfigError(f"unknown v_init {v_init!r} (expected 'wave' or 'heaviside')")
    w = np.where(xs <= 0.0, s.w_ceiling, 0.0)
    return FieldState(grid=grid, v=np.ascontiguousarray(v),
                      w=np.ascontiguousarray(w), time=0.0, params=s)
