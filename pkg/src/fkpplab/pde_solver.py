"""Time-stepping of the coupled system on a co-moving window.

The fields live on a fixed-size window that shifts rightward (in whole cells)
whenever the leading front approaches the right edge, so arbitrarily long runs
use constant memory.  All reported positions are in the fixed frame: window
coordinate plus the accumulated window_offset.

Runs are deterministic: serial kernels, no threading, no RNG.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, FrontLostError, NumericalBlowupError
from .model import FieldState, Grid, ScaledParams, initial_state
from . import pde_kernels
from . import travelling_wave

DEFAULT_MARGIN = 60.0
SHIFT_CELLS = 20


@dataclass(frozen=True)
class FieldHistory:
    """Field snapshots at the sample cadence, for lookup interpolation."""
    times: np.ndarray     # (n_rec,)
    offsets: np.ndarray   # (n_rec,) window offsets
    x_window: np.ndarray  # (n_cells,) window coordinates (offset excluded)
    v: np.ndarray         # (n_rec, n_cells)
    w: np.ndarray


@dataclass(frozen=True)
class FrontTrack:
    times: np.ndarray
    x_front_v: np.ndarray   # NaN where the v-front is not tracked
    x_front_w: np.ndarray
    level_v: float
    level_w: float
    clamp_events: np.ndarray  # cumulative count at each sample time
    history: FieldHistory | None = None
    probe_x: np.ndarray | None = None
    probe_w: np.ndarray | None = None  # (n_rec, n_probes), fixed-frame probes

    def __post_init__(self):
        if not (len(self.times) == len(self.x_front_v) == len(self.x_front_w)):
            raise DomainError("front track arrays must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise DomainError("front track times must be strictly increasing")


# ---------------------------------------------------------------------------
# single-step and window operations
# ---------------------------------------------------------------------------

def step(state: FieldState, s: ScaledParams) -> FieldState:
    """One explicit Euler step; returns a new state, input untouched."""
    v = state.v.copy()
    w = state.w.copy()
    clamps = pde_kernels.coupled_chunk(
        v, w, s.gamma_t, s.beta_t, s.w_ceiling,
        state.grid.dt, state.grid.dx, 1, 1 if state.v_frozen else 0,
    )
    bad = pde_kernels.first_nonfinite(v, w)
    if bad >= 0:
        raise NumericalBlowupError(
            f"non-finite field value at cell {bad}",
            step_index=state.step_index,
        )
    return replace(
        state, v=v, w=w,
        time=state.time + state.grid.dt,
        clamp_events=state.clamp_events + clamps,
        step_index=state.step_index + 1,
    )


def front_position(field: np.ndarray, level: float, grid: Grid,
                   window_offset: float = 0.0) -> float:
    """Rightmost downward crossing of level, in the fixed frame.

    Linear interpolation between the bracketing cells.
    """
    above = field >= level
    idx = np.nonzero(above[:-1] & ~above[1:])[0]
    if idx.size == 0:
        raise FrontLostError(
            f"no crossing of level {level} in window; check window size/margin"
        )
    i = int(idx[-1])
    frac = (field[i] - level) / (field[i] - field[i + 1])
    return grid.x_left + (i + frac) * grid.dx + window_offset


def shift_window(state: FieldState, margin: float = DEFAULT_MARGIN,
                 k: int = SHIFT_CELLS) -> FieldState:
    """Shift the window k cells rightward if the leading front is near the edge.

    The leading front is the v-front (w-front when v is frozen flat).  Cells
    dropped on the left are replaced by (0,0) cells appended on the right; the
    interior is bitwise unchanged.  No-op when the front is clear of the edge.
    """
    grid = state.grid
    field = state.w if state.v_frozen else state.v
    level = 0.5 * (field[0] + field[-1])
    front = front_position(field, level, grid, state.window_offset)
    right_edge = grid.x_right + state.window_offset
    if front < right_edge - margin:
        return state
    v = np.concatenate([state.v[k:], np.zeros(k)])
    w = np.concatenate([state.w[k:], np.zeros(k)])
    return replace(state, v=v, w=w,
                   window_offset=state.window_offset + k * grid.dx)


# ---------------------------------------------------------------------------
# full runs
# ---------------------------------------------------------------------------

_WAVE_CACHE: list[travelling_wave.WaveProfile] = []


def default_wave() -> travelling_wave.WaveProfile:
    """The shared resident-front profile (computed once per process)."""
    if not _WAVE_CACHE:
        _WAVE_CACHE.append(travelling_wave.compute_profile())
    return _WAVE_CACHE[0]


def _record(state: FieldState, levels, track, probe_x):
    times, fv, fw, clamps, probes = track
    level_v, level_w = levels
    times.append(state.time)
    if state.v_frozen:
        fv.append(np.nan)
    else:
        fv.append(front_position(state.v, level_v, state.grid, state.window_offset))
    fw.append(front_position(state.w, level_w, state.grid, state.window_offset))
    clamps.append(state.clamp_events)
    if probe_x is not None:
        xw = state.grid.positions(state.window_offset)
        probes.append(np.interp(probe_x, xw, state.w,
                                left=state.w[0], right=state.w[-1]))


def _run_loop(state: FieldState, s: ScaledParams, t_end: float,
              sample_dt: float, margin: float, shift_cells: int,
              keep_fields: bool, probe_x) -> FrontTrack:
    grid = state.grid
    dt = grid.dt
    n_sub = int(round(sample_dt / dt))
    if n_sub < 1:
        raise DomainError(f"sample_dt {sample_dt} is below one time step {dt}")
    n_samples = int(round(t_end / sample_dt))

    level_v = 0.5
    level_w = 0.5 * s.w_ceiling
    track = ([], [], [], [], [])
    hist_t, hist_off, hist_v, hist_w = [], [], [], []

    def snap(st: FieldState):
        hist_t.append(st.time)
        hist_off.append(st.window_offset)
        hist_v.append(st.v.copy())
        hist_w.append(st.w.copy())

    _record(state, (level_v, level_w), track, probe_x)
    if keep_fields:
        snap(state)
    freeze = 1 if state.v_frozen else 0
    for kk in range(1, n_samples + 1):
        v = state.v.copy()
        w = state.w.copy()
        clamps = pde_kernels.coupled_chunk(
            v, w, s.gamma_t, s.beta_t, s.w_ceiling, dt, grid.dx, n_sub, freeze,
        )
        bad = pde_kernels.first_nonfinite(v, w)
        if bad >= 0:
            # locate the offending step by replaying the chunk one step at a time
            probe = replace(state)
            step_at = state.step_index + n_sub - 1
            for j in range(n_sub):
                probe = step(probe, s)  # raises with the exact index
            raise NumericalBlowupError(
                f"non-finite field value at cell {bad}", step_index=step_at,
            )
        state = replace(
            state, v=v, w=w,
            time=(kk * n_sub) * dt,
            clamp_events=state.clamp_events + clamps,
            step_index=state.step_index + n_sub,
        )
        while True:
            shifted = shift_window(state, margin, shift_cells)
            if shifted is state:
                break
            state = shifted
        _record(state, (level_v, level_w), track, probe_x)
        if keep_fields:
            snap(state)

    times, fv, fw, clamps_l, probes = track
    history = None
    if keep_fields:
        history = FieldHistory(
            times=np.array(hist_t),
            offsets=np.array(hist_off),
            x_window=grid.positions(0.0),
            v=np.array(hist_v),
            w=np.array(hist_w),
        )
    return FrontTrack(
        times=np.array(times),
        x_front_v=np.array(fv),
        x_front_w=np.array(fw),
        level_v=level_v,
        level_w=level_w,
        clamp_events=np.array(clamps_l, dtype=np.int64),
        history=history,
        probe_x=None if probe_x is None else np.asarray(probe_x, dtype=np.float64),
        probe_w=np.array(probes) if probe_x is not None else None,
    )


def run(s: ScaledParams, grid: Grid, t_end: float, sample_dt: float = 0.5,
        a: float = 0.0, v_init: str = "wave",
        wave: travelling_wave.WaveProfile | None = None,
        margin: float = DEFAULT_MARGIN, shift_cells: int = SHIFT_CELLS,
        keep_fields: bool = False, probe_x=None) -> FrontTrack:
    """Evolve the coupled system from the standard initial data to t_end.

    v starts as the resident wave offset by a (or as a step, v_init
    "heaviside"); w starts as w_ceiling on x <= 0.  Front positions of both
    fields are recorded every sample_dt in the fixed frame.
    """
    if t_end < 0:
        raise DomainError(f"t_end must be >= 0, got {t_end}")
    if v_init == "wave" and wave is None:
        wave = default_wave()
    state = initial_state(grid, s, wave, a=a, v_init=v_init)
    return _run_loop(state, s, t_end, sample_dt, margin, shift_cells,
                     keep_fields, probe_x)


def run_flat_background(s: ScaledParams, grid: Grid, t_end: float,
                        sample_dt: float = 0.5, margin: float = DEFAULT_MARGIN,
                        shift_cells: int = SHIFT_CELLS,
                        keep_fields: bool = False, probe_x=None) -> FrontTrack:
    """Baseline with the resident field frozen at v = 1 everywhere.

    Only the w-front is tracked (x_front_v is NaN)."""
    if t_end < 0:
        raise DomainError(f"t_end must be >= 0, got {t_end}")
    x = grid.positions(0.0)
    v = np.ones(grid.n_cells, dtype=np.float64)
    w = np.where(x <= 0.0, s.w_ceiling, 0.0)
    state = FieldState(grid=grid, v=v, w=w, time=0.0, params=s, v_frozen=True)
    return _run_loop(state, s, t_end, sample_dt, margin, shift_cells,
                     keep_fields, probe_x)
