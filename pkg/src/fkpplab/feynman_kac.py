"""Monte Carlo evaluation of the Feynman-Kac representation of w.

The mutant field solves

    w(t,x) = E[ w(0, B_t) exp( int_0^t c(t-s, B_s) ds ) ],
    c(tau, xi) = 1 - beta_t - (1-gamma_t) omega(xi + a - sqrt(2) tau)
                 - gamma_t w(tau, xi),

with B a Brownian motion from x.  Conditioning on the endpoint y = B_t turns
the path into x(t-s)/t + y s/t + z(s) with z a 0-0 bridge.  Since
w(0,y) = (1 - beta_t/gamma_t) 1_{y<=0}, the endpoint integral is restricted
to y <= 0; we sample y from the exact truncated Gaussian (inverse-CDF on the
scaled uniform) and carry the analytic weight Phi(-x/sqrt(t)) instead of
letting the indicator discard nearly all samples — at a front-region point
x/sqrt(t) is 3-5 and plain rejection would keep a handful of paths out of
10^5.  The estimator is unbiased either way; this is the importance-exact
form of the same integral.

The full estimator needs w itself inside the exponent; a WLookup wraps a
stored PDE trajectory for that (the fixed-point check of the representation).
The upper estimator drops the -gamma_t w term; the lower estimator replaces
the omega coefficient by 1 (valid since w <= omega).  Time integrals use the
midpoint rule on the bridge grid (bridge values linearly interpolated to the
midpoint).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, RescalingError
from .model import ScaledParams
from .pde_solver import FieldHistory
from .travelling_wave import WaveProfile, evaluate as wave_evaluate
from .bridge_lab import _bridge_block, _block_size
from . import streams

SQRT2 = math.sqrt(2.0)

DEFAULT_N_PATHS = 100_000
DEFAULT_N_STEPS = 2_000


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int


# ---------------------------------------------------------------------------
# stored-trajectory lookup
# ---------------------------------------------------------------------------

class WLookup:
    """w(tau, xi) from stored solver snapshots, bilinear in (tau, xi).

    Beyond the stored window the field continues with its Dirichlet regime:
    the stable value on the left, 0 on the right (np.interp's edge fill is
    exactly that, since snapshots carry those boundary values).
    """

    def __init__(self, history: FieldHistory, w_cap: float):
        if len(history.times) < 2:
            raise DomainError("need at least two snapshots for interpolation")
        self._times = history.times
        self._offsets = history.offsets
        self._xw = history.x_window
        self._w = history.w
        self._cap = w_cap

    @property
    def t_max(self) -> float:
        return float(self._times[-1])

    def at(self, tau: float, xi) -> np.ndarray:
        """w(tau, xi) for scalar tau and array-like xi, clipped to [0, cap]."""
        if tau < self._times[0] - 1e-9 or tau > self.t_max + 1e-9:
            raise DomainError(
                f"tau={tau} outside stored range [{self._times[0]}, {self.t_max}]")
        xi = np.asarray(xi, dtype=np.float64)
        j = int(np.searchsorted(self._times, tau, side="right")) - 1
        j = min(max(j, 0), len(self._times) - 2)
        t0, t1 = self._times[j], self._times[j + 1]
        frac = (tau - t0) / (t1 - t0)
        frac = min(max(frac, 0.0), 1.0)
        wa = np.interp(xi, self._xw + self._offsets[j], self._w[j])
        wb = np.interp(xi, self._xw + self._offsets[j + 1], self._w[j + 1])
        return np.clip((1.0 - frac) * wa + frac * wb, 0.0, self._cap)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------

def _fk_core(t: float, x: float, s: ScaledParams, wave: WaveProfile,
             wlook: WLookup | None, a: float, n_paths: int, n_steps: int,
             seed: int, mode: str) -> McEstimate:
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    if (1.0 - s.beta_t) * t > 700.0:
        raise RescalingError(
            f"(1-beta_t)*t = {(1.0 - s.beta_t) * t:.1f} overflows the weight; "
            "rescale or work in the log domain")
    if mode == "full":
        if wlook is None:
            raise DomainError("full estimator needs a stored w trajectory")
        if wlook.t_max < t - 1e-9:
            raise DomainError(
                f"stored trajectory covers [0, {wlook.t_max}], need [0, {t}]")

    cap = s.w_ceiling
    phi_x = float(ndtr(-x / math.sqrt(t)))
    if phi_x == 0.0:
        return McEstimate(0.0, 0.0, n_paths, seed)

    grid = np.linspace(0.0, t, n_steps + 1)
    h = t / n_steps
    mid = 0.5 * (grid[:-1] + grid[1:])
    tau_mid = t - mid
    shift = a - SQRT2 * tau_mid
    coef = 1.0 if mode == "lower" else (1.0 - s.gamma_t)

    total = 0.0
    total_sq = 0.0
    block = _block_size(n_steps)
    for start in range(0, n_paths, block):
        size = min(block, n_paths - start)
        rng = streams.block_rng(seed, start)
        u = 1.0 - rng.random(size)  # in (0, 1], keeps ndtri finite
        y = x + math.sqrt(t) * ndtri(u * phi_x)
        z = _bridge_block(t, n_steps, rng, size)

        acc = np.zeros(size)
        for i in range(n_steps):
            xi = x * (tau_mid[i] / t) + y * (mid[i] / t) \
                + 0.5 * (z[:, i] + z[:, i + 1])
            val = (1.0 - s.beta_t) - coef * wave_evaluate(wave, xi + shift[i])
            if mode == "full":
                val = val - s.gamma_t * wlook.at(tau_mid[i], xi)
            acc += val
        weights = cap * phi_x * np.exp(h * acc)
        total += float(weights.sum())
        total_sq += float((weights * weights).sum())

    mean = total / n_paths
    var = max(0.0, (total_sq - n_paths * mean * mean) / max(n_paths - 1, 1))
    return McEstimate(mean, math.sqrt(var / n_paths), n_paths, seed)


def fk_estimate(t: float, x: float, s: ScaledParams, wave: WaveProfile,
                wlook: WLookup, a: float = 0.0,
                n_paths: int = DEFAULT_N_PATHS,
                n_steps: int = DEFAULT_N_STEPS, seed: int = 0) -> McEstimate:
    """Estimate w(t,x) through the full representation (fixed-point check)."""
    return _fk_core(t, x, s, wave, wlook, a, n_paths, n_steps, seed, "full")


def fk_upper_estimate(t: float, x: float, s: ScaledParams, wave: WaveProfile,
                      a: float = 0.0, n_paths: int = DEFAULT_N_PATHS,
                      n_steps: int = DEFAULT_N_STEPS,
                      seed: int = 0) -> McEstimate:
    """Guaranteed over-estimate: the -gamma_t w term is dropped."""
    return _fk_core(t, x, s, wave, None, a, n_paths, n_steps, seed, "upper")


def fk_lower_estimate(t: float, x: float, s: ScaledParams, wave: WaveProfile,
                      a: float = 0.0, n_paths: int = DEFAULT_N_PATHS,
                      n_steps: int = DEFAULT_N_STEPS,
                      seed: int = 0) -> McEstimate:
    """Guaranteed under-estimate: omega with coefficient 1 (since w <= omega)."""
    return _fk_core(t, x, s, wave, None, a, n_paths, n_steps, seed, "lower")


# ---------------------------------------------------------------------------
# closed-form bounds
# ---------------------------------------------------------------------------

def crude_bounds(t: float, x, s: ScaledParams) -> tuple[float, float]:
    """Gaussian-convolution bounds for Heaviside data; x may be an array.

    lower = (1 - beta_t/gamma_t) Phi(-x/sqrt(t)); upper = lower e^{(1-beta_t)t}.
    The upper bound is informative only where it undercuts the field bound.
    """
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    lower = s.w_ceiling * ndtr(-np.asarray(x, dtype=np.float64) / math.sqrt(t))
    if lower.ndim == 0:
        lower = float(lower)
    return lower, lower * math.exp((1.0 - s.beta_t) * t)


def crude_tail_bounds(t: float, x: float, s: ScaledParams) -> tuple[float, float]:
    """Far-field form of the crude bounds for x >> sqrt(t) (leading order).

    w/(1-beta_t/gamma_t) is between sqrt(t/2pi) e^{-x^2/2t}/x (up to a
    1 - O(t/x^2) correction dropped here) and the same times e^{(1-beta_t)t}.
    """
    if t <= 0 or x <= 0:
        raise DomainError(f"need t > 0 and x > 0, got t={t}, x={x}")
    base = s.w_ceiling * math.sqrt(t / (2.0 * math.pi)) \
        * math.exp(-x * x / (2.0 * t)) / x
    return base, base * math.exp((1.0 - s.beta_t) * t)
