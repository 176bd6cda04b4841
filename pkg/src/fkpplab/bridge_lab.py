"""Brownian-bridge excursion laws above affine barriers, exact and sampled.

Everything in here concerns a standard Brownian bridge z on [0, t] pinned to
zero at both ends, the affine barrier alpha*s + K, and three path functionals:

    T = occupation time above the barrier,
    U = occupation time below a fixed level -b,
    g = last time on or above the barrier (g = 0 when the path never is).

The exact laws (g_tail_exact, g_density, phi_occupation and their
composition) carry the analysis; the asymptotic formulas reproduce the
large-t displays they are checked against; the Monte Carlo engine verifies
both.  Sampling uses the exact sequential conditional-Gaussian bridge
construction, vectorised: the recursion

    z_{j+1} = z_j (t-s_{j+1})/(t-s_j) + sigma_j xi_j,
    sigma_j^2 = h (t-s_{j+1})/(t-s_j)

telescopes to z_j = (t-s_j) * sum_{i<j} sigma_i xi_i / (t-s_{i+1}), one cumsum
per block of paths.

Barrier hits are detected exactly: between grid points the path is a Brownian
bridge, and its probability of touching a straight line above two below-line
endpoints is exp(-2 d_i d_{i+1} / h).  Grid-only detection would bias the
crossing probability by O(sqrt(h)), which the tolerance here cannot absorb.
Occupation times, by contrast, are plain left-endpoint Riemann sums; their
O(sqrt(h)) bias is handled by refinement studies, not by interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr  # standard normal CDF, vectorised

from .errors import DomainError, RescalingError
from . import streams

SQRT2 = math.sqrt(2.0)

# cap on floats per sampled block, to bound memory at large n_steps
_BLOCK_BUDGET = 4_000_000


# ---------------------------------------------------------------------------
# path containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BridgePath:
    t_total: float
    n_steps: int
    values: np.ndarray  # n_steps + 1 positions, endpoints exactly 0

    def __post_init__(self):
        if self.values.shape != (self.n_steps + 1,):
            raise DomainError("values must have n_steps + 1 entries")
        if self.values[0] != 0.0 or self.values[-1] != 0.0:
            raise DomainError("bridge endpoints must be exactly 0")

    @property
    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_total, self.n_steps + 1)


@dataclass(frozen=True)
class LineBarrier:
    alpha: float  # slope, alpha = sqrt(2) - u in the front application
    K: float      # intercept offset

    def height(self, s) -> np.ndarray:
        return self.alpha * np.asarray(s) + self.K


@dataclass(frozen=True)
class McEstimate:
    mean: float
    std_error: float
    n_samples: int
    seed: int

    def __post_init__(self):
        if self.std_error < 0:
            raise DomainError("std_error must be nonnegative")


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def _bridge_block(t: float, n: int, rng: np.random.Generator,
                  size: int) -> np.ndarray:
    """(size, n+1) matrix of bridge paths on the uniform grid."""
    s = np.linspace(0.0, t, n + 1)
    h = t / n
    tail_next = t - s[1:n]        # t - s_{i+1}, i = 0 .. n-2
    tail_cur = t - s[0:n - 1]
    sig = np.sqrt(h * tail_next / tail_cur)
    xi = rng.standard_normal((size, n - 1))
    z = np.empty((size, n + 1))
    z[:, 0] = 0.0
    z[:, 1:n] = np.cumsum(sig / tail_next * xi, axis=1) * tail_next
    z[:, n] = 0.0
    return z


def sample_bridge(t: float, n: int, rng: np.random.Generator) -> BridgePath:
    """One bridge path from the exact conditional-Gaussian construction."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    if n < 2:
        raise DomainError(f"need n >= 2 steps, got {n}")
    values = _bridge_block(t, n, rng, 1)[0]
    return BridgePath(t_total=t, n_steps=n, values=values)


def _block_size(n_steps: int) -> int:
    return max(1, min(streams.BLOCK, _BLOCK_BUDGET // (n_steps + 1)))


def _iter_blocks(t: float, n_steps: int, n_paths: int, seed: int):
    """Yield (start, z_block) deterministically, independent of scheduling."""
    block = _block_size(n_steps)
    for start in range(0, n_paths, block):
        size = min(block, n_paths - start)
        rng = streams.block_rng(seed, start)
        yield start, _bridge_block(t, n_steps, rng, size)


# ---------------------------------------------------------------------------
# path functionals
# ---------------------------------------------------------------------------

def _occupation_above(z: np.ndarray, s: np.ndarray, h: float,
                      barrier: LineBarrier) -> np.ndarray:
    line = barrier.height(s)
    return h * np.count_nonzero(z[:, :-1] >= line[:-1], axis=1)


def _occupation_below(z: np.ndarray, h: float, b: float) -> np.ndarray:
    return h * np.count_nonzero(z[:, :-1] <= -b, axis=1)


def occupation_above_line(path: BridgePath, barrier: LineBarrier) -> float:
    """Left-endpoint Riemann sum of time spent at or above alpha*s + K."""
    h = path.t_total / path.n_steps
    return float(_occupation_above(path.values[None, :], path.times, h, barrier)[0])


def occupation_below(path: BridgePath, b: float) -> float:
    """Left-endpoint Riemann sum of time spent at or below -b."""
    if b <= 0:
        raise DomainError(f"b must be positive, got {b}")
    h = path.t_total / path.n_steps
    return float(_occupation_below(path.values[None, :], h, b)[0])


def _last_above_index(z: np.ndarray, line: np.ndarray) -> np.ndarray:
    """Per path, the largest grid index at or above the line (0 if none)."""
    above = z >= line
    idx = above * np.arange(z.shape[1])
    return idx.max(axis=1)


def last_crossing_time(path: BridgePath, barrier: LineBarrier) -> float:
    """Largest grid time with the path at or above the barrier, else 0."""
    s = path.times
    i = int(_last_above_index(path.values[None, :], barrier.height(s))[0])
    return float(s[i])


def _interval_hit_log_miss(z: np.ndarray, line: np.ndarray,
                           h: float) -> np.ndarray:
    """Per path, log P(no sub-grid barrier hit | grid values).

    Exact for an affine barrier: on each interval with both endpoints
    strictly below, the hit probability is exp(-2 d_i d_{i+1} / h).
    Intervals with an endpoint at or above the line contribute -inf
    (certain hit), which callers detect via the grid scan first.
    """
    d = line - z
    d0 = d[:, :-1]
    d1 = d[:, 1:]
    both_below = (d0 > 0.0) & (d1 > 0.0)
    p_hit = np.where(both_below, np.exp(-2.0 * d0 * d1 / h), 0.0)
    return np.log1p(-p_hit).sum(axis=1)


def _crossing_prob(z: np.ndarray, s: np.ndarray, h: float,
                   barrier: LineBarrier) -> np.ndarray:
    """Per path, exact conditional probability of touching the barrier."""
    line = barrier.height(s)
    grid_hit = (z >= line).any(axis=1)
    log_miss = _interval_hit_log_miss(z, line, h)
    p = -np.expm1(log_miss)
    p[grid_hit] = 1.0
    return p


def _sample_g_refined(z: np.ndarray, s: np.ndarray, h: float,
                      barrier: LineBarrier,
                      rng: np.random.Generator) -> np.ndarray:
    """Last time above the barrier, resolved below the grid scale.

    The grid gives the last index at or above the line; every later interval
    (both endpoints below) is tested for a sub-grid excursion with its exact
    hit probability, and the last hit interval's midpoint is returned.  The
    remaining bias is O(h) against O(sqrt(h)) for the plain grid time.
    """
    line = barrier.height(s)
    n_paths, n1 = z.shape
    d = line - z
    both_below = (d[:, :-1] > 0.0) & (d[:, 1:] > 0.0)
    p_hit = np.where(both_below, np.exp(-2.0 * d[:, :-1] * d[:, 1:] / h), 0.0)
    hits = rng.random(p_hit.shape) < p_hit

    above_any = (z >= line).any(axis=1)
    i0 = _last_above_index(z, line)
    # ignore hits in intervals before the last grid point above
    cols = np.arange(n1 - 1)
    hits &= cols[None, :] >= i0[:, None]
    any_hit = hits.any(axis=1)
    last_hit = (hits * np.arange(n1 - 1)).max(axis=1)

    g = np.zeros(n_paths)
    g[above_any] = s[i0[above_any]] + 0.5 * h
    g[any_hit] = s[last_hit[any_hit]] + 0.5 * h
    return g


def sample_g(t: float, alpha: float, K: float, n_paths: int, n_steps: int,
             seed: int, refined: bool = False) -> np.ndarray:
    """Sample of last-crossing times over n_paths bridges."""
    barrier = LineBarrier(alpha, K)
    s = np.linspace(0.0, t, n_steps + 1)
    h = t / n_steps
    out = np.empty(n_paths)
    for start, z in _iter_blocks(t, n_steps, n_paths, seed):
        size = z.shape[0]
        if refined:
            rng = streams.block_rng(seed + 1, start)
            out[start:start + size] = _sample_g_refined(
                z, s, h, barrier, rng)
        else:
            i = _last_above_index(z, barrier.height(s))
            out[start:start + size] = s[i]
    return out


def sample_occupation(t: float, alpha: float, K: float, n_paths: int,
                      n_steps: int, seed: int) -> np.ndarray:
    """Sample of occupation times above the barrier."""
    barrier = LineBarrier(alpha, K)
    s = np.linspace(0.0, t, n_steps + 1)
    h = t / n_steps
    out = np.empty(n_paths)
    for start, z in _iter_blocks(t, n_steps, n_paths, seed):
        out[start:start + z.shape[0]] = _occupation_above(z, s, h, barrier)
    return out


# ---------------------------------------------------------------------------
# exact laws
# ---------------------------------------------------------------------------

def crossing_probability_exact(t: float, alpha: float, K: float) -> float:
    """P(bridge touches alpha*s + K): exp(-2K(alpha t+K)/t) for K>0, else 1."""
    if K <= 0.0:
        return 1.0
    if alpha * t + K <= 0.0:
        raise DomainError(f"need alpha*t + K > 0, got {alpha * t + K}")
    return math.exp(-2.0 * K * (alpha * t + K) / t)


def g_tail_exact(t: float, alpha: float, K: float, q: float) -> float:
    """P(g >= q) for the last time at or above alpha*s + K."""
    if not 0.0 < q < t:
        raise DomainError(f"q must be in (0, t), got q={q}, t={t}")
    if alpha * t + K <= 0.0:
        raise DomainError(f"need alpha*t + K > 0, got {alpha * t + K}")
    root = math.sqrt(q * t * (t - q))
    term1 = math.exp(-2.0 * K * (alpha * t + K) / t) \
        * ndtr(-(alpha * t * q + K * (2.0 * q - t)) / root)
    term2 = 1.0 - ndtr((alpha * t * q + K * t) / root)
    return float(min(1.0, max(0.0, term1 + term2)))


def g_density(t: float, alpha: float, K: float, u) -> np.ndarray:
    """Density of g on (0, t): (alpha t+K) sqrt(t/(2 pi u (t-u)^3)) e^{-t(alpha u+K)^2/(2u(t-u))}."""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any(u_arr <= 0.0) or np.any(u_arr >= t):
        raise DomainError(f"u must be in (0, t), got {u}")
    if alpha * t + K <= 0.0:
        raise DomainError(f"need alpha*t + K > 0, got {alpha * t + K}")
    out = (alpha * t + K) * np.sqrt(t / (2.0 * np.pi * u_arr * (t - u_arr) ** 3)) \
        * np.exp(-t * (alpha * u_arr + K) ** 2 / (2.0 * u_arr * (t - u_arr)))
    return out if out.ndim else float(out)


def phi_occupation(g: float, S: float, K: float) -> float:
    """P(T >= S | last time above the barrier is g); reduces to 1 - S/g at K=0."""
    if g <= 0.0:
        raise DomainError(f"g must be positive, got {g}")
    if not 0.0 <= S <= g:
        raise DomainError(f"S must be in [0, g], got S={S}, g={g}")
    if S == 0.0:
        return 1.0
    if S == g:
        return 0.0
    common = K * math.sqrt(2.0 * S * (g - S)) / math.sqrt(math.pi * g ** 3)
    if K >= 0.0:
        val = -2.0 * (S / g * (1.0 - K * K / g) - 1.0) \
            * ndtr(-K * math.sqrt(S) / math.sqrt(g * (g - S))) \
            - common * math.exp(-K * K * S / (2.0 * g * (g - S)))
    else:
        val = 1.0 + 2.0 * ((g - S) / g * (1.0 - K * K / g) - 1.0) \
            * ndtr(K * math.sqrt(g - S) / math.sqrt(g * S)) \
            - common * math.exp(-K * K * (g - S) / (2.0 * g * S))
    return float(val)


def occupation_tail_quadrature(t: float, s_frac: float, alpha: float,
                               K: float) -> float:
    """P(T > s_frac*t) by composing the g density with the conditional law.

    Exact up to quadrature error: integrates g_density * phi_occupation over
    g in (s_frac*t, t)."""
    if not 0.0 < s_frac < 1.0:
        raise DomainError(f"s_frac must be in (0,1), got {s_frac}")
    st = s_frac * t

    def integrand(u):
        return g_density(t, alpha, K, u) * phi_occupation(u, st, K)

    val, _ = quad(integrand, st, t, limit=200)
    return float(val)


# ---------------------------------------------------------------------------
# asymptotic displays
# ---------------------------------------------------------------------------

def occupation_tail_asymptotic(t: float, s: float, alpha: float,
                               K: float) -> float:
    """Leading-order P(T > s t) for large t, in the three intercept cases.

    The K = 0 display carries an extra factor 2 relative to what the K < 0
    case gives in the limit; we reproduce the display as stated (see the
    factor-level tolerance on its check).
    """
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must be in (0,1), got {s}")
    if alpha <= 0.0 or t <= 0.0:
        raise DomainError(f"need alpha > 0 and t > 0, got alpha={alpha}, t={t}")
    one_m = 1.0 - s
    decay = math.exp(-t * alpha ** 2 * s / (2.0 * one_m) - alpha * K / one_m)
    base = t ** -1.5 * alpha * math.sqrt(1.0 / (2.0 * math.pi * s ** 3 * one_m ** 3))
    if K == 0.0:
        return base * decay * (2.0 * one_m ** 2 / alpha ** 2) ** 2 * 2.0
    if K < 0.0:
        return base * decay * (2.0 * one_m ** 2 / alpha ** 2) ** 1.5 \
            * SQRT2 * abs(K) / math.sqrt(math.pi)
    return (
        t ** -1.5 * K * (math.sqrt(math.pi) - 1.0)
        * math.sqrt(one_m / (2.0 * math.pi * s ** 3))
        * math.exp(-t * alpha ** 2 * s / (2.0 * one_m)
                   - alpha * K * (1.0 + SQRT2) / one_m)
        * (SQRT2 * K * alpha / one_m + 1.0)
    )


def occupation_tail_lower_bound(t: float, s: float, alpha: float, K: float,
                                b: float, L: float, C: float = 1.0) -> float:
    """Lower bound for P(T > s t, U <= L); constant C calibrated empirically."""
    if not 0.0 < s < 1.0:
        raise DomainError(f"s must be in (0,1), got {s}")
    if K <= 0.0 or b <= 0.0 or L <= 0.0:
        raise DomainError(
            f"need K, b, L > 0, got K={K}, b={b}, L={L}")
    one_m = 1.0 - s
    return (
        C * t ** -1.5 * math.exp(-K * K / (2.0 * L)) * math.sqrt(L) * K
        * math.sqrt(one_m / (2.0 * math.pi * alpha ** 2))
        * math.exp(-t * alpha ** 2 * s / (2.0 * one_m)
                   - (alpha ** 2 * L + alpha * K) / one_m)
        * (1.0 - math.exp(-2.0 * b * alpha * s / one_m))
    )


def laplace_asymptotic(t: float, lam: float, alpha: float, K: float):
    """Leading order of E[e^{lambda T}] (supercritical), or bracket bounds.

    2 lambda > alpha^2: returns the case-appropriate leading-order float.
    2 lambda <= alpha^2 and K < 0: returns the interval (1.0, upper).
    """
    if lam <= 0.0 or alpha <= 0.0:
        raise DomainError(f"need lambda, alpha > 0, got lambda={lam}, alpha={alpha}")
    root = math.sqrt(2.0 * lam)
    if 2.0 * lam > alpha ** 2:
        gap = root - alpha
        if K > 0.0:
            return (
                math.exp(t * gap ** 2 / 2.0 - K * root * (1.0 + SQRT2))
                * K * (math.sqrt(math.pi) - 1.0)
                * math.sqrt(alpha * lam / (4.0 * math.pi * gap ** 3))
                * (2.0 * K * math.sqrt(lam) + 1.0)
            )
        base = math.exp(t * gap ** 2 / 2.0 - K * root) \
            * math.sqrt(2.0 * alpha) / math.sqrt(math.pi * gap ** 3)
        if K == 0.0:
            return base
        return base * root * abs(K)
    # subcritical: only the K < 0 bracket is displayed
    if K >= 0.0:
        raise DomainError(
            f"subcritical bracket needs K < 0, got K={K} with 2*lambda <= alpha^2")
    if 2.0 * lam < alpha ** 2:
        tail_factor = 2.0 / (alpha ** 2 - 2.0 * lam)
    else:
        tail_factor = t + 2.0 * K / alpha
    upper = 1.0 + 2.0 / math.sqrt(math.pi * abs(K)) * lam \
        * math.exp(-2.0 * lam * K / alpha) * tail_factor
    return (1.0, upper)


def laplace_restricted_lower_bound(t: float, lam: float, alpha: float,
                                   K: float, b: float, L: float,
                                   C: float = 1.0) -> float:
    """Lower bound for E[e^{lambda T} 1_{U <= L}] in the supercritical case."""
    root = math.sqrt(2.0 * lam)
    if 2.0 * lam <= alpha ** 2:
        raise DomainError(f"need 2*lambda > alpha^2, got lambda={lam}, alpha={alpha}")
    if K <= 0.0 or b <= 0.0 or L <= 0.0:
        raise DomainError(f"need K, b, L > 0, got K={K}, b={b}, L={L}")
    gap = root - alpha
    return (
        C * math.exp(-K * K / (2.0 * L)) * math.sqrt(L) * K
        * math.sqrt(1.0 / (gap * 2.0 * math.pi * alpha))
        * math.exp(t * gap ** 2 / 2.0 - K * root * (1.0 + SQRT2))
        * (1.0 - math.exp(-2.0 * b * gap))
    )


def occupation_zero_probability(t: float, b: float) -> float:
    """P(U = 0) lower-bound display 1 - e^{-b^2/(2t)} for time below -b."""
    if b <= 0.0 or t <= 0.0:
        raise DomainError(f"need b, t > 0, got b={b}, t={t}")
    return 1.0 - math.exp(-b * b / (2.0 * t))


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------

_FUNCTIONALS = ("tail", "tail_restricted", "laplace", "laplace_restricted",
                "crossing")


def mc_functional(which: str, params: dict, n_paths: int, n_steps: int,
                  seed: int) -> McEstimate:
    """Monte Carlo estimate of a bridge functional.

    which selects among
      tail:               P(T > s_frac * t)
      tail_restricted:    P(T > s_frac * t and U <= L)
      laplace:            E[e^{lambda T}]
      laplace_restricted: E[e^{lambda T} 1_{U <= L}]
      crossing:           P(path touches the barrier), exact sub-grid hits

    params needs t, alpha, K, plus s_frac / lam / b, L as applicable.
    Deterministic given seed: streams are keyed by path-block index.
    """
    if which not in _FUNCTIONALS:
        raise DomainError(f"unknown functional {which!r}; pick from {_FUNCTIONALS}")
    if n_paths < 100:
        raise DomainError(f"need n_paths >= 100, got {n_paths}")
    t = float(params["t"])
    barrier = LineBarrier(float(params["alpha"]), float(params["K"]))
    s = np.linspace(0.0, t, n_steps + 1)
    h = t / n_steps

    lam = b = L = st = None
    if which in ("tail", "tail_restricted"):
        st = float(params["s_frac"]) * t
    if which in ("laplace", "laplace_restricted"):
        lam = float(params["lam"])
        if lam * t > 700.0:
            raise RescalingError(
                f"lambda*t = {lam * t:.1f} overflows e^(lambda T); "
                "rescale or work in the log domain")
    if which in ("tail_restricted", "laplace_restricted"):
        b = float(params["b"])
        L = float(params["L"])

    total = 0.0
    total_sq = 0.0
    for start, z in _iter_blocks(t, n_steps, n_paths, seed):
        if which == "crossing":
            vals = _crossing_prob(z, s, h, barrier)
        else:
            occ = _occupation_above(z, s, h, barrier)
            if which == "tail":
                vals = (occ > st).astype(np.float64)
            elif which == "tail_restricted":
                below = _occupation_below(z, h, b)
                vals = ((occ > st) & (below <= L)).astype(np.float64)
            elif which == "laplace":
                vals = np.exp(lam * occ)
            else:
                below = _occupation_below(z, h, b)
                vals = np.exp(lam * occ) * (below <= L)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())

    mean = total / n_paths
    var = max(0.0, (total_sq - n_paths * mean * mean) / (n_paths - 1))
    return McEstimate(
        mean=mean,
        std_error=math.sqrt(var / n_paths),
        n_samples=n_paths,
        seed=seed,
    )
