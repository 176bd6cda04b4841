"""Closed-form speed predictions, Laplace-method utilities, and front fitting.

The invasion speed has two closed-form branches:

  branch1 (u*)  = sqrt(2) - beta_t*(1+sqrt(1-gamma_t))/(sqrt(2)*gamma_t)
  branch2       = sqrt(2*(gamma_t-beta_t))

branch1 is the tangent line (in beta_t) to the concave branch2 at the critical
mutation rate beta_star = 2*(gamma_t + sqrt(1-gamma_t) - 1), so the literal
max() of the two always returns branch1; the regime-resolved prediction
switches to branch2 for beta_t > beta_star.  Both readings are exposed and the
solver experiments adjudicate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FitError
from .model import ScaledParams

SQRT2 = math.sqrt(2.0)

C_PLUS = 1.0 / (2.0 - SQRT2)
C_MINUS = SQRT2


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def u_star(s: ScaledParams) -> float:
    """Accelerated invasion speed sqrt(2) - beta_t*(1+sqrt(1-gamma_t))/(sqrt(2)*gamma_t)."""
    return SQRT2 - s.beta_t * (1.0 + math.sqrt(1.0 - s.gamma_t)) / (SQRT2 * s.gamma_t)


def flat_speed(s: ScaledParams) -> float:
    """Front speed sqrt(2*(gamma_t-beta_t)) over a fully established resident field."""
    return math.sqrt(2.0 * (s.gamma_t - s.beta_t))


def beta_star(gamma_t: float) -> float:
    """Critical mutation rate 2*(gamma_t + sqrt(1-gamma_t) - 1) where the branches touch."""
    if not 0.0 < gamma_t < 1.0:
        raise DomainError(f"gamma_t must be in (0,1), got {gamma_t}")
    return 2.0 * (gamma_t + math.sqrt(1.0 - gamma_t) - 1.0)


@dataclass(frozen=True)
class SpeedPrediction:
    branch1: float
    branch2: float
    beta_star: float
    u_c_as_stated: float   # max(branch1, branch2): always branch1 by tangency
    u_c_regime: float      # branch1 for beta_t <= beta_star, else branch2
    regime: str            # accelerated | flat-equivalent


def predict(s: ScaledParams) -> SpeedPrediction:
    b1 = u_star(s)
    b2 = flat_speed(s)
    bs = beta_star(s.gamma_t)
    accelerated = s.beta_t <= bs
    return SpeedPrediction(
        branch1=b1,
        branch2=b2,
        beta_star=bs,
        u_c_as_stated=max(b1, b2),
        u_c_regime=b1 if accelerated else b2,
        regime="accelerated" if accelerated else "flat-equivalent",
    )


def x1_star(s: ScaledParams, t: float) -> float:
    """Decay onset sqrt(2)*(1 - beta_t*(1+sqrt(1-gamma_t))/(2*gamma_t))*t; equals u_star*t."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    return SQRT2 * (1.0 - s.beta_t * (1.0 + math.sqrt(1.0 - s.gamma_t)) / (2.0 * s.gamma_t)) * t


def x2_star(s: ScaledParams, t: float) -> float:
    """Decay onset sqrt(2*(gamma_t-beta_t))*t of the established-background regime."""
    if t <= 0:
        raise DomainError(f"t must be positive, got {t}")
    return flat_speed(s) * t


def s_star(u: float, gamma_t: float, t: float) -> float:
    """Optimal excursion duration t*(1 - (sqrt(2)-u)/sqrt(2*(1-gamma_t))), floored at 0."""
    if not 0.0 < u < SQRT2:
        raise DomainError(f"u must be in (0, sqrt(2)), got {u}")
    val = t * (1.0 - (SQRT2 - u) / math.sqrt(2.0 * (1.0 - gamma_t)))
    return max(val, 0.0)


def decay_exponent(u: float, s: ScaledParams) -> float:
    """Rate r(u) with w(t, u*t) ~ exp(-t*r(u)); positive r means decay.

    r(u) = u^2/2 - (gamma_t-beta_t)
           - (1/2)*(sqrt(2)-u-sqrt(2*(1-gamma_t)))^2 * 1_{u > sqrt(2)*(1-sqrt(1-gamma_t))}
    """
    if u <= 0:
        raise DomainError(f"u must be positive, got {u}")
    r = 0.5 * u * u - (s.gamma_t - s.beta_t)
    threshold = SQRT2 * (1.0 - math.sqrt(1.0 - s.gamma_t))
    if u > threshold:
        r -= 0.5 * (SQRT2 - u - math.sqrt(2.0 * (1.0 - s.gamma_t))) ** 2
    return r


def tip_offsets(s: ScaledParams, t: float, delta: float = 0.1) -> tuple[float, float]:
    """Logarithmic tip window (z_plus, z_minus) around u_star*t.

    Only meaningful in the accelerated regime (beta_t < beta_star); z_plus
    bounds where w has certainly dropped below O(1/t), z_minus where it is
    certainly still above.
    """
    bs = beta_star(s.gamma_t)
    if not s.beta_t < bs:
        raise DomainError(
            f"tip offsets need beta_t < beta_star={bs:.6f}, got beta_t={s.beta_t}"
        )
    if t <= 1.0:
        raise DomainError(f"t must exceed 1, got {t}")
    root = math.sqrt(1.0 - s.gamma_t)
    denom = SQRT2 * (1.0 - root)
    z_plus = (C_PLUS * root + 0.5 + delta) / denom * math.log(t)
    z_minus = -(C_MINUS * math.sqrt(2.0 * (1.0 - s.gamma_t)) * (1.0 + SQRT2) - 0.5) / denom * math.log(t)
    return z_plus, z_minus


# ---------------------------------------------------------------------------
# Laplace method
# ---------------------------------------------------------------------------

def laplace_approx(f, f_second_at_max: float, P, s_star_loc: float, t: float) -> float:
    """Interior-maximum approximation sqrt(2*pi/(-t*f''(s*))) * P(s*,t) * exp(t*f(s*))."""
    if f_second_at_max >= 0:
        raise DomainError(
            f"interior maximum needs f''(s*) < 0, got {f_second_at_max}"
        )
    return math.sqrt(2.0 * math.pi / (-t * f_second_at_max)) * P(s_star_loc, t) * math.exp(t * f(s_star_loc))


def laplace_boundary_approx(f, f_prime_at_edge: float, c: float, delta: float,
                            y: float, t: float) -> float:
    """Boundary approximation Gamma(1+delta)*c*exp(-t*f(y))/(t*f'(y))^(1+delta).

    Applies to integrals over [y, 1] of P(s,t)*exp(-t*f(s)) whose mass sits at
    the left edge, i.e. f increasing at y, with P(s,t) ~ c*(s-y)^delta there.
    """
    if f_prime_at_edge <= 0:
        raise DomainError(
            f"boundary contribution needs f'(y) > 0, got {f_prime_at_edge}"
        )
    return math.gamma(1.0 + delta) * c * math.exp(-t * f(y)) / (t * f_prime_at_edge) ** (1.0 + delta)


def occupation_rate_f(lam: float, alpha: float):
    """The exponent f(s) = lam*s - alpha^2*s/(2*(1-s)) of the occupation Laplace transform.

    Returns (f, s_star, f(s_star), f''(s_star)); the interior maximum exists
    iff 2*lam > alpha^2.
    """
    if 2.0 * lam <= alpha * alpha:
        raise DomainError(f"need 2*lambda > alpha^2, got lambda={lam}, alpha={alpha}")

    def f(s):
        return lam * s - alpha * alpha * s / (2.0 * (1.0 - s))

    s_max = 1.0 - alpha / math.sqrt(2.0 * lam)
    f_max = 0.5 * (alpha - math.sqrt(2.0 * lam)) ** 2
    f_second = -2.0 * lam * math.sqrt(2.0 * lam) / alpha
    return f, s_max, f_max, f_second


# ---------------------------------------------------------------------------
# front speed fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpeedFit:
    u_hat: float
    c_log: float
    intercept: float
    rms_residual: float
    fit_window: tuple[float, float]
    n_points: int


def fit_front(times: np.ndarray, positions: np.ndarray,
              window_fraction: float = 0.5) -> SpeedFit:
    """Least-squares fit x(t) = u*t + c*ln t + d over the trailing window.

    The window is [t_hi*window_fraction, t_hi]; needs >= 20 samples inside.
    """
    times = np.asarray(times, dtype=np.float64)
    positions = np.asarray(positions, dtype=np.float64)
    if times.size != positions.size:
        raise FitError("times and positions must have equal length")
    t_hi = times[-1]
    mask = times >= t_hi * window_fraction
    mask &= times > 0.0
    if int(mask.sum()) < 20:
        raise FitError(
            f"only {int(mask.sum())} samples in fit window [{t_hi * window_fraction}, {t_hi}]"
        )
    tt = times[mask]
    xx = positions[mask]
    A = np.column_stack([tt, np.log(tt), np.ones_like(tt)])
    coef, *_ = np.linalg.lstsq(A, xx, rcond=None)
    resid = xx - A @ coef
    return SpeedFit(
        u_hat=float(coef[0]),
        c_log=float(coef[1]),
        intercept=float(coef[2]),
        rms_residual=float(np.sqrt(np.mean(resid ** 2))),
        fit_window=(float(t_hi * window_fraction), float(t_hi)),
        n_points=int(tt.size),
    )


def fit_speed(track, which: str = "w", window_fraction: float = 0.5) -> SpeedFit:
    """Fit the v- or w-front of a FrontTrack."""
    if which == "v":
        pos = track.x_front_v
    elif which == "w":
        pos = track.x_front_w
    else:
        raise FitError(f"which must be 'v' or 'w', got {which!r}")
    return fit_front(track.times, pos, window_fraction)
