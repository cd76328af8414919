"""Convex machinery for the sharp-interface indicator constraint.

The solid/liquid indicator eta is tied to the temperature theta through
the translated Heaviside graph H(r): +1 above the transition temperature
theta_c, -1 below, the full interval [-1, 1] at theta_c.  This module
implements the graph, its convex potential j(r) = |r - theta_c| with
conjugate j*, the Fenchel-Young gap used to penalize the graph
constraint, the Moreau-Yosida envelope of j (with derivative and
resolvent), and the heat-flux nonlinearity beta(r) = -1/r + r of the
temperature equation.

Everything is pure and elementwise; scalar input gives scalar output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ConvexContext",
    "Interval",
    "beta",
    "beta_prime",
    "beta_inverse",
    "heaviside",
    "j",
    "j_star",
    "fenchel_gap",
    "resolvent",
    "moreau_j",
    "moreau_jprime",
]


@dataclass(frozen=True)
class ConvexContext:
    """Problem data for the constraint machinery: the transition temperature."""

    theta_c: float

    def __post_init__(self):
        if not np.isfinite(self.theta_c) or self.theta_c <= 0.0:
            raise ValueError(f"theta_c must be positive and finite, got {self.theta_c}")


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi]; degenerate (lo == hi) for single values."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo <= self.hi):
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    def __contains__(self, x):
        return self.lo <= x <= self.hi


def _ret(a):
    return a if a.ndim else float(a)


def beta(r):
    """Flux nonlinearity beta(r) = -1/r + r, defined for r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("beta(r) requires r > 0")
    return _ret(r - 1.0 / r)


def beta_prime(r):
    """beta'(r) = 1 + 1/r^2 for r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("beta_prime(r) requires r > 0")
    return _ret(1.0 + 1.0 / (r * r))


def beta_inverse(w):
    """Inverse of beta on (0, inf): the positive root of r^2 - w*r - 1 = 0.

    Evaluated branch-wise to avoid cancellation for large |w|.
    """
    w = np.asarray(w, dtype=float)
    s = np.sqrt(w * w + 4.0)
    out = np.where(w >= 0.0, 0.5 * (w + s), 2.0 / (s - w))
    return _ret(out)


def heaviside(ctx: ConvexContext, r: float) -> Interval:
    """Translated Heaviside graph at r: set-valued, jumping at theta_c."""
    if r > ctx.theta_c:
        return Interval(1.0, 1.0)
    if r < ctx.theta_c:
        return Interval(-1.0, -1.0)
    return Interval(-1.0, 1.0)


def j(ctx: ConvexContext, r):
    """Convex potential of the Heaviside graph: j(r) = |r - theta_c|."""
    r = np.asarray(r, dtype=float)
    return _ret(np.abs(r - ctx.theta_c))


def j_star(ctx: ConvexContext, w):
    """Conjugate of j: w*theta_c on [-1, 1], +inf outside (returned as np.inf)."""
    w = np.asarray(w, dtype=float)
    return _ret(np.where(np.abs(w) <= 1.0, w * ctx.theta_c, np.inf))


def fenchel_gap(ctx: ConvexContext, r, w):
    """Fenchel-Young gap j(r) + j*(w) - w*r for |w| <= 1.

    Computed as |r - theta_c| - w*(r - theta_c), which is algebraically
    identical and nonnegative in floating point as well (|w| <= 1 makes the
    subtrahend never round above the minuend).  Zero exactly on the graph.
    """
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(np.abs(w) > 1.0):
        raise ValueError("fenchel_gap requires |w| <= 1")
    d = r - ctx.theta_c
    return _ret(np.abs(d) - w * d)


def resolvent(ctx: ConvexContext, r, sigma):
    """Resolvent (I + sigma*H)^{-1} r: shrink toward theta_c by sigma, clamp.

    This is the proximal point of sigma*j at r; moreau_j(r) is attained there.
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    r = np.asarray(r, dtype=float)
    d = r - ctx.theta_c
    out = np.where(d > sigma, r - sigma, np.where(d < -sigma, r + sigma, ctx.theta_c))
    return _ret(out)


def moreau_j(ctx: ConvexContext, r, sigma):
    """Moreau-Yosida envelope of j: inf_s |s - theta_c| + (r - s)^2 / (2*sigma).

    Closed form is the Huber function: quadratic within sigma of theta_c,
    linear with slope 1 outside (offset by sigma/2).
    """
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    r = np.asarray(r, dtype=float)
    d = np.abs(r - ctx.theta_c)
    return _ret(np.where(d <= sigma, d * d / (2.0 * sigma), d - 0.5 * sigma))


def moreau_jprime(ctx: ConvexContext, r, sigma):
    """Derivative of the envelope: clamp((r - theta_c)/sigma, -1, 1)."""
    if sigma <= 0.0:
        raise ValueError("sigma must be positive")
    r = np.asarray(r, dtype=float)
    return _ret(np.clip((r - ctx.theta_c) / sigma, -1.0, 1.0))
