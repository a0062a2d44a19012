"""Riesz kernel of the fractional Laplacian and its defining identities.

The operator of order ``s`` on R^n has fundamental solution
``Gamma_2s(x) = c(n, 2s) |x|^(2s - n)`` where ``c(n, sigma)`` is the unique
constant making the Fourier transform of ``c(n, sigma) |x|^(sigma - n)``
equal ``|xi|^(-sigma)`` (convention ``fhat(xi) = int f(x) e^(-2 pi i x.xi) dx``).

Everything here is specialised to the plane (``n = 2``) for curve densities,
but ``riesz_constant`` itself is dimension-generic.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import gamma as _gamma

from .errors import QuadratureError
from .quadrature import gauss_rule, jacobi_rule, geometric_panels


def riesz_constant(n, sigma):
    """Normalization constant ``c(n, sigma) = pi^(sigma-n/2) G((n-sigma)/2) / G(sigma/2)``.

    Parameters
    ----------
    n : int
        Ambient dimension.
    sigma : float
        Kernel order, ``0 < sigma < n``.
    """
    if not 0.0 < sigma < n:
        raise ValueError(f"riesz_constant requires 0 < sigma < n={n}, got sigma={sigma}")
    return float(np.pi ** (sigma - n / 2.0) * _gamma((n - sigma) / 2.0) / _gamma(sigma / 2.0))


@dataclass(frozen=True)
class FracParams:
    """Order parameter of the problem.

    ``s`` is the fractional order; the trace operator of the single layer
    potential is invertible on the energy spaces exactly for ``1/2 < s < 1``,
    so that range is enforced.  Only the planar case ``n = 2`` is supported.
    """

    s: float
    n: int = 2

    def __post_init__(self):
        if self.n != 2:
            raise ValueError(f"only the planar case n=2 is implemented, got n={self.n}")
        if not 0.5 < self.s < 1.0:
            raise ValueError(f"s must lie strictly between 1/2 and 1, got s={self.s}")

    @property
    def sigma(self):
        """Order of the Riesz kernel, ``2s``."""
        return 2.0 * self.s

    @property
    def kernel_power(self):
        """Exponent of the kernel ``|x|^(2s - n)``."""
        return 2.0 * self.s - self.n

    @property
    def constant(self):
        """``c(n, 2s)``, the kernel normalization."""
        return riesz_constant(self.n, self.sigma)


def gamma_2s(r, s):
    """Riesz kernel ``c(2, 2s) r^(2s-2)`` at distances ``r > 0`` (vectorized)."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0.0):
        raise ValueError("gamma_2s is only defined for positive distances")
    params = FracParams(s)
    return params.constant * r ** params.kernel_power


# ---------------------------------------------------------------------------
# Semigroup identity
#
#   c(n,s1) c(n,s2) int |x-y|^(s1-n) |y|^(s2-n) dy  =  c(n,s1+s2) |x|^(s1+s2-n)
#
# checked in n=2 by quadrature.  The plane is split into the two tangent
# disks B(0, |x|/2) and B(x, |x|/2) (polar coordinates about each center,
# radial endpoint singularity absorbed by a Jacobi rule) plus the exterior,
# handled in polar coordinates about the origin.  Exterior rays with
# |theta| < asin(1/2) cross the second disk; their radial interval is split
# at the two circle intersections.  The angular integrand has a square-root
# kink where the rays become tangent, so the angular grid is graded toward
# that critical angle.  Radial tails use the substitution r -> R/u, whose
# endpoint weight u^(1-s1-s2) is again handled by a Jacobi rule.
# ---------------------------------------------------------------------------


def _semigroup_lhs(s1, s2, d, order, n_theta, levels):
    """Quadrature for ``int_R2 |x-y|^(s1-2) |y|^(s2-2) dy`` with ``x = (d, 0)``."""
    a = d / 2.0
    total = 0.0

    # the two disk pieces, polar about their centers
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    w_theta = 2.0 * np.pi / n_theta
    for (beta, other_power) in ((s2 - 1.0, s1 - 2.0), (s1 - 1.0, s2 - 2.0)):
        xr, xw = jacobi_rule(2 * order, beta)
        r = a * xr
        # distance from the disk point to the *other* singular center
        y1 = np.outer(r, np.cos(theta))
        y2 = np.outer(r, np.sin(theta))
        dist = np.hypot(y1 - d, y2)
        total += a ** (beta + 1.0) * w_theta * float(xw @ dist ** other_power @ np.ones(n_theta))

    # exterior piece, polar about the origin; integrand is even in theta
    p = s1 + s2
    gx, gw = gauss_rule(order)
    ju, jw = jacobi_rule(2 * order, 1.0 - p)
    R_tail = 4.0 * d
    theta_c = np.arcsin(0.5)  # rays below this angle cross the far disk

    def radial(theta_v, pairs, tail_from):
        cth = np.cos(theta_v)

        def F(r):
            return r ** (s2 - 1.0) * (r * r - 2.0 * d * r * cth + d * d) ** ((s1 - 2.0) / 2.0)

        acc = 0.0
        for lo, hi in pairs:
            r = lo + (hi - lo) * gx
            acc += (hi - lo) * float(gw @ F(r))
        if tail_from is not None:
            r = tail_from / ju
            acc += tail_from ** (p - 2.0) * float(jw @ (F(r) * r ** (3.0 - p)))
        return acc

    def graded_angular(lo, hi, toward_hi):
        """Panels of [lo, hi] geometrically graded toward the kink endpoint."""
        pts = sorted({lo + (hi - lo) * (1.0 - 0.5 ** k) for k in range(levels)} | {hi})
        pairs = list(zip(pts[:-1], pts[1:]))
        return pairs if toward_hi else [(lo + hi - q, lo + hi - p_) for (p_, q) in reversed(pairs)]

    base_pairs = geometric_panels(a, R_tail)
    acc = 0.0
    for tlo, thi in graded_angular(0.0, theta_c, True):
        tn = tlo + (thi - tlo) * gx
        for tv, tw in zip(tn, gw):
            cth = np.cos(tv)
            disc = max(d * d * (cth * cth - 0.75), 0.0)
            r_in = d * cth - np.sqrt(disc)
            r_out = d * cth + np.sqrt(disc)
            pairs = ([(a, r_in)] if r_in > a else []) + geometric_panels(r_out, R_tail)
            acc += 2.0 * (thi - tlo) * tw * radial(tv, pairs, R_tail)
    for tlo, thi in graded_angular(theta_c, np.pi, False):
        tn = tlo + (thi - tlo) * gx
        for tv, tw in zip(tn, gw):
            acc += 2.0 * (thi - tlo) * tw * radial(tv, base_pairs, R_tail)
    return total + acc


def semigroup_residual(s1, s2, x, budget=1):
    """Relative defect of the Riesz kernel composition identity at ``x``.

    Computes ``|lhs - rhs| / |rhs|`` where ``lhs`` is the convolution
    ``c(2,s1) c(2,s2) int |x-y|^(s1-2) |y|^(s2-2) dy`` evaluated by
    quadrature and ``rhs = c(2, s1+s2) |x|^(s1+s2-2)``.

    Parameters
    ----------
    s1, s2 : float
        Kernel orders with ``0 < s1, s2`` and ``s1 + s2 < 2``.
    x : array_like, shape (2,)
        Evaluation point, nonzero.
    budget : int
        Resolution multiplier.  Doubling it at least halves the residual
        (in practice it gains several orders of magnitude).

    Raises
    ------
    QuadratureError
        If an internal two-resolution probe shows the quadrature has not
        converged at this budget.
    """
    if not (s1 > 0.0 and s2 > 0.0 and s1 + s2 < 2.0):
        raise ValueError(f"need s1, s2 > 0 and s1 + s2 < 2, got ({s1}, {s2})")
    if budget < 1 or int(budget) != budget:
        raise ValueError(f"budget must be a positive integer, got {budget!r}")
    x = np.asarray(x, dtype=float)
    d = float(np.hypot(x[0], x[1]))
    if d <= 0.0:
        raise ValueError("the identity is checked away from the origin; x must be nonzero")
    budget = int(budget)
    order, n_theta, levels = 8 * budget, 64 * budget, 8 * budget
    lhs_scale = riesz_constant(2, s1) * riesz_constant(2, s2)
    lhs = lhs_scale * _semigroup_lhs(s1, s2, d, order, n_theta, levels)
    rhs = riesz_constant(2, s1 + s2) * d ** (s1 + s2 - 2.0)
    # convergence probe at a strictly coarser resolution: if the quadrature
    # itself is still moving by more than 10% the budget was insufficient,
    # which is a different failure mode than a genuine identity violation.
    coarse = lhs_scale * _semigroup_lhs(s1, s2, d, max(order // 2, 3), max(n_theta // 2, 8), max(levels // 2, 2))
    if abs(lhs - coarse) > 0.1 * abs(lhs):
        raise QuadratureError(
            f"semigroup quadrature did not converge at budget {budget} "
            f"(coarse/fine values {coarse:.6g} / {lhs:.6g})"
        )
    return abs(lhs - rhs) / abs(rhs)
