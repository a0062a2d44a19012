"""Quadrature rules and configuration.

All rules are returned on reference intervals and cached, so repeated
assembly/evaluation calls reuse identical node sets.  Every rule here is
deterministic: nodes and weights depend only on the requested order.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureConfig:
    """Knobs for the singular panel-pair integration.

    Parameters
    ----------
    gauss_order : int
        Number of Gauss-Legendre points per direction on each (sub)cell.
    graded_levels : int
        Number of geometric refinement levels (ratio 1/2) toward a shared
        vertex in the adjacent-panel scheme.
    near_field_ratio : float
        Panels at distance greater than ``near_field_ratio * max(h_i, h_j)``
        are treated as well separated; closer disjoint pairs are integrated
        on uniformly split subpanels.
    """

    gauss_order: int = 8
    graded_levels: int = 8
    near_field_ratio: float = 3.0

    def __post_init__(self):
        if not (isinstance(self.gauss_order, int) and self.gauss_order >= 2):
            raise ValueError(f"gauss_order must be an integer >= 2, got {self.gauss_order!r}")
        if not (isinstance(self.graded_levels, int) and self.graded_levels >= 1):
            raise ValueError(f"graded_levels must be an integer >= 1, got {self.graded_levels!r}")
        if not self.near_field_ratio > 1.0:
            raise ValueError(f"near_field_ratio must be > 1, got {self.near_field_ratio!r}")

    def scaled(self, factor):
        """Return a config with the point budget multiplied by ``factor``."""
        return QuadratureConfig(
            gauss_order=self.gauss_order * factor,
            graded_levels=self.graded_levels * factor,
            near_field_ratio=self.near_field_ratio,
        )


@lru_cache(maxsize=None)
def gauss_rule(order):
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(order)
    nodes = 0.5 * (x + 1.0)
    weights = 0.5 * w
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=None)
def jacobi_rule(order, beta):
    """Nodes/weights on [0, 1] integrating x**beta * f(x) for smooth f.

    ``beta`` must be > -1.  The weight function is included in the weights,
    so ``sum(w * f(x))`` approximates ``int_0^1 x**beta f(x) dx``.
    """
    if not beta > -1.0:
        raise ValueError(f"jacobi_rule requires beta > -1, got {beta}")
    x, w = roots_jacobi(order, 0.0, beta)
    nodes = 0.5 * (x + 1.0)
    weights = w * 0.5 ** (beta + 1.0)
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


@lru_cache(maxsize=None)
def graded_rule(levels, order):
    """Composite Gauss grid on [0, 1], geometrically graded toward 0.

    Cells are [2^-(l+1), 2^-l] for l = 0..levels-1 plus the closing cell
    [0, 2^-levels].  The closing cell is last; callers that replace it with
    an exact formula can address its ``order`` trailing points.
    """
    gx, gw = gauss_rule(order)
    hi = 0.5 ** np.arange(levels)
    lo = np.concatenate([hi / 2.0, [0.0]])
    hi = np.concatenate([hi, [0.5 ** levels]])
    nodes = (lo[:, None] + (hi - lo)[:, None] * gx[None, :]).ravel()
    weights = ((hi - lo)[:, None] * gw[None, :]).ravel()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


def geometric_panels(lo, hi, factor=2.0):
    """Breakpoints of a geometric subdivision of [lo, hi], growing from lo."""
    pts = [lo]
    while pts[-1] < hi:
        pts.append(min(pts[-1] * factor, hi))
    return list(zip(pts[:-1], pts[1:]))
