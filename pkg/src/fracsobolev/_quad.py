"""Shared quadrature building blocks.

Gauss-Legendre rules on [0, 1], collapsed tensor rules on the reference
triangle, trapezoid averaging for periodic integrands, and a partial-sum
accelerator for slowly alternating tail series.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss


class QuadratureError(RuntimeError):
    """A quadrature did not reach its accuracy target.

    ``estimate`` carries the best available value, ``error_estimate`` the
    achieved (not the requested) error bound.
    """

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


@lru_cache(maxsize=128)
def unit_gauss(n: int):
    """Gauss-Legendre nodes and weights transplanted to [0, 1].

    Exact for polynomials of degree <= 2n - 1. Returned arrays are shared;
    callers must not mutate them.
    """
    x, w = leggauss(int(n))
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=128)
def triangle_rule(n: int):
    """Tensor Gauss rule collapsed onto the triangle {a, b >= 0, a + b <= 1}.

    Returns (points (n*n, 2), weights (n*n,)); weights sum to the reference
    area 1/2. Exact for total degree <= 2n - 2 (the collapse map raises the
    degree in the first coordinate by one).
    """
    x, w = unit_gauss(int(n))
    a, b = np.meshgrid(x, x, indexing="ij")
    wts = np.outer(w, w) * (1.0 - a)
    pts = np.column_stack([a.ravel(), (b * (1.0 - a)).ravel()])
    return pts, wts.ravel()


def periodic_mean(f, rtol=1e-12, n0=64, n_max=32768):
    """Mean value of a 2*pi-periodic function by doubling trapezoid sums.

    ``f`` maps an array of angles (last axis) to values; broadcasting over
    leading axes is the caller's business. Spectrally accurate for smooth
    integrands. Returns (mean, error_estimate, n_used).
    """
    n = int(n0)
    angles = 2.0 * np.pi * np.arange(n) / n
    est = np.mean(f(angles), axis=-1)
    err = np.inf
    while n < n_max:
        mids = angles + np.pi / n
        est_new = 0.5 * (est + np.mean(f(mids), axis=-1))
        err = float(np.max(np.abs(est_new - est)))
        scale = float(np.max(np.abs(est_new))) + 1e-300
        est = est_new
        n *= 2
        angles = 2.0 * np.pi * np.arange(n) / n
        if err <= rtol * scale:
            break
    return est, err, n


def averaged_tail_sum(panel_integrals):
    """Sum an infinite series from its first panels by iterated averaging.

    ``panel_integrals`` holds integrals over consecutive half-period panels
    of a decaying oscillatory function, so the partial sums oscillate around
    the limit; repeated pairwise averaging (Euler transformation) converges
    far faster than the raw tail. Returns (sum_estimate, error_estimate).
    """
    panels = np.asarray(panel_integrals, dtype=float)
    if panels.size < 4:
        raise ValueError("need at least 4 panels to accelerate")
    rows = np.cumsum(panels)
    prev = rows[-1]
    err = np.inf
    for _ in range(min(16, panels.size - 1)):
        rows = 0.5 * (rows[:-1] + rows[1:])
        err = abs(rows[-1] - prev)
        prev = rows[-1]
    return float(prev), float(err)
