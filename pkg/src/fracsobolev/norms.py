"""L^q norms of piecewise-linear functions and the critical-exponent residual.

Per-element Gauss quadrature with a doubling audit.  An affine function
raised to a non-integer power is smooth except where it vanishes, so
elements on which the function changes sign are split along the exact
zero set before integrating.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._quad import triangle_rule, unit_gauss
from .mesh import FeFunction, element_geometry

__all__ = ["QuadratureRule", "reference_rule", "lq_norm", "nonlinear_residual"]

_DEFAULT_ORDER = 6
_MAX_ORDER = 14
_NORM_RTOL = 1e-8
_RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class QuadratureRule:
    """Point/weight set on the reference simplex.

    ``points`` has shape (n_points, dim) in reference coordinates
    (interval [0,1] or the unit triangle), ``weights`` sums to the
    reference measure, and ``degree`` is the polynomial exactness.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if self.points.ndim != 2 or self.weights.ndim != 1:
            raise ValueError("points must be (n, dim), weights (n,)")
        if len(self.points) != len(self.weights):
            raise ValueError("points/weights length mismatch")
        if not np.all(self.weights > 0):
            raise ValueError("quadrature weights must be positive")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def barycentric(self) -> np.ndarray:
        """Barycentric coordinates of the points, shape (n, dim+1)."""
        first = 1.0 - self.points.sum(axis=1)
        return np.column_stack([first, self.points])


@lru_cache(maxsize=None)
def reference_rule(dim: int, order: int) -> QuadratureRule:
    """Gauss rule on the reference simplex with ``order`` points per direction."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if dim == 1:
        x, w = unit_gauss(order)
        return QuadratureRule(x[:, None].copy(), w.copy(), 2 * order - 1)
    if dim == 2:
        pts, wts = triangle_rule(order)
        return QuadratureRule(pts.copy(), wts.copy(), 2 * order - 2)
    raise ValueError("dim must be 1 or 2")


def _split_simplices(w: np.ndarray) -> list[tuple[np.ndarray, float]]:
    """Partition the reference simplex along the zero set of an affine function.

    ``w`` holds the vertex values, with min(w) < 0 < max(w).  Returns
    (barycentric vertex matrix, reference-measure fraction) pairs; the
    function is one-signed on each piece.
    """
    k = len(w)
    if k == 2:
        t = w[0] / (w[0] - w[1])
        left = np.array([[1.0, 0.0], [1.0 - t, t]])
        right = np.array([[1.0 - t, t], [0.0, 1.0]])
        return [(left, t), (right, 1.0 - t)]

    eye = np.eye(3)

    def cross_point(i, j):
        t = w[i] / (w[i] - w[j])
        return (1.0 - t) * eye[i] + t * eye[j]

    pos = np.flatnonzero(w > 0)
    neg = np.flatnonzero(w < 0)
    pieces: list[np.ndarray] = []
    if len(pos) == 1 and len(neg) == 1:
        # one vertex sits exactly on the zero line
        zero = int(np.flatnonzero(w == 0)[0])
        i, j = int(pos[0]), int(neg[0])
        z = cross_point(i, j)
        pieces = [np.stack([eye[zero], eye[i], z]), np.stack([eye[zero], z, eye[j]])]
    else:
        a = int(pos[0]) if len(pos) == 1 else int(neg[0])
        b, c = [v for v in range(3) if v != a]
        zb = cross_point(a, b)
        zc = cross_point(a, c)
        pieces = [
            np.stack([eye[a], zb, zc]),
            np.stack([zb, eye[b], eye[c]]),
            np.stack([zb, eye[c], zc]),
        ]
    out = []
    for bary in pieces:
        edges = bary[1:, 1:] - bary[0, 1:]
        frac = 2.0 * abs(0.5 * np.linalg.det(edges))
        out.append((bary, frac))
    return out


def _element_scales(mesh) -> np.ndarray:
    geo = element_geometry(mesh)
    ref = 1.0 if mesh.dim == 1 else 0.5
    return geo.measure / ref


def _lq_element_sums(u: FeFunction, q: float, order: int) -> float:
    """Sum over elements of the integral of |u|^q."""
    mesh = u.mesh
    rule = reference_rule(mesh.dim, order)
    lam = rule.barycentric()
    w_elem = u.values[mesh.elements]
    scales = _element_scales(mesh)

    u_at = w_elem @ lam.T
    per_elem = scales * (np.abs(u_at) ** q @ rule.weights)

    wmin = w_elem.min(axis=1)
    wmax = w_elem.max(axis=1)
    mixed = np.flatnonzero((wmin < 0) & (wmax > 0))
    for e in mixed:
        total = 0.0
        for bary, frac in _split_simplices(w_elem[e]):
            vals = (lam @ bary) @ w_elem[e]
            total += frac * float(np.abs(vals) ** q @ rule.weights)
        per_elem[e] = scales[e] * total
    return float(per_elem.sum())


def lq_norm(u: FeFunction, q: float, order: int = _DEFAULT_ORDER) -> float:
    """The L^q norm of a piecewise-linear function over the mesh.

    The per-element Gauss order starts at ``order`` and is raised until
    doubling it moves the result by at most a 1e-8 relative tolerance.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    if not np.any(u.values):
        return 0.0
    n = max(int(order), 2)
    coarse = _lq_element_sums(u, q, n) ** (1.0 / q)
    while True:
        fine = _lq_element_sums(u, q, 2 * n) ** (1.0 / q)
        if abs(fine - coarse) <= _NORM_RTOL * max(abs(fine), 1e-300):
            return fine
        if n >= _MAX_ORDER:
            return fine
        n += 2
        coarse = _lq_element_sums(u, q, n) ** (1.0 / q)


def _residual_accumulate(u: FeFunction, q: float, order: int) -> np.ndarray:
    mesh = u.mesh
    rule = reference_rule(mesh.dim, order)
    lam = rule.barycentric()
    w_elem = u.values[mesh.elements]
    scales = _element_scales(mesh)

    u_at = w_elem @ lam.T
    g_at = np.abs(u_at) ** (q - 2.0) * u_at
    contrib = np.einsum("q,mq,qa->ma", rule.weights, g_at, lam)

    wmin = w_elem.min(axis=1)
    wmax = w_elem.max(axis=1)
    mixed = np.flatnonzero((wmin < 0) & (wmax > 0))
    for e in mixed:
        acc = np.zeros(lam.shape[1])
        for bary, frac in _split_simplices(w_elem[e]):
            lam_sub = lam @ bary
            vals = lam_sub @ w_elem[e]
            g = np.abs(vals) ** (q - 2.0) * vals
            acc += frac * np.einsum("q,q,qa->a", rule.weights, g, lam_sub)
        contrib[e] = acc
    contrib *= scales[:, None]

    b = np.zeros(mesh.n_nodes)
    np.add.at(b, mesh.elements, contrib)
    return b[: mesh.free_count]


def nonlinear_residual(u: FeFunction, q: float, order: int = _DEFAULT_ORDER) -> np.ndarray:
    """Free-node vector b(u)_i = integral of |u|^{q-2} u phi_i.

    This is (1/q) times the gradient of the q-th power of the L^q norm
    with respect to the nodal coefficients.
    """
    if q <= 2:
        raise ValueError("q must be > 2")
    if not np.any(u.values):
        raise ValueError("residual requires a nonzero function")
    n = max(int(order), 2)
    coarse = _residual_accumulate(u, q, n)
    while True:
        fine = _residual_accumulate(u, q, 2 * n)
        scale = float(np.max(np.abs(fine))) or 1.0
        if float(np.max(np.abs(fine - coarse))) <= _RESIDUAL_RTOL * scale:
            return fine
        if n >= _MAX_ORDER:
            return fine
        n += 2
        coarse = _residual_accumulate(u, q, n)
