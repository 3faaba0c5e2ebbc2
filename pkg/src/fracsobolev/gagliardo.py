"""Assembly of the nonlocal bilinear form behind the fractional seminorm.

For piecewise-linear u, v vanishing outside the unit ball,

    a(u, v) = s(1-s) [ double integral over B_h x B_h of
                       (u(x)-u(y))(v(x)-v(y)) |x-y|^(-N-2s)
                       + 2 * integral of u v kappa ],

where kappa(x) integrates the kernel over the complement of the mesh
domain.  Element pairs are integrated by category: identical and
touching pairs through tensor transforms that cancel the singularity,
disjoint pairs by plain Gauss graded with distance, and the complement
weight by recursive subdivision toward the sphere where it blows up.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from functools import lru_cache
from math import gamma

import numpy as np
from scipy.interpolate import CubicSpline

from ._quad import periodic_mean, unit_gauss
from .mesh import BallMesh, FeFunction, element_geometry
from .norms import reference_rule
from .params import check_order

__all__ = [
    "AssemblyError",
    "AssemblyReport",
    "NonlocalForm",
    "QuadSpec",
    "assemble",
    "complement_weight",
    "dump_matrix",
    "seminorm_sq",
    "seminorm_sq_direct",
]

_BOUNDARY_TOL = 1e-12
_DENSE_BYTES_CAP = 2e9


class AssemblyError(RuntimeError):
    """Assembly produced an invalid matrix or local block."""


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature configuration for one assembly.

    Orders count Gauss points per direction.  ``boundary_depth`` caps
    the recursive subdivision of complement cells toward the sphere.
    """

    disjoint_order: int
    near_bonus: int = 2
    vertex_order: int = 24
    edge_order: int = 12
    angular_order: int = 24
    complement_order: int = 8
    boundary_depth: int = 12

    @classmethod
    def for_dim(cls, dim: int) -> "QuadSpec":
        if dim == 1:
            return cls(disjoint_order=4, vertex_order=24, boundary_depth=20)
        if dim == 2:
            return cls(disjoint_order=3, vertex_order=10, boundary_depth=12)
        raise ValueError("dim must be 1 or 2")

    def boosted(self) -> "QuadSpec":
        """A strictly finer configuration, used for quadrature audits."""
        return replace(
            self,
            disjoint_order=self.disjoint_order + 2,
            vertex_order=self.vertex_order + 4,
            edge_order=self.edge_order + 4,
            angular_order=self.angular_order + 16,
            complement_order=self.complement_order + 4,
            boundary_depth=self.boundary_depth + 2,
        )


@dataclass(frozen=True)
class AssemblyReport:
    """Work statistics for one assembly run."""

    pair_counts: dict
    kernel_evals: dict
    complement_cells: int
    complement_points: int
    budget_exceeded: int
    phase_seconds: dict


@dataclass(frozen=True)
class NonlocalForm:
    """Assembled bilinear form restricted to the free (interior) nodes."""

    mesh: BallMesh
    s: float
    matrix: np.ndarray
    assembly_report: AssemblyReport
    quad_spec: QuadSpec


# --------------------------------------------------------------- complement

def complement_weight(x, N: int, s: float):
    """kappa(x) = integral of |x-y|^(-N-2s) over the complement of the ball.

    Closed form on the line; on the disk an angular average of
    r*(theta)^(-2s) where r* is the distance to the sphere along each ray.
    """
    check_order(N, s)
    if N not in (1, 2):
        raise ValueError("complement weight is implemented for N in {1, 2}")
    pts = np.asarray(x, dtype=float)
    if N == 1 and (pts.ndim == 0 or pts.shape[-1] != 1):
        pts = pts[..., None]
    if pts.shape[-1] != N:
        raise ValueError(f"points must have last dimension {N}")
    radius = np.sqrt(np.sum(pts * pts, axis=-1))
    if np.any(radius >= 1.0 - _BOUNDARY_TOL):
        raise ValueError("complement weight diverges at the boundary sphere")
    if N == 1:
        t = pts[..., 0]
        return ((1.0 - t) ** (-2 * s) + (1.0 + t) ** (-2 * s)) / (2 * s)

    flat = pts.reshape(-1, 2)
    out = np.empty(len(flat))
    chunk = 512
    for lo in range(0, len(flat), chunk):
        blk = flat[lo : lo + chunk]
        rsq = np.sum(blk * blk, axis=-1, keepdims=True)

        def ray_power(theta, blk=blk, rsq=rsq):
            om = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
            dot = blk @ om.T
            root = np.sqrt(1.0 - rsq + dot * dot)
            # algebraically equivalent branches; the division form stays
            # accurate when the ray exits close to the start point
            rstar = np.where(dot < 0, root - dot, (1.0 - rsq) / (root + dot))
            return rstar ** (-2 * s)

        mean, _, _ = periodic_mean(ray_power, rtol=1e-11, n_max=16384)
        out[lo : lo + chunk] = (np.pi / s) * mean
    return out.reshape(pts.shape[:-1])


@lru_cache(maxsize=8)
def _radial_complement_table(s: float) -> CubicSpline:
    """Spline of kappa * depth^(2s) against log depth, depth = 1 - |x|.

    kappa depends on |x| only, so the angular quadrature is paid once on
    a fixed radial grid; interpolation error stays below 3e-8 relative
    for depths the cell subdivision can reach (about 1e-8 and up).
    """
    t = np.linspace(np.log(5e-12), 0.0, 3072)
    depth = np.exp(t)
    rho = 1.0 - depth
    rho[-1] = 0.0
    kap = complement_weight(np.column_stack([rho, np.zeros_like(rho)]), 2, s)
    return CubicSpline(t, kap * depth ** (2 * s))


def _kappa_fast(pts: np.ndarray, dim: int, s: float) -> np.ndarray:
    """Complement weight for assembly batches; tabulated on the disk."""
    if dim == 1:
        return complement_weight(pts, 1, s)
    radius = np.sqrt(np.sum(pts * pts, axis=-1))
    if np.any(radius >= 1.0 - _BOUNDARY_TOL):
        raise ValueError("complement weight diverges at the boundary sphere")
    depth = 1.0 - radius
    spl = _radial_complement_table(s)
    return spl(np.log(depth)) * depth ** (-2.0 * s)


def _halves_1d():
    eye = np.eye(2)
    mid = np.array([0.5, 0.5])
    return [np.stack([eye[0], mid]), np.stack([mid, eye[1]])]


def _quarters_2d():
    e = np.eye(3)
    m01, m12, m02 = (e[0] + e[1]) / 2, (e[1] + e[2]) / 2, (e[0] + e[2]) / 2
    return [
        np.stack([e[0], m01, m02]),
        np.stack([m01, e[1], m12]),
        np.stack([m02, m12, e[2]]),
        np.stack([m01, m12, m02]),
    ]


def _complement_cells(mesh: BallMesh, geo, spec: QuadSpec):
    """Subdivide elements toward the sphere until kappa is resolvable.

    Returns (element index, barycentric vertex matrix, measure fraction)
    arrays plus the count of cells still touching the sphere at the
    depth cap.
    """
    children = _halves_1d() if mesh.dim == 1 else _quarters_2d()
    cell_elem, cell_bary, cell_frac = [], [], []
    capped = 0
    for e in range(mesh.n_elements):
        verts = geo.verts[e]
        stack = [(np.eye(mesh.dim + 1), 0)]
        while stack:
            bary, depth = stack.pop()
            sub = bary @ verts
            rmax = float(np.max(np.sqrt(np.sum(sub * sub, axis=-1))))
            d = sub[:, None, :] - sub[None, :, :]
            diam = float(np.sqrt(np.max(np.sum(d * d, axis=-1))))
            if 1.0 - rmax >= diam:
                pass
            elif depth < spec.boundary_depth:
                stack.extend((c @ bary, depth + 1) for c in children)
                continue
            else:
                capped += 1
            cell_elem.append(e)
            cell_bary.append(bary)
            cell_frac.append(_measure_fraction(bary))
    return (
        np.array(cell_elem, dtype=np.int64),
        np.stack(cell_bary),
        np.array(cell_frac),
        capped,
    )


def _measure_fraction(bary: np.ndarray) -> float:
    edges = bary[1:, 1:] - bary[0, 1:]
    if edges.shape == (1, 1):
        return abs(float(edges[0, 0]))
    return 2.0 * abs(0.5 * float(np.linalg.det(edges)))


def _complement_local_blocks(mesh, s, spec, geo, counters):
    """Yield masked per-cell local blocks of C_ij = integral of phi_i phi_j kappa."""
    cell_elem, cell_bary, cell_frac, capped = _complement_cells(mesh, geo, spec)
    counters["complement_cells"] = len(cell_elem)
    counters["budget_exceeded"] = capped
    rule = reference_rule(mesh.dim, spec.complement_order)
    lam = rule.barycentric()
    ref = 1.0 if mesh.dim == 1 else 0.5
    scales = geo.measure / ref
    bmask = mesh.boundary_mask[mesh.elements]
    npts = 0
    chunk = 8192
    for lo in range(0, len(cell_elem), chunk):
        elems = cell_elem[lo : lo + chunk]
        bary = cell_bary[lo : lo + chunk]
        lam_sub = np.einsum("qa,cab->cqb", lam, bary)
        pts = np.einsum("cqa,cad->cqd", lam_sub, geo.verts[elems])
        kap = _kappa_fast(pts, mesh.dim, s)
        npts += kap.size
        local = np.einsum("q,cq,cqi,cqj->cij", rule.weights, kap, lam_sub, lam_sub)
        local *= (cell_frac[lo : lo + chunk] * scales[elems])[:, None, None]
        keep = ~bmask[elems]
        local *= keep[:, :, None] * keep[:, None, :]
        yield "complement", mesh.elements[elems], local
    counters["complement_points"] = npts


# ------------------------------------------------------------ pair category

def _classify_pairs(mesh: BallMesh, geo):
    """Split unordered distinct element pairs by shared-node topology.

    Returns (vertex, edge, near, far) pair-index arrays; "near" disjoint
    pairs sit closer than the larger of the two element diameters.
    """
    m = mesh.n_elements
    els = mesh.elements
    verts = geo.verts
    diam = geo.diameter
    I, J = np.triu_indices(m, 1)
    vertex, edge, near, far = [], [], [], []
    chunk = 1 << 16
    for lo in range(0, len(I), chunk):
        ii, jj = I[lo : lo + chunk], J[lo : lo + chunk]
        eq = els[ii][:, :, None] == els[jj][:, None, :]
        shared = eq.sum(axis=(1, 2))
        d = verts[ii][:, :, None, :] - verts[jj][:, None, :, :]
        mind = np.sqrt(np.min(np.sum(d * d, axis=-1), axis=(1, 2)))
        big = np.maximum(diam[ii], diam[jj])
        pick = lambda mask: np.stack([ii[mask], jj[mask]], axis=1)
        vertex.append(pick(shared == 1))
        edge.append(pick(shared == 2))
        near.append(pick((shared == 0) & (mind < big)))
        far.append(pick((shared == 0) & (mind >= big)))
    cat = lambda parts: np.concatenate(parts) if parts else np.zeros((0, 2), np.int64)
    return cat(vertex), cat(edge), cat(near), cat(far)


def _shared_first(els_a, els_b):
    """Reorder two node triples so the shared node leads both."""
    eq = els_a[:, :, None] == els_b[:, None, :]
    pa = np.argmax(eq.any(axis=2), axis=1)
    pb = np.argmax(eq.any(axis=1), axis=1)
    rows = np.arange(len(els_a))
    order_a = np.stack([pa, (pa + 1) % 3, (pa + 2) % 3], axis=1)
    order_b = np.stack([pb, (pb + 1) % 3, (pb + 2) % 3], axis=1)
    return els_a[rows[:, None], order_a], els_b[rows[:, None], order_b]


# ----------------------------------------------------------- local formulas

def _ident_blocks_1d(mesh, s, geo, counters):
    h = geo.measure
    g = np.stack([-1.0 / h, 1.0 / h], axis=1)
    factor = 2.0 * h ** (3 - 2 * s) / ((2 - 2 * s) * (3 - 2 * s))
    local = factor[:, None, None] * g[:, :, None] * g[:, None, :]
    counters["pair_counts"]["identical"] = mesh.n_elements
    counters["kernel_evals"]["identical"] = 0
    yield "identical", mesh.elements.copy(), local


def _vertex_blocks_1d(mesh, s, geo, pairs, spec, counters):
    counters["pair_counts"]["vertex"] = len(pairs)
    if not len(pairs):
        counters["kernel_evals"]["vertex"] = 0
        return
    mu, wmu = unit_gauss(spec.vertex_order)
    nodes_a = mesh.elements[pairs[:, 0]]
    nodes_b = mesh.elements[pairs[:, 1]]
    coords = mesh.nodes[:, 0]
    eq = nodes_a[:, :, None] == nodes_b[:, None, :]
    pa = np.argmax(eq.any(axis=2), axis=1)
    pb = np.argmax(eq.any(axis=1), axis=1)
    rows = np.arange(len(pairs))
    shared = nodes_a[rows, pa]
    other_a = nodes_a[rows, 1 - pa]
    other_b = nodes_b[rows, 1 - pb]
    # orient: left element's far node lies below the shared node
    left = np.where(coords[other_a] < coords[shared], other_a, other_b)
    right = np.where(coords[other_a] < coords[shared], other_b, other_a)
    h1 = coords[shared] - coords[left]
    h2 = coords[right] - coords[shared]
    g0 = np.stack([np.ones_like(mu), mu - 1.0, -mu])
    g1 = np.stack([mu, 1.0 - mu, -np.ones_like(mu)])
    out = np.zeros((len(pairs), 3, 3))
    for g, gap in ((g0, h1[:, None] + np.outer(h2, mu)), (g1, np.outer(h1, mu) + h2[:, None])):
        K = gap ** (-1.0 - 2 * s)
        out += np.einsum("bq,iq,jq->bij", wmu * K, g, g)
    out *= (h1 * h2 / (3 - 2 * s))[:, None, None]
    counters["kernel_evals"]["vertex"] = 2 * len(pairs) * len(mu)
    idx = np.stack([left, shared, right], axis=1)
    yield "vertex", idx, 2.0 * out


def _ident_blocks_2d(mesh, s, geo, spec, counters):
    m = mesh.n_elements
    verts = geo.verts
    grads = geo.grads
    area = geo.measure
    beta = gamma(2 - 2 * s) * gamma(3) / gamma(5 - 2 * s)
    L = np.stack([verts[:, 1] - verts[:, 0], verts[:, 2] - verts[:, 1]], axis=-1)
    xg, wg = np.polynomial.legendre.leggauss(spec.angular_order)
    total = np.zeros((m, 3, 3))
    evals = 0
    for a, b in ((0, np.pi / 4), (np.pi / 4, np.pi / 2), (np.pi / 2, np.pi)):
        th = 0.5 * (b - a) * xg + 0.5 * (a + b)
        w = 0.5 * (b - a) * wg
        om = np.stack([np.cos(th), np.sin(th)], axis=-1)
        tau = 0.5 * (np.abs(om[:, 0]) + np.abs(om[:, 1]) + np.abs(om[:, 0] - om[:, 1]))
        z = np.einsum("nc,bdc->bnd", om, L)
        kz = np.sum(z * z, axis=-1) ** (-(2 + 2 * s) / 2)
        gz = np.einsum("bkd,bnd->bkn", grads, z)
        f = kz * (tau ** (2 * s - 2) * w)
        total += np.einsum("bin,bjn,bn->bij", gz, gz, f)
        evals += m * len(th)
    local = (4.0 * beta * area * area)[:, None, None] * total
    counters["pair_counts"]["identical"] = m
    counters["kernel_evals"]["identical"] = evals
    yield "identical", mesh.elements.copy(), local


def _vertex_blocks_2d(mesh, s, geo, pairs, spec, counters):
    counters["pair_counts"]["vertex"] = len(pairs)
    if not len(pairs):
        counters["kernel_evals"]["vertex"] = 0
        return
    n = spec.vertex_order
    x01, w01 = unit_gauss(n)
    Sg, Tg, Mg = (a.ravel() for a in np.meshgrid(x01, x01, x01, indexing="ij"))
    Wg = (w01[:, None, None] * w01[None, :, None] * w01[None, None, :]).ravel()
    one = np.ones_like(Mg)
    g_br = (
        np.stack([Mg - 1, 1 - Sg, Sg, -Mg * (1 - Tg), -Mg * Tg]),
        np.stack([1 - Mg, Mg * (1 - Sg), Mg * Sg, -(1 - Tg), -Tg]),
    )
    evals = 0
    chunk = max(1, (1 << 21) // len(Mg))
    for lo in range(0, len(pairs), chunk):
        sub = pairs[lo : lo + chunk]
        na, nb = _shared_first(mesh.elements[sub[:, 0]], mesh.elements[sub[:, 1]])
        Va = mesh.nodes[na]
        Vb = mesh.nodes[nb]
        E1a, E2a = Va[:, 1] - Va[:, 0], Va[:, 2] - Va[:, 0]
        E1b, E2b = Vb[:, 1] - Vb[:, 0], Vb[:, 2] - Vb[:, 0]
        ea = np.einsum("q,bd->bqd", 1 - Sg, E1a) + np.einsum("q,bd->bqd", Sg, E2a)
        eb = np.einsum("q,bd->bqd", 1 - Tg, E1b) + np.einsum("q,bd->bqd", Tg, E2b)
        out = np.zeros((len(sub), 5, 5))
        for branch, g in enumerate(g_br):
            z = ea - Mg[None, :, None] * eb if branch == 0 else Mg[None, :, None] * ea - eb
            K = np.sum(z * z, axis=-1) ** (-(2 + 2 * s) / 2)
            out += np.einsum("bq,iq,jq->bij", (Wg * Mg) * K, g, g, optimize=True)
        area_a = geo.measure[sub[:, 0]]
        area_b = geo.measure[sub[:, 1]]
        out *= (4.0 * area_a * area_b / (4 - 2 * s))[:, None, None]
        evals += 2 * len(sub) * len(Mg)
        idx = np.column_stack([na, nb[:, 1:]])
        yield "vertex", idx, 2.0 * out
    counters["kernel_evals"]["vertex"] = evals


def _edge_subregions(n):
    x01, w01 = unit_gauss(n)
    U, Vv = (a.ravel() for a in np.meshgrid(x01, x01, indexing="ij"))
    Wsq = np.outer(w01, w01).ravel()
    tri = reference_rule(2, n)
    At, Bt = tri.points[:, 0], tri.points[:, 1]
    Wt = tri.weights
    one_t = np.ones_like(At)
    return [
        (1 - U, U, Vv, Wsq),
        (At, Bt, one_t, Wt),
        (-(1 - U), Vv, U, Wsq),
        (-At, one_t, Bt, Wt),
    ]


def _edge_blocks_2d(mesh, s, geo, pairs, spec, counters):
    counters["pair_counts"]["edge"] = len(pairs)
    if not len(pairs):
        counters["kernel_evals"]["edge"] = 0
        return
    regions = _edge_subregions(spec.edge_order)
    gs = [np.stack([-d - b + dl, d, b, -dl]) for d, b, dl, _ in regions]
    evals = 0
    chunk = 4096
    for lo in range(0, len(pairs), chunk):
        sub = pairs[lo : lo + chunk]
        na = mesh.elements[sub[:, 0]]
        nb = mesh.elements[sub[:, 1]]
        eq = na[:, :, None] == nb[:, None, :]
        apex_a = np.argmin(eq.any(axis=2), axis=1)
        apex_b = np.argmin(eq.any(axis=1), axis=1)
        rows = np.arange(len(sub))
        v1 = na[rows, (apex_a + 1) % 3]
        v2 = na[rows, (apex_a + 2) % 3]
        pa = na[rows, apex_a]
        pb = nb[rows, apex_b]
        X1 = mesh.nodes[v1]
        E = mesh.nodes[v2] - X1
        Ga = mesh.nodes[pa] - X1
        Gb = mesh.nodes[pb] - X1
        out = np.zeros((len(sub), 4, 4))
        for (d, b, dl, w), g in zip(regions, gs):
            M = (
                np.einsum("q,bd->bqd", d, E)
                + np.einsum("q,bd->bqd", b, Ga)
                - np.einsum("q,bd->bqd", dl, Gb)
            )
            K = np.sum(M * M, axis=-1) ** (-(2 + 2 * s) / 2)
            out += np.einsum("bq,iq,jq->bij", w * K, g, g, optimize=True)
            evals += len(sub) * len(d)
        area_a = geo.measure[sub[:, 0]]
        area_b = geo.measure[sub[:, 1]]
        out *= (4.0 * area_a * area_b / ((3 - 2 * s) * (4 - 2 * s)))[:, None, None]
        idx = np.column_stack([v1, v2, pa, pb])
        yield "edge", idx, 2.0 * out
    counters["kernel_evals"]["edge"] = evals


def _disjoint_blocks(mesh, s, geo, pairs, order, tag, counters):
    counters["pair_counts"][tag] = len(pairs)
    if not len(pairs):
        counters["kernel_evals"][tag] = 0
        return
    dim = mesh.dim
    rule = reference_rule(dim, order)
    lam = rule.barycentric()
    w = rule.weights
    ref = 1.0 if dim == 1 else 0.5
    scales = geo.measure / ref
    k = dim + 1
    expo = -(dim + 2 * s) / 2.0
    evals = 0
    chunk = max(1, (1 << 22) // (len(w) * len(w)))
    for lo in range(0, len(pairs), chunk):
        sub = pairs[lo : lo + chunk]
        ia, ib = sub[:, 0], sub[:, 1]
        Xa = np.einsum("qk,bkd->bqd", lam, geo.verts[ia])
        Xb = np.einsum("qk,bkd->bqd", lam, geo.verts[ib])
        D = Xa[:, :, None, :] - Xb[:, None, :, :]
        K = np.sum(D * D, axis=-1) ** expo
        evals += K.size
        row = K @ w
        col = np.einsum("p,bpq->bq", w, K)
        M1 = np.einsum("bp,p,pi,pj->bij", row, w, lam, lam)
        M2 = np.einsum("bq,q,qi,qj->bij", col, w, lam, lam)
        T = np.einsum("bpq,q,qj->bpj", K, w, lam)
        M3 = np.einsum("bpj,p,pi->bij", T, w, lam)
        block = np.empty((len(sub), 2 * k, 2 * k))
        block[:, :k, :k] = M1
        block[:, k:, k:] = M2
        block[:, :k, k:] = -M3
        block[:, k:, :k] = -np.swapaxes(M3, 1, 2)
        block *= (scales[ia] * scales[ib])[:, None, None]
        idx = np.concatenate([mesh.elements[ia], mesh.elements[ib]], axis=1)
        yield tag, idx, 2.0 * block
    counters["kernel_evals"][tag] = evals


def _pair_local_blocks(mesh, s, spec, geo, counters):
    """Yield (category, node indices, local blocks) covering B_h x B_h.

    Locals are final contributions to the double integral: unordered
    distinct pairs carry the factor 2 for the two orderings, identical
    pairs are already complete.
    """
    t0 = time.perf_counter()
    vertex, edge, near, far = _classify_pairs(mesh, geo)
    counters["phase_seconds"]["classify"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    if mesh.dim == 1:
        yield from _ident_blocks_1d(mesh, s, geo, counters)
        yield from _vertex_blocks_1d(mesh, s, geo, vertex, spec, counters)
        counters["pair_counts"]["edge"] = 0
        counters["kernel_evals"]["edge"] = 0
    else:
        yield from _ident_blocks_2d(mesh, s, geo, spec, counters)
        yield from _vertex_blocks_2d(mesh, s, geo, vertex, spec, counters)
        yield from _edge_blocks_2d(mesh, s, geo, edge, spec, counters)
    counters["phase_seconds"]["singular"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    yield from _disjoint_blocks(
        mesh, s, geo, near, spec.disjoint_order + spec.near_bonus, "disjoint_near", counters
    )
    yield from _disjoint_blocks(
        mesh, s, geo, far, spec.disjoint_order, "disjoint_far", counters
    )
    counters["phase_seconds"]["disjoint"] = time.perf_counter() - t0


def _new_counters():
    return {
        "pair_counts": {},
        "kernel_evals": {},
        "complement_cells": 0,
        "complement_points": 0,
        "budget_exceeded": 0,
        "phase_seconds": {},
    }


def _check_finite(category, local):
    if not np.all(np.isfinite(local)):
        raise AssemblyError(f"non-finite local block in {category} pair quadrature")


def assemble(mesh: BallMesh, s: float, quad_spec: QuadSpec | None = None) -> NonlocalForm:
    """Assemble the bilinear form matrix on the free nodes of the mesh."""
    check_order(mesh.dim, s)
    spec = quad_spec if quad_spec is not None else QuadSpec.for_dim(mesh.dim)
    n = mesh.n_nodes
    need = 3 * n * n * 8
    if need > _DENSE_BYTES_CAP:
        raise ValueError(
            f"dense assembly needs about {need / 1e9:.1f} GB for {n} nodes; "
            "reduce the refinement level"
        )
    geo = element_geometry(mesh)
    counters = _new_counters()
    t_total = time.perf_counter()

    flat_d = np.zeros(n * n)
    for category, idx, local in _pair_local_blocks(mesh, s, spec, geo, counters):
        _check_finite(category, local)
        pos = (idx[:, :, None] * n + idx[:, None, :]).ravel()
        flat_d += np.bincount(pos, weights=local.ravel(), minlength=n * n)

    t0 = time.perf_counter()
    flat_c = np.zeros(n * n)
    for category, idx, local in _complement_local_blocks(mesh, s, spec, geo, counters):
        _check_finite(category, local)
        pos = (idx[:, :, None] * n + idx[:, None, :]).ravel()
        flat_c += np.bincount(pos, weights=local.ravel(), minlength=n * n)
    counters["phase_seconds"]["complement"] = time.perf_counter() - t0

    full = s * (1 - s) * (flat_d + 2.0 * flat_c).reshape(n, n)
    fc = mesh.free_count
    matrix = np.ascontiguousarray(full[:fc, :fc])

    scale = float(np.max(np.abs(matrix))) or 1.0
    skew = float(np.max(np.abs(matrix - matrix.T)))
    if skew > 1e-12 * scale:
        raise AssemblyError(f"assembled matrix asymmetry {skew:.2e} exceeds tolerance")
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise AssemblyError("assembled matrix is not positive definite") from exc

    counters["phase_seconds"]["total"] = time.perf_counter() - t_total
    report = AssemblyReport(
        pair_counts=counters["pair_counts"],
        kernel_evals=counters["kernel_evals"],
        complement_cells=counters["complement_cells"],
        complement_points=counters["complement_points"],
        budget_exceeded=counters["budget_exceeded"],
        phase_seconds=counters["phase_seconds"],
    )
    return NonlocalForm(mesh=mesh, s=s, matrix=matrix, assembly_report=report, quad_spec=spec)


def seminorm_sq(form: NonlocalForm, u: FeFunction) -> float:
    """Squared fractional seminorm of the zero-extended function."""
    if u.mesh is not form.mesh:
        raise ValueError("function and form live on different meshes")
    w = u.free_values
    return float(w @ form.matrix @ w)


def seminorm_sq_direct(
    mesh: BallMesh, s: float, u: FeFunction, quad_spec: QuadSpec | None = None
) -> float:
    """Squared seminorm by direct per-block contraction, no matrix storage.

    Shares the quadrature engine with assemble; useful for meshes too
    large for a dense matrix and for independent-order audits.
    """
    check_order(mesh.dim, s)
    if u.mesh is not mesh:
        raise ValueError("function does not live on the given mesh")
    spec = quad_spec if quad_spec is not None else QuadSpec.for_dim(mesh.dim)
    geo = element_geometry(mesh)
    counters = _new_counters()
    vals = u.values
    acc = 0.0
    for category, idx, local in _pair_local_blocks(mesh, s, spec, geo, counters):
        _check_finite(category, local)
        w = vals[idx]
        acc += float(np.einsum("bij,bi,bj->", local, w, w))
    comp = 0.0
    for category, idx, local in _complement_local_blocks(mesh, s, spec, geo, counters):
        _check_finite(category, local)
        w = vals[idx]
        comp += float(np.einsum("bij,bi,bj->", local, w, w))
    return s * (1 - s) * (acc + 2.0 * comp)


def dump_matrix(form: NonlocalForm, path) -> None:
    """Write the free-node matrix as plain-text 'i j value' triplets."""
    mat = form.matrix
    with open(path, "w", encoding="ascii") as fh:
        for i in range(mat.shape[0]):
            for j in range(mat.shape[1]):
                fh.write(f"{i} {j} {float(mat[i, j])!r}\n")
