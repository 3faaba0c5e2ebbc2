"""Rate sweeps, slope fits, and inequality audits over the assembled pipeline.

Each sweep produces plain records that serialize to CSV losslessly
(floats written with repr round-trip exactly).  Sampling operations take
an explicit seed and report it, so every run is reproducible.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, fields

import numpy as np

from .bubble import Bubble, normalize_lambda, truncated_bubble
from .gagliardo import (
    QuadSpec,
    _ident_blocks_1d,
    _ident_blocks_2d,
    assemble,
    seminorm_sq_direct,
)
from .mesh import BallMesh, FeFunction, build_mesh, element_geometry, interpolate
from .norms import lq_norm, reference_rule
from .params import (
    check_order,
    exact_constant,
    optimal_concentration,
    problem_params,
    rate_exponent,
)
from .solver import default_start, fit_manifold, quotient, solve

__all__ = [
    "RNG_NAME",
    "InterpRates",
    "RateFit",
    "SweepRecord",
    "SweepResult",
    "discrete_constant_sweep",
    "fit_rate",
    "make_rng",
    "read_records",
    "upper_bound_sweep",
    "verify_covering",
    "verify_functional_inequalities",
    "verify_interp_error",
    "verify_minimizing_sequence",
    "write_records",
]

RNG_NAME = "pcg64"


def make_rng(seed: int) -> np.random.Generator:
    """Seeded 64-bit generator; the algorithm name is RNG_NAME."""
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass(frozen=True)
class SweepRecord:
    """One sweep level: mesh size, profile concentration, measured value."""

    level: int
    h: float
    c_h: float
    value: float
    slack: float
    wall_time: float


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through (log h, log value)."""

    slope: float
    intercept: float
    r_squared: float
    points_used: int


@dataclass(frozen=True)
class SweepResult:
    """Records plus the fitted rate; per-level failures listed, not raised."""

    records: list
    fit: RateFit | None
    failures: list
    details: dict


@dataclass(frozen=True)
class InterpRates:
    """Fitted interpolation-error rates in h and in the concentration."""

    lq_h: RateFit
    grad_h: RateFit
    lq_c: RateFit
    details: dict


def fit_rate(points) -> RateFit:
    """Fit value ~ C * h^slope by least squares on logs.

    Rejects non-positive values and fewer than 3 points.  Callers remove
    outliers themselves; no point is dropped here.
    """
    pts = [(float(h), float(v)) for h, v in points]
    if len(pts) < 3:
        raise ValueError("rate fit needs at least 3 points")
    if any(h <= 0 for h, _ in pts):
        raise ValueError("abscissae must be positive")
    if any(v <= 0 for _, v in pts):
        raise ValueError("rate fit requires positive values")
    x = np.log([h for h, _ in pts])
    y = np.log([v for _, v in pts])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_sq = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return RateFit(float(slope), float(intercept), r_sq, len(pts))


# ------------------------------------------------------------------ CSV

_CSV_HEADER = ",".join(f.name for f in fields(SweepRecord))


def write_records(path, records) -> None:
    """Write sweep records as CSV; floats use repr so parsing is exact."""
    hs = [r.h for r in records]
    if any(b >= a for a, b in zip(hs, hs[1:])):
        raise ValueError("records must have strictly decreasing h")
    lines = [_CSV_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [str(r.level)]
                + [repr(float(v)) for v in (r.h, r.c_h, r.value, r.slack, r.wall_time)]
            )
        )
    with open(path, "w") as f:
        f.write("\n".join(lines) + "\n")


def read_records(path) -> list:
    """Parse a CSV written by write_records; exact round trip."""
    with open(path) as f:
        lines = [ln.strip() for ln in f if ln.strip()]
    if not lines or lines[0] != _CSV_HEADER:
        raise ValueError(f"expected header {_CSV_HEADER!r}")
    out = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 6:
            raise ValueError(f"malformed record line: {ln!r}")
        out.append(
            SweepRecord(
                int(parts[0]),
                *(float(p) for p in parts[1:]),
            )
        )
    return out


# ---------------------------------------------------------------- sweeps


def _check_levels(levels) -> list:
    levels = [int(l) for l in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    return levels


def upper_bound_sweep(N: int, s: float, levels, quad_spec=None) -> SweepResult:
    """Deficit of the interpolated balanced-concentration profile per level.

    The theory predicts deficit ~ h^alpha for the concentration choice
    c_h = optimal_concentration(h); the fitted slope estimates alpha.
    """
    check_order(N, s)
    levels = _check_levels(levels)
    q = problem_params(N, s).two_star
    S = exact_constant(N, s)
    spec = quad_spec if quad_spec is not None else QuadSpec.for_dim(N)
    records, failures = [], []
    for lev in levels:
        t0 = time.perf_counter()
        try:
            mesh = build_mesh(N, lev)
            c_h = optimal_concentration(mesh.h, N, s)
            lam = normalize_lambda(c_h, N, s)
            u = interpolate(mesh, truncated_bubble(lam, c_h, N, s))
            value = seminorm_sq_direct(mesh, s, u, spec) / lq_norm(u, q) ** 2 - S
            boosted = (
                seminorm_sq_direct(mesh, s, u, spec.boosted())
                / lq_norm(u, q, order=12) ** 2
                - S
            )
            records.append(
                SweepRecord(
                    level=lev,
                    h=mesh.h,
                    c_h=c_h,
                    value=value,
                    slack=abs(boosted - value),
                    wall_time=time.perf_counter() - t0,
                )
            )
        except Exception as exc:  # noqa: BLE001 - failures are data here
            failures.append((lev, f"{type(exc).__name__}: {exc}"))
    if len(records) < 3:
        raise RuntimeError(
            f"only {len(records)} levels succeeded, need 3 for a rate fit; "
            f"failures: {failures}"
        )
    if any(r.value <= 0 for r in records):
        raise RuntimeError("a recorded deficit is non-positive; quadrature suspect")
    fit = fit_rate([(r.h, r.value) for r in records])
    return SweepResult(records, fit, failures, {"alpha": rate_exponent(N, s)})


def discrete_constant_sweep(
    N: int, s: float, levels, tol: float = 1e-10, quad_spec=None
) -> SweepResult:
    """Gap of the minimized discrete constant above the sharp one, per level.

    Also fits the profile concentration of each minimizer; its regression
    against h is reported in details (the balancing heuristic predicts
    slope 2(2-s)/(N+4(1-s)), recorded for inspection, not asserted).
    """
    check_order(N, s)
    levels = _check_levels(levels)
    S = exact_constant(N, s)
    records, failures = [], []
    details: dict = {
        "s_h": [],
        "warm_deficit": [],
        "converged": [],
        "c_fit": [],
        "fit_centers": [],
    }
    for lev in levels:
        t0 = time.perf_counter()
        try:
            mesh = build_mesh(N, lev)
            form = assemble(mesh, s, quad_spec)
            warm = default_start(form)
            warm_q = quotient(form, warm)
            rep = solve(form, init=warm, tol=tol)
            if rep.s_h > warm_q:
                raise RuntimeError("minimization worsened the warm start")
            mf = fit_manifold(form, rep.minimizer)
            records.append(
                SweepRecord(
                    level=lev,
                    h=mesh.h,
                    c_h=optimal_concentration(mesh.h, N, s),
                    value=rep.s_h - S,
                    slack=rep.quadrature_slack,
                    wall_time=time.perf_counter() - t0,
                )
            )
            details["s_h"].append(rep.s_h)
            details["warm_deficit"].append(warm_q - S)
            details["converged"].append(rep.converged)
            details["c_fit"].append(mf.concentration)
            details["fit_centers"].append(mf.center)
        except Exception as exc:  # noqa: BLE001
            failures.append((lev, f"{type(exc).__name__}: {exc}"))
    if len(records) < 3:
        raise RuntimeError(
            f"only {len(records)} levels succeeded, need 3 for a rate fit; "
            f"failures: {failures}"
        )
    gaps = [r.value for r in records]
    if any(g <= r.slack for g, r in zip(gaps, records)):
        raise RuntimeError("a gap is not positive beyond quadrature slack")
    if any(b > a for a, b in zip(gaps, gaps[1:])):
        raise RuntimeError("gaps increased under refinement; nestedness violated")
    fit = fit_rate([(r.h, r.value) for r in records])
    if fit.slope <= 0:
        raise RuntimeError("fitted gap slope is not positive")
    details["c_fit_regression"] = fit_rate(
        [(r.h, c) for r, c in zip(records, details["c_fit"])]
    )
    details["alpha"] = rate_exponent(N, s)
    return SweepResult(records, fit, failures, details)


# ----------------------------------------------- interpolation-error rates


def _element_quad_points(mesh: BallMesh, order: int):
    geo = element_geometry(mesh)
    rule = reference_rule(mesh.dim, order)
    bary = rule.barycentric()
    verts = geo.verts
    pts = np.einsum("qa,bad->bqd", bary, verts)
    scale = geo.measure / rule.weights.sum()
    return geo, rule, bary, pts, scale


def _interp_errors(mesh, psi, u, q, p, order=10):
    """(L^q error, L^p gradient error) of psi minus its interpolant."""
    geo, rule, bary, pts, scale = _element_quad_points(mesh, order)
    flat = pts.reshape(-1, mesh.dim)
    exact = psi.evaluate(flat).reshape(pts.shape[:2])
    u_elem = u.values[mesh.elements]
    approx = np.einsum("qa,ba->bq", bary, u_elem)
    err_q = float(
        np.sum(scale * (np.abs(exact - approx) ** q @ rule.weights))
    ) ** (1.0 / q)

    grad_exact = psi.gradient(flat).reshape(*pts.shape[:2], mesh.dim)
    grad_fe = np.einsum("bad,ba->bd", geo.grads, u_elem)
    diff = grad_exact - grad_fe[:, None, :]
    mags = np.sqrt(np.sum(diff * diff, axis=-1))
    err_p = float(np.sum(scale * (mags**p @ rule.weights))) ** (1.0 / p)
    return err_q, err_p


def verify_interp_error(
    N: int, s: float, q: float, c: float, levels, p: float = 2.0, c_list=None
) -> InterpRates:
    """Measured interpolation-error rates for the truncated profile.

    Fixed concentration, refining mesh: the L^q error decays like h^2 and
    the gradient error like h; fixed fine mesh, shrinking concentration:
    the L^q error grows like c^-(N/2 - N/q + 2 - s).  Profiles carry the
    unit-critical-norm amplitude so the c-regression matches that exponent.
    """
    check_order(N, s)
    if q < 1:
        raise ValueError("q must be >= 1")
    levels = _check_levels(levels)
    h_pts, g_pts = [], []
    for lev in levels:
        mesh = build_mesh(N, lev)
        if mesh.h > c / 4:
            raise ValueError(f"level {lev}: h={mesh.h:.4g} too coarse for c={c}")
        lam = normalize_lambda(c, N, s)
        psi = truncated_bubble(lam, c, N, s)
        u = interpolate(mesh, psi)
        err_q, err_p = _interp_errors(mesh, psi, u, q, p)
        h_pts.append((mesh.h, err_q))
        g_pts.append((mesh.h, err_p))

    fine = build_mesh(N, levels[-1] + 1)
    if c_list is None:
        c_list = [2.0**-k for k in range(2, 6)]
    c_pts = []
    for cj in c_list:
        lam = normalize_lambda(cj, N, s)
        psi = truncated_bubble(lam, cj, N, s)
        u = interpolate(fine, psi)
        err_q, _ = _interp_errors(fine, psi, u, q, p)
        c_pts.append((cj, err_q))

    return InterpRates(
        lq_h=fit_rate(h_pts),
        grad_h=fit_rate(g_pts),
        lq_c=fit_rate(c_pts),
        details={
            "h_points": h_pts,
            "grad_points": g_pts,
            "c_points": c_pts,
            "expected_c_slope": -(N / 2 - N / q + 2 - s),
            "fine_level": levels[-1] + 1,
        },
    )


# --------------------------------------------------------- covering audit


def _unit_directions(rng, n, dim):
    v = rng.standard_normal((n, dim))
    norms = np.linalg.norm(v, axis=1, keepdims=True)
    small = norms[:, 0] < 1e-12
    v[small] = np.eye(dim)[0]
    norms[small] = 1.0
    return v / norms


def verify_covering(N: int, s: float, samples: int, seed: int = 0) -> dict:
    """Check a fixed direction dictionary sees the profile's curvature scale.

    For random concentrations, centers, and evaluation points, the largest
    second derivative over the dictionary is compared with the natural
    envelope (|amp|/c^2)(1 + w^2)^{-(N-2s+2)/2}; the minimum ratio stays
    positive.  In 1D the radii where the only second derivative changes
    sign are excluded by construction (the relative radius band (1/2, 1)).
    """
    check_order(N, s)
    if samples < 1000:
        raise ValueError("need at least 1000 samples")
    rng = make_rng(seed)

    c = np.exp(rng.uniform(np.log(0.05), np.log(1.0), samples))
    centers = _unit_directions(rng, samples, N) * rng.uniform(
        0.0, 1.0, (samples, 1)
    ) ** (1.0 / N)
    w = np.exp(rng.uniform(np.log(0.01), np.log(4.0), samples))
    if N == 1:
        for _ in range(200):
            bad = (w > 0.5) & (w < 1.0)
            if not bad.any():
                break
            w[bad] = np.exp(rng.uniform(np.log(0.01), np.log(4.0), int(bad.sum())))
    dirs = _unit_directions(rng, samples, N)
    x = centers + (c * w)[:, None] * dirs

    ratios = np.full(samples, np.inf)
    for i in range(samples):
        b = Bubble(N, s, 1.0, float(c[i]), centers[i])
        H = b.hessian(x[i])
        env = float(b.hessian_envelope(x[i]))
        if N == 1:
            best = abs(float(H[0, 0]))
        else:
            d = x[i] - centers[i]
            r = np.linalg.norm(d)
            radial = d / r if r > 0 else np.array([1.0, 0.0])
            angles = np.arange(16) * np.pi / 16.0
            dict_dirs = np.vstack(
                [np.eye(2), radial, np.column_stack([np.cos(angles), np.sin(angles)])]
            )
            best = float(np.max(np.abs(np.einsum("ki,ij,kj->k", dict_dirs, H, dict_dirs))))
        ratios[i] = best / env

    half = samples // 2
    min_half = float(ratios[:half].min())
    min_full = float(ratios.min())
    return {
        "dim": N,
        "s": s,
        "samples": samples,
        "seed": seed,
        "rng": RNG_NAME,
        "min_ratio": min_full,
        "min_ratio_half": min_half,
        "doubling_change": abs(min_full - min_half) / min_full,
    }


# ------------------------------------------------- minimizing-sequence audit

_MAX_PROXY_LEVEL = {1: 12, 2: 4}


def verify_minimizing_sequence(N: int, s: float, eps_list) -> dict:
    """Quotients of interpolated truncated profiles along shrinking widths.

    One fixed mesh fine enough for the sharpest width (h <= min(eps)/4)
    serves as the evaluation proxy; the quotient decreases along the list
    and the deficit scales like eps^(N-2s).
    """
    check_order(N, s)
    eps = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    if eps[0] >= 1 / 3 or eps[-1] <= 0:
        raise ValueError("widths must lie in (0, 1/3)")

    level, mesh = None, None
    for lev in range(1, _MAX_PROXY_LEVEL[N] + 1):
        cand = build_mesh(N, lev)
        if cand.h <= min(eps) / 4:
            level, mesh = lev, cand
            break
    if mesh is None:
        raise ValueError(
            f"no affordable mesh reaches h <= {min(eps) / 4:.4g} for dim {N}"
        )

    form = assemble(mesh, s)
    S = exact_constant(N, s)
    gaps = []
    for e in eps:
        lam = normalize_lambda(e, N, s)
        u = interpolate(mesh, truncated_bubble(lam, e, N, s))
        gaps.append(quotient(form, u) - S)
    ratios = [a / b for a, b in zip(gaps, gaps[1:])]
    return {
        "dim": N,
        "s": s,
        "level": level,
        "h": mesh.h,
        "eps": eps,
        "gaps": gaps,
        "ratios": ratios,
        "monotone": all(b < a for a, b in zip(gaps, gaps[1:])),
        "expected_halving_ratio": 2.0 ** (N - 2 * s),
    }


# ---------------------------------------------- functional-inequality audit


def _broken_gradient_l2(u: FeFunction) -> float:
    geo = element_geometry(u.mesh)
    vals = u.values[u.mesh.elements]
    grads = np.einsum("bad,ba->bd", geo.grads, vals)
    return float(np.sqrt(np.sum(geo.measure * np.sum(grads * grads, axis=1))))


def _element_self_interaction(mesh: BallMesh, s: float) -> np.ndarray:
    """Raw per-element double integrals of the squared-difference kernel."""
    counters = {"pair_counts": {}, "kernel_evals": {}}
    geo = element_geometry(mesh)
    if mesh.dim == 1:
        gen = _ident_blocks_1d(mesh, s, geo, counters)
    else:
        gen = _ident_blocks_2d(mesh, s, geo, QuadSpec.for_dim(2), counters)
    _, _, local = next(gen)
    return local


def _poincare_max_ratio(mesh, s, funcs) -> float:
    geo = element_geometry(mesh)
    locals_ = _element_self_interaction(mesh, s)
    const = geo.diameter ** (mesh.dim + 2 * s) / geo.measure
    rule = reference_rule(mesh.dim, 2)
    bary = rule.barycentric()
    scale = geo.measure / rule.weights.sum()
    worst = 0.0
    for u in funcs:
        vals = u.values[mesh.elements]
        at_pts = np.einsum("qa,ba->bq", bary, vals)
        mean = (at_pts @ rule.weights) / rule.weights.sum()
        lhs = scale * (((at_pts - mean[:, None]) ** 2) @ rule.weights)
        rhs = const * np.einsum("bij,bi,bj->b", locals_, vals, vals)
        floor = 1e-14 * float(np.max(vals * vals) + 1.0)
        keep = rhs > floor
        if keep.any():
            worst = max(worst, float(np.max(lhs[keep] / rhs[keep])))
    return worst


def _cube_norms(b: Bubble, side: float, p: float, order: int = 16):
    x1, w1 = np.polynomial.legendre.leggauss(order)
    x1 = 0.5 * side * x1
    w1 = 0.5 * side * w1
    if b.dim == 1:
        pts = x1[:, None]
        wts = w1
    else:
        X, Y = np.meshgrid(x1, x1, indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        wts = np.outer(w1, w1).ravel()
    u = np.abs(b.evaluate(pts))
    g = np.linalg.norm(b.gradient(pts), axis=-1)
    hess = b.hessian(pts)
    h = np.sqrt(np.sum(hess * hess, axis=(-2, -1)))
    norm = lambda f: float(np.sum(wts * f**p)) ** (1.0 / p)
    return norm(u), norm(g), norm(h)


def verify_functional_inequalities(
    N: int, s: float, sample_functions, seed: int = 0
) -> dict:
    """Audit the three workhorse inequalities on concrete functions.

    (i) interpolation between L^2 and the gradient norm with exponent s,
    checked on the given finite-element samples through the assembled
    quadratic form; (ii) the per-element Poincare inequality with its
    explicit constant, a hard bound; (iii) the cube inequality bounding
    the gradient by the function and its second derivatives, fitted on
    smooth profiles since piecewise-linear functions have no integrable
    second derivative.
    """
    check_order(N, s)
    funcs = list(sample_functions)
    if not funcs:
        raise ValueError("need at least one sample function")
    mesh = funcs[0].mesh
    for u in funcs:
        if u.mesh is not mesh:
            raise ValueError("all samples must share one mesh")
        if not np.any(u.values):
            raise ValueError("samples must be nonzero")

    form = assemble(mesh, s)
    A = form.matrix
    gn = []
    for u in funcs:
        w = u.free_values
        lhs = np.sqrt(max(float(w @ (A @ w)), 0.0) / (s * (1 - s)))
        l2 = lq_norm(u, 2.0)
        gr = _broken_gradient_l2(u)
        gn.append(lhs / (l2 ** (1 - s) * gr**s))
    half = max(1, len(gn) // 2)
    gn_half = float(np.max(gn[:half]))
    gn_full = float(np.max(gn))

    poincare = _poincare_max_ratio(mesh, s, funcs)

    rng = make_rng(seed)
    cubes = {}
    profiles = [
        Bubble(
            N,
            s,
            1.0,
            float(np.exp(rng.uniform(np.log(0.3), np.log(1.5)))),
            _unit_directions(rng, 1, N)[0] * rng.uniform(0.0, 0.5),
        )
        for _ in range(8)
    ]
    for side in (1.0, 0.5, 0.25):
        fitted = 0.0
        for b in profiles:
            nu, ng, nh = _cube_norms(b, side, p=2.0)
            fitted = max(fitted, float(ng / (nu / side + np.sqrt(nu * nh))))
        cubes[side] = fitted
    vals = list(cubes.values())

    return {
        "dim": N,
        "s": s,
        "n_samples": len(funcs),
        "seed": seed,
        "rng": RNG_NAME,
        "gn_max_ratio": gn_full,
        "gn_max_ratio_half": gn_half,
        "gn_doubling_change": abs(gn_full - gn_half) / gn_full,
        "poincare_max_ratio": poincare,
        "poincare_holds": poincare <= 1.0,
        "cube_constants": cubes,
        "cube_spread": max(vals) / min(vals),
    }
