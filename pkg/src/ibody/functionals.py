"""Monte Carlo estimators for the two defect-free volume formulas of |IK|.

``estimate_I0`` evaluates the parallelotope-power limit: sample n-tuples of
uniform points of K, average Delta^p over a schedule of exponents p in
(-1, 0), scale by (p+1)/n |K|^n, and extrapolate linearly in (p+1) to 0.
``estimate_Iu`` evaluates the fiber formula: sample n-tuples of base points
in the projection of K onto u-perp, build the product R_y of their fibers,
and average Delta(y-rows)^{-1} times the central section of R_y orthogonal
to the tuple's linear-dependency direction.

Both estimators split their samples into a fixed number of independently
seeded batches: values and standard errors come from batch means, so results
are byte-identical for a given (seed, n_samples, batches) regardless of how
many workers execute the batches.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dataclass_field
from typing import Optional

import numpy as np

from .boxes import BoxUnion, box_sections_batch, box_union_section_volume
from .radon import intersection_body
from .spheregrid import unit_ball_volume
from .starbody import BodySpec, StarBody, materialize, volume
from .steiner import line_fibers
from .spheregrid import orthonormal_complement

DEFAULT_P_SCHEDULE = (-0.90, -0.95, -0.975, -0.99)
DEFAULT_BATCHES = 64


@dataclass
class MCEstimate:
    """Monte Carlo estimate with batch-based standard error."""

    value: float
    std_error: float
    n_samples: int
    seed: int
    p_schedule: Optional[tuple] = None
    diagnostics: dict = dataclass_field(default_factory=dict)

    def agrees_with(self, other_value: float, other_se: float = 0.0,
                    sigmas: float = 3.0) -> bool:
        combined = np.hypot(self.std_error, other_se)
        return abs(self.value - other_value) <= sigmas * combined


def _batch_seeds(seed: int, batches: int):
    return np.random.SeedSequence(seed).spawn(batches)


def _batch_sizes(total: int, batches: int):
    base, extra = divmod(total, batches)
    return [base + (1 if i < extra else 0) for i in range(batches)]


def _run_batches(fn, args_list, workers: int):
    if workers <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, args_list, chunksize=max(1, len(args_list) // (4 * workers))))


def sample_in_body(body: StarBody, rng: np.random.Generator, size: int) -> np.ndarray:
    """Uniform points of K: polar proposals in the circumscribed ball, thinned
    to K by the gauge test.

    A plain polar draw (uniform direction, radius rho U^{1/n}) is uniform only
    on balls; rejection from the circumball keeps the density exactly uniform
    for every star body.
    """
    n = body.dim
    r_max = body.circumradius()
    accept_frac = float(body.grid.weights @ (body.rho / r_max) ** n)
    out = np.empty((size, n))
    filled = 0
    while filled < size:
        need = size - filled
        draw = int(need / accept_frac * 1.2) + 16
        dirs = rng.standard_normal((draw, n))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        radii = r_max * rng.random(draw) ** (1.0 / n)
        accept = radii <= body.rho_at(dirs)
        pts = dirs[accept] * radii[accept, None]
        take = min(len(pts), need)
        out[filled: filled + take] = pts[:take]
        filled += take
    return out


# -- I0: the Delta^p limit ---------------------------------------------

def _i0_batch_uniform(args):
    body, p_schedule, m, child_seed, _vol = args
    rng = np.random.default_rng(child_seed)
    n = body.dim
    delta = np.empty(m)
    pts = sample_in_body(body, rng, m * n).reshape(m, n, n)
    delta[:] = np.abs(np.linalg.det(pts))
    while True:                         # exactly dependent tuples have measure zero
        zero = delta == 0.0
        if not zero.any():
            break
        k = int(zero.sum())
        redraw = sample_in_body(body, rng, k * n).reshape(k, n, n)
        delta[zero] = np.abs(np.linalg.det(redraw))
    return np.array([np.mean(delta ** p) for p in p_schedule])


_IS_PLANE_FRACTION = 0.5


def _i0_batch_importance(args):
    """Importance-sampled batch: K^n integral of Delta^p with the last point's
    direction drawn from a mixture tilted toward the span of the others.

    The singular factor of Delta^p is |<x_n, nu>|^p with nu the unit normal of
    span(x_1..x_{n-1}); drawing W = <theta_n, nu> from density ~ |W|^{p_min}
    (exact inverse CDF) and reweighting by the uniform-to-mixture density
    ratio gives finite variance for every p in (-1, 0).
    """
    body, p_schedule, m, child_seed, vol = args
    rng = np.random.default_rng(child_seed)
    n = body.dim
    p_min = min(p_schedule)
    beta = _IS_PLANE_FRACTION
    log_surf_sub = math.log((n - 1) * unit_ball_volume(n - 1))    # log |S^{n-2}|
    log_unif = -math.log(n * unit_ball_volume(n))                 # log 1/|S^{n-1}|

    first = sample_in_body(body, rng, m * (n - 1)).reshape(m, n - 1, n)
    _, sing, vt = np.linalg.svd(first)
    nu = vt[:, -1, :]                                  # unit normal of the span
    frame = vt[:, : n - 1, :]                          # orthonormal basis of the span
    with np.errstate(divide="ignore"):
        log_delta_first = np.log(np.prod(sing, axis=1))

    # |W| spans hundreds of orders of magnitude for p_min near -1, so the
    # whole density bookkeeping stays in log space
    plane_branch = rng.random(m) < beta
    log_w = np.empty(m)
    theta = np.empty((m, n))

    k = int(plane_branch.sum())
    if k:
        log_w_plane = np.log(rng.random(k)) / (1.0 + p_min)
        w = np.exp(log_w_plane) * np.sign(rng.random(k) - 0.5)
        e_raw = rng.standard_normal((k, n - 1))
        e_raw /= np.linalg.norm(e_raw, axis=1, keepdims=True)
        e = np.einsum("ij,ijk->ik", e_raw, frame[plane_branch])
        theta[plane_branch] = (np.sqrt(np.maximum(1.0 - w ** 2, 0.0))[:, None] * e
                               + w[:, None] * nu[plane_branch])
        log_w[plane_branch] = log_w_plane
    rest = ~plane_branch
    k2 = int(rest.sum())
    if k2:
        raw = rng.standard_normal((k2, n))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        theta[rest] = raw
        with np.errstate(divide="ignore"):
            log_w[rest] = np.log(np.abs(np.einsum("ij,ij->i", raw, nu[rest])))

    rho = body.rho_at(theta)
    radius = rho * rng.random(m) ** (1.0 / n)

    w_sq = np.minimum(np.exp(2.0 * log_w), 1.0)
    log_f = n * np.log(rho) - math.log(n * vol)
    log_g = (math.log((1.0 + p_min) / 2.0) + p_min * log_w
             - ((n - 3) / 2.0) * np.log1p(-np.minimum(w_sq, 1.0 - 1e-15))
             - log_surf_sub)
    log_q = np.logaddexp(math.log(1.0 - beta) + log_unif,
                         math.log(beta) + log_g)

    log_delta = log_delta_first + np.log(radius) + log_w
    good = np.isfinite(log_delta)
    out = np.empty(len(p_schedule))
    for i, p in enumerate(p_schedule):
        log_vals = p * log_delta + log_f - log_q
        vals = np.where(good, np.exp(np.where(good, log_vals, 0.0)), 0.0)
        out[i] = float(vals.mean())
    return out


def _extrapolate(x, y):
    """Least-squares line through (x, y), returning the intercept at x = 0."""
    coeffs = np.polynomial.polynomial.polyfit(x, y, 1)
    return coeffs[0]


def estimate_I0(body: StarBody, p_schedule=DEFAULT_P_SCHEDULE,
                n_samples: int = 1_000_000, seed: int = 0,
                batches: int = DEFAULT_BATCHES, workers: int = 1,
                importance: bool = True) -> MCEstimate:
    """Estimate |IK| from the parallelotope-power limit.

    For each p the estimator evaluates (p+1)/n |K|^n E[Delta(x_1..x_n)^p]
    over n-tuples of uniform points of K; the p-curve is extrapolated
    linearly in (p+1) -> 0 batch by batch, and the spread of batch intercepts
    gives the standard error.

    With ``importance=True`` (the default) the last point is drawn from a
    plane-tilted mixture and reweighted, which keeps the variance finite all
    the way to p -> -1.  ``importance=False`` is the plain uniform-tuple
    estimator; its sample mean is badly heavy-tailed below p ~ -0.5 and is
    kept for comparison runs only.
    """
    p_schedule = tuple(sorted(p_schedule, reverse=True))
    if any(not -1.0 < p < 0.0 for p in p_schedule):
        raise ValueError("p schedule must lie in (-1, 0)")
    n = body.dim
    vol = volume(body)
    scale_factor = vol ** n / n
    sizes = _batch_sizes(n_samples, batches)
    seeds = _batch_seeds(seed, batches)
    args = [(body, p_schedule, m, s, vol) for m, s in zip(sizes, seeds)]
    batch_fn = _i0_batch_importance if importance else _i0_batch_uniform
    means = _run_batches(batch_fn, args, workers)

    ps = np.asarray(p_schedule)
    x = 1.0 + ps
    per_batch = np.array([
        _extrapolate(x, scale_factor * (1.0 + ps) * mb) for mb in means])
    value = float(per_batch.mean())
    std_error = float(per_batch.std(ddof=1) / np.sqrt(batches))

    pooled = np.average(np.stack(means), axis=0, weights=sizes)
    p_curve = (scale_factor * (1.0 + ps) * pooled).tolist()
    monotone = bool(np.all(np.diff(p_curve) >= 0) or np.all(np.diff(p_curve) <= 0))
    return MCEstimate(value=value, std_error=std_error, n_samples=n_samples,
                      seed=seed, p_schedule=p_schedule,
                      diagnostics={"p_curve": p_curve, "p_curve_monotone": monotone})


# -- Iu: the fiber-rectangle formula -----------------------------------

def projection_radius(body: StarBody, u: np.ndarray) -> float:
    """Circumradius of the projection of K onto u-perp (from boundary samples)."""
    u = np.asarray(u, dtype=float)
    boundary = body.rho[:, None] * body.grid.nodes
    proj = boundary - np.outer(boundary @ u, u)
    return float(np.linalg.norm(proj, axis=1).max()) * (1.0 + 1e-9)


def _iu_batch(args):
    (body, u, basis, r_proj, m, child_seed, s_res, bisect_tol) = args
    rng = np.random.default_rng(child_seed)
    n = body.dim
    k = n - 1
    total = 0.0
    total_sq = 0.0
    degenerate = 0
    filled = 0
    remaining = m
    while remaining > 0:
        chunk = remaining
        # propose n base points per tuple, uniform in the (n-1)-disc
        raw = rng.standard_normal((chunk * n, k))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        ys = raw * (r_proj * rng.random(chunk * n) ** (1.0 / k))[:, None]
        fibers = line_fibers(body, u, basis, ys, s_res=s_res, bisect_tol=bisect_tol)
        present = np.array([f is not None for f in fibers]).reshape(chunk, n)
        valid = present.all(axis=1)

        ys_t = ys.reshape(chunk, n, k)
        contrib = np.zeros(chunk)
        idx_valid = np.nonzero(valid)[0]
        if len(idx_valid):
            mats = ys_t[idx_valid].transpose(0, 2, 1)         # (V, n-1, n)
            _, s, vt = np.linalg.svd(mats)
            bad = s[:, -1] < 1e-10 * np.maximum(s[:, 0], 1.0)
            theta = vt[:, -1, :]
            delta_rows = np.prod(s, axis=1)

            simple = np.array([all(len(fibers[i * n + j]) == 1 for j in range(n))
                               for i in idx_valid])
            centers = np.zeros((len(idx_valid), n))
            halves = np.ones((len(idx_valid), n))
            for row, i in enumerate(idx_valid):
                if simple[row]:
                    for j in range(n):
                        a, b = fibers[i * n + j].intervals[0]
                        centers[row, j] = 0.5 * (a + b)
                        halves[row, j] = 0.5 * (b - a)
            sections = np.zeros(len(idx_valid))
            if simple.any():
                sections[simple] = box_sections_batch(
                    centers[simple], halves[simple], theta[simple],
                    np.zeros(int(simple.sum())))
            for row, i in enumerate(idx_valid):
                if not simple[row]:
                    union = BoxUnion.from_interval_product(
                        [fibers[i * n + j] for j in range(n)])
                    sections[row] = box_union_section_volume(union, theta[row])
            vals = np.where(bad, 0.0, sections / np.where(bad, 1.0, delta_rows))
            degenerate += int(bad.sum())
            contrib[idx_valid] = vals
            # degenerate tuples are redrawn rather than averaged as zero
            keep = np.ones(chunk, dtype=bool)
            keep[idx_valid[bad]] = False
        else:
            keep = np.ones(chunk, dtype=bool)
        kept = contrib[keep]
        total += float(kept.sum())
        total_sq += float((kept ** 2).sum())
        filled += int(keep.sum())
        remaining = m - filled
    disc_vol = unit_ball_volume(k) * r_proj ** k
    factor = 2.0 / n * disc_vol ** n
    mean = total / m
    var = max(total_sq / m - mean ** 2, 0.0)
    return factor * mean, factor * np.sqrt(var / m), degenerate


def estimate_Iu(body: StarBody, u: np.ndarray, n_samples: int = 50_000,
                seed: int = 0, batches: int = DEFAULT_BATCHES,
                s_res: int = 96, bisect_tol: float = 1e-8,
                workers: int = 1) -> MCEstimate:
    """Estimate |IK| from the fiber formula in direction u.

    Base tuples are proposed uniformly in the disc of the projection's
    circumradius; tuples with a base point outside the projection (detected
    by an empty fiber) contribute zero, so the estimator is unbiased without
    a separate projection-volume estimate.  Nearly dependent tuples are
    redrawn and counted; a rate above 1% is flagged in the diagnostics.
    """
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    basis = orthonormal_complement(u)
    r_proj = projection_radius(body, u)
    sizes = _batch_sizes(n_samples, batches)
    seeds = _batch_seeds(seed, batches)
    args = [(body, u, basis, r_proj, m, s, s_res, bisect_tol)
            for m, s in zip(sizes, seeds)]
    results = _run_batches(_iu_batch, args, workers)

    values = np.array([r[0] for r in results])
    weights = np.asarray(sizes, dtype=float)
    value = float(np.average(values, weights=weights))
    std_error = float(values.std(ddof=1) / np.sqrt(len(values)))
    degenerate = int(sum(r[2] for r in results))
    rate = degenerate / n_samples
    diag = {"degenerate_rate": rate, "r_proj": r_proj}
    if rate > 0.01:
        diag["warning"] = "degenerate-sample rate exceeds 1%"
    return MCEstimate(value=value, std_error=std_error, n_samples=n_samples,
                      seed=seed, diagnostics=diag)


def busemann_gap(body: StarBody, circle_resolution: Optional[int] = None):
    """(|IK|, |I B_K|, gap) with B_K the centered ball of equal volume.

    Both sides run through the same quadrature pipeline; the gap is
    non-negative up to discretization noise, zero exactly for balls, zero for
    centered ellipsoids, and strictly positive otherwise.
    """
    lhs = volume(intersection_body(body, circle_resolution))
    n = body.dim
    radius = (volume(body) / unit_ball_volume(n)) ** (1.0 / n)
    ball = materialize(BodySpec.ball(radius), body.grid,
                       interpolation=body.interpolation, interp_k=body.interp_k)
    rhs = volume(intersection_body(ball, circle_resolution))
    return lhs, rhs, rhs - lhs
