"""Spherical Radon (Funk) transform and the intersection-body operator.

The transform averages a field over the great subsphere orthogonal to each
grid node.  The intersection-body operator follows from it in polar
coordinates: the radial function of IK at u is omega_{n-1} times the Radon
transform of rho_K^{n-1} at u.  For n = 3 a spectral path through spherical
harmonics is available, with multipliers given by the Legendre values at 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import eval_legendre, sph_harm_y

from .errors import ConfigurationError, DomainError, NumericError
from .spheregrid import (SphereGrid, orthonormal_complement, quadrature,
                         subsphere_rule, unit_ball_volume)
from .starbody import StarBody, eccentricity, normalize_volume, volume

FieldLike = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]

_CHUNK_BYTES = 1 << 26


@dataclass
class RadonField:
    """Values of a Radon transform on the nodes of a grid."""

    grid: SphereGrid
    values: np.ndarray


def default_circle_resolution(grid: SphereGrid) -> int:
    return max(16, 4 * int(round(math.sqrt(grid.size))))


def _evaluator(grid: SphereGrid, f: FieldLike) -> Callable[[np.ndarray], np.ndarray]:
    if callable(f):
        return lambda dirs: np.asarray(f(dirs), dtype=float)
    values = np.asarray(f, dtype=float)
    if values.shape != (grid.size,):
        raise DomainError(f"field has shape {values.shape}, expected ({grid.size},)")
    if not np.all(np.isfinite(values)):
        raise NumericError("field contains non-finite values")
    return lambda dirs: values[grid.nearest(dirs)]


def _circle_frames(nodes: np.ndarray):
    """Per-node orthonormal frames (v1, v2) of u-perp for a batch of unit u."""
    axis = np.argmin(np.abs(nodes), axis=1)
    e = np.eye(3)[axis]
    v1 = np.cross(e, nodes)
    v1 /= np.linalg.norm(v1, axis=1, keepdims=True)
    v2 = np.cross(nodes, v1)
    return v1, v2


def radon(grid: SphereGrid, f: FieldLike, circle_resolution: Optional[int] = None,
          seed: Optional[int] = None) -> RadonField:
    """Spherical Radon transform of a field given on (or evaluable from) the grid.

    ``f`` may be an array of node values (interpolated by nearest node when
    integrating over great subspheres) or a callable evaluated exactly at the
    subsphere quadrature points.  Exact on constants; linear and monotone in f.
    """
    m = circle_resolution or default_circle_resolution(grid)
    n = grid.dim
    evaluate = _evaluator(grid, f)

    if n == 2:
        if not callable(f) and grid.kind == "uniform-angle" and grid.size % 4 == 0:
            values = np.asarray(f, dtype=float)
            q = grid.size // 4
            out = 0.5 * (np.roll(values, -q) + np.roll(values, q))
            return RadonField(grid=grid, values=out)
        rot = np.array([[0.0, -1.0], [1.0, 0.0]])
        perp = grid.nodes @ rot.T
        out = 0.5 * (evaluate(perp) + evaluate(-perp))
        return RadonField(grid=grid, values=out)

    if n == 3:
        v1, v2 = _circle_frames(grid.nodes)
        ang = 2.0 * np.pi * np.arange(m) / m
        cos_a, sin_a = np.cos(ang), np.sin(ang)
        out = np.empty(grid.size)
        block = max(1, _CHUNK_BYTES // (m * 24))
        for lo in range(0, grid.size, block):
            hi = min(lo + block, grid.size)
            pts = (v1[lo:hi, None, :] * cos_a[None, :, None]
                   + v2[lo:hi, None, :] * sin_a[None, :, None])
            vals = evaluate(pts.reshape(-1, 3)).reshape(hi - lo, m)
            out[lo:hi] = vals.mean(axis=1)
        return RadonField(grid=grid, values=out)

    out = np.empty(grid.size)
    base = 0 if seed is None else seed
    for i, u in enumerate(grid.nodes):
        derived = int(np.random.SeedSequence((base, i)).generate_state(1)[0])
        out[i] = float(np.mean(evaluate(subsphere_rule(u, m, seed=derived).nodes)))
    return RadonField(grid=grid, values=out)


def intersection_body(body: StarBody, circle_resolution: Optional[int] = None,
                      seed: Optional[int] = None) -> StarBody:
    """The intersection body IK: rho_IK(u) = |K ∩ u-perp|_{n-1}.

    Computed as omega_{n-1} times the Radon transform of rho_K^{n-1}, with
    rho evaluated through the body's own interpolation rule.
    """
    n = body.dim
    power = n - 1

    def section_integrand(dirs):
        return body.rho_at(dirs) ** power

    field = radon(body.grid, section_integrand, circle_resolution, seed=seed)
    rho_ik = unit_ball_volume(n - 1) * field.values
    return StarBody(grid=body.grid, rho=rho_ik, interpolation=body.interpolation,
                    interp_k=body.interp_k)


def radon_selfadjoint_residual(grid: SphereGrid, f: np.ndarray, g: np.ndarray,
                               circle_resolution: Optional[int] = None,
                               seed: Optional[int] = None) -> float:
    """Normalized residual of <Rad f, g> = <f, Rad g> under the grid quadrature."""
    rf = radon(grid, f, circle_resolution, seed=seed).values
    rg = radon(grid, g, circle_resolution, seed=seed).values
    lhs = quadrature(grid, rf * np.asarray(g, dtype=float))
    rhs = quadrature(grid, np.asarray(f, dtype=float) * rg)
    return abs(lhs - rhs) / (1.0 + abs(rhs))


# -- spectral path on S^2 ---------------------------------------------

@dataclass
class SpectralRadon3:
    """Funk-transform multipliers nu_m for degrees 0..L on S^2."""

    max_degree: int
    multipliers: np.ndarray

    def decay_fit(self, m_lo: int = 4, m_hi: Optional[int] = None):
        """Fit |nu_m| ~ C m^{-1/2} on even degrees in [m_lo, m_hi].

        Returns (C, max relative deviation of |nu_m| from C m^{-1/2}).
        """
        m_hi = m_hi if m_hi is not None else self.max_degree
        ms = np.arange(m_lo + (m_lo % 2), m_hi + 1, 2)
        vals = np.abs(self.multipliers[ms])
        c = float(np.mean(vals * np.sqrt(ms)))
        dev = float(np.max(np.abs(vals - c / np.sqrt(ms)) / (c / np.sqrt(ms))))
        return c, dev


def radon_multipliers(max_degree: int) -> SpectralRadon3:
    """nu_m = P_m(0): 1, 0, -1/2, 0, 3/8, ... (zero for odd m)."""
    nu = eval_legendre(np.arange(max_degree + 1), 0.0)
    return SpectralRadon3(max_degree=max_degree, multipliers=np.asarray(nu, dtype=float))


def real_harmonic_basis(nodes: np.ndarray, max_degree: int) -> np.ndarray:
    """Real spherical harmonics on S^2, orthonormal for the probability measure.

    Columns are ordered (l, m) with m = -l..l; values are sqrt(4 pi) times the
    usual orthonormal harmonics so that sum_i w_i Y_a Y_b = delta_ab under a
    probability-weighted quadrature.
    """
    nodes = np.asarray(nodes, dtype=float)
    polar = np.arccos(np.clip(nodes[:, 2], -1.0, 1.0))
    azimuth = np.arctan2(nodes[:, 1], nodes[:, 0])
    cols = []
    for l in range(max_degree + 1):
        for m in range(-l, l + 1):
            y = sph_harm_y(l, abs(m), polar, azimuth)
            if m == 0:
                col = y.real
            elif m > 0:
                col = math.sqrt(2.0) * (-1.0) ** m * y.real
            else:
                col = math.sqrt(2.0) * (-1.0) ** m * y.imag
            cols.append(col * math.sqrt(4.0 * math.pi))
    return np.column_stack(cols)


def harmonic_degrees(max_degree: int) -> np.ndarray:
    return np.concatenate([np.full(2 * l + 1, l, dtype=int)
                           for l in range(max_degree + 1)])


def spectral_radon3(grid: SphereGrid, f: np.ndarray, max_degree: int) -> np.ndarray:
    """Radon transform via harmonic projection and the nu_m multipliers (n=3 only)."""
    if grid.dim != 3:
        raise ConfigurationError("the spectral path is available only on S^2")
    values = np.asarray(f, dtype=float)
    basis = real_harmonic_basis(grid.nodes, max_degree)
    coeffs = basis.T @ (grid.weights * values)
    nu = radon_multipliers(max_degree).multipliers[harmonic_degrees(max_degree)]
    return basis @ (nu * coeffs)


# -- iteration dynamics ------------------------------------------------

def iterate_I(body: StarBody, steps: int, renormalize: bool = True,
              circle_resolution: Optional[int] = None, seed: Optional[int] = None):
    """Iterates K, IK, I^2 K, ... with optional volume renormalization.

    Returns (bodies, eccentricities); the trace has steps + 1 entries starting
    at the input body.  Renormalization rescales each iterate to the unit-ball
    volume, legitimate because scaling commutes with I up to a power.
    """
    if steps < 1:
        raise DomainError("steps must be >= 1")
    omega = unit_ball_volume(body.dim)
    current = normalize_volume(body, omega) if renormalize else body
    bodies = [current]
    trace = [eccentricity(current)]
    for _ in range(steps):
        current = intersection_body(current, circle_resolution, seed=seed)
        if renormalize:
            current = normalize_volume(current, omega)
        elif current.rho.max() > 1e50:
            raise NumericError("radial values overflow; rerun with renormalize=True")
        bodies.append(current)
        trace.append(eccentricity(current))
    return bodies, np.asarray(trace)


def fixed_point_residual(body: StarBody, order: int = 1,
                         circle_resolution: Optional[int] = None,
                         seed: Optional[int] = None):
    """Best scalar c with I^order K ~ c K and the sup relative residual.

    c is the quadrature-weighted geometric mean of the ratio field (the
    log-space least-squares optimum); the residual is max |ratio / c - 1|.
    """
    if order not in (1, 2):
        raise DomainError("order must be 1 or 2")
    iterate = body
    for _ in range(order):
        iterate = intersection_body(iterate, circle_resolution, seed=seed)
    ratio = iterate.rho / body.rho
    c_best = float(np.exp(quadrature(body.grid, np.log(ratio))))
    residual = float(np.max(np.abs(ratio / c_best - 1.0)))
    return c_best, residual
