"""Quadrature grids and samplers on unit spheres.

A :class:`SphereGrid` carries nodes and probability weights representing the
Haar probability measure on S^{n-1}; surface measure is the caller's job
(multiply by sigma_n = n * omega_n).  A :class:`CircleRule` is the analogous
rule on a great subsphere S^{n-1} intersected with u-perp, used by the
spherical Radon transform.

Grid kinds by dimension:

* n = 2: ``uniform-angle`` (equally spaced angles, equal weights)
* n = 3: ``fibonacci`` (default, equal weights) or ``lat-long``
  (Gauss-Legendre in cos(polar) times uniform azimuth)
* any n >= 2: ``monte-carlo`` (seeded, equal weights); the only kind
  available for n >= 4
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import cKDTree

from .errors import ConfigurationError, DomainError, NumericError

GOLDEN_RATIO = (1.0 + math.sqrt(5.0)) / 2.0

ScalarField = Union[np.ndarray, Sequence[float], Callable[[np.ndarray], np.ndarray]]


def unit_ball_volume(n: int) -> float:
    """omega_n, the volume of the n-dimensional Euclidean unit ball."""
    return math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def sphere_surface(n: int) -> float:
    """sigma_n = |S^{n-1}|, the surface measure of the unit sphere in R^n."""
    return n * unit_ball_volume(n)


@dataclass
class SphereGrid:
    """Quadrature nodes/weights representing sigma_{S^{n-1}}."""

    dim: int
    nodes: np.ndarray          # (N, dim), unit rows
    weights: np.ndarray        # (N,), positive, sums to 1
    kind: str
    resolution: int
    seed: Optional[int] = None
    _tree: Optional[cKDTree] = field(default=None, repr=False, compare=False)

    @property
    def size(self) -> int:
        return self.nodes.shape[0]

    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(self.nodes)
        return self._tree

    def nearest(self, directions: np.ndarray) -> np.ndarray:
        """Indices of the grid nodes nearest to each unit direction."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if self.kind == "uniform-angle":
            ang = np.arctan2(directions[:, 1], directions[:, 0])
            idx = np.rint(ang / (2.0 * np.pi / self.size)).astype(np.int64)
            return idx % self.size
        _, idx = self.tree().query(directions, workers=-1)
        return idx

    def descriptor(self) -> dict:
        return {"dim": self.dim, "kind": self.kind,
                "resolution": self.resolution, "seed": self.seed}

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_tree"] = None
        return state

    def validate(self, min_nodes: int = 16) -> None:
        norms = np.linalg.norm(self.nodes, axis=1)
        if not np.all(np.abs(norms - 1.0) <= 1e-12):
            raise NumericError("grid nodes are not unit vectors")
        if not np.all(self.weights > 0):
            raise NumericError("grid weights must be positive")
        if abs(float(self.weights.sum()) - 1.0) > 1e-12 * self.size:
            raise NumericError("grid weights do not sum to 1")
        if self.size < min_nodes:
            raise ConfigurationError(f"grid has {self.size} nodes, fewer than {min_nodes}")


@dataclass
class CircleRule:
    """Uniform quadrature rule on S^{n-1} intersected with u-perp."""

    center_direction: np.ndarray   # u, unit
    nodes: np.ndarray              # (M, n), unit rows orthogonal to u
    weights: np.ndarray            # (M,), positive, sums to 1


def _fibonacci_nodes(n_points: int) -> np.ndarray:
    i = np.arange(n_points, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n_points
    azimuth = 2.0 * np.pi * i / GOLDEN_RATIO
    s = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.column_stack((s * np.cos(azimuth), s * np.sin(azimuth), z))


def _lat_long(resolution: int):
    # Gauss-Legendre in z = cos(polar) keeps band-limited quadrature exact.
    n_polar = max(4, int(round(math.sqrt(resolution / 2.0))))
    n_az = max(8, int(math.ceil(resolution / n_polar)))
    z, wz = leggauss(n_polar)
    az = 2.0 * np.pi * (np.arange(n_az) + 0.5) / n_az
    s = np.sqrt(1.0 - z * z)
    nodes = np.empty((n_polar * n_az, 3))
    nodes[:, 0] = np.repeat(s, n_az) * np.cos(np.tile(az, n_polar))
    nodes[:, 1] = np.repeat(s, n_az) * np.sin(np.tile(az, n_polar))
    nodes[:, 2] = np.repeat(z, n_az)
    weights = np.repeat(wz, n_az) / (2.0 * n_az)
    return nodes, weights


def build_grid(dim: int, resolution: int, kind: Optional[str] = None,
               seed: Optional[int] = None) -> SphereGrid:
    """Construct a quadrature grid on S^{dim-1}.

    ``kind`` defaults to the canonical choice for the dimension.  The result
    is deterministic for fixed (kind, resolution, seed).
    """
    if dim < 2:
        raise ConfigurationError("dim must be >= 2")
    if resolution < 2:
        raise ConfigurationError("resolution must be >= 2")
    if kind is None:
        kind = {2: "uniform-angle", 3: "fibonacci"}.get(dim, "monte-carlo")

    if kind == "uniform-angle":
        if dim != 2:
            raise ConfigurationError("uniform-angle grids exist only for dim=2")
        ang = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.column_stack((np.cos(ang), np.sin(ang)))
        weights = np.full(resolution, 1.0 / resolution)
    elif kind == "fibonacci":
        if dim != 3:
            raise ConfigurationError("fibonacci grids exist only for dim=3")
        nodes = _fibonacci_nodes(resolution)
        weights = np.full(resolution, 1.0 / resolution)
    elif kind == "lat-long":
        if dim != 3:
            raise ConfigurationError("lat-long grids exist only for dim=3")
        nodes, weights = _lat_long(resolution)
    elif kind == "monte-carlo":
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((resolution, dim))
        nodes = raw / np.linalg.norm(raw, axis=1, keepdims=True)
        weights = np.full(resolution, 1.0 / resolution)
    else:
        raise ConfigurationError(f"unknown grid kind {kind!r}")

    # renormalize away float drift so the probability invariant is sharp
    nodes = nodes / np.linalg.norm(nodes, axis=1, keepdims=True)
    return SphereGrid(dim=dim, nodes=nodes, weights=weights, kind=kind,
                      resolution=resolution, seed=seed)


def orthonormal_complement(u: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of u-perp, shape (n-1, n)."""
    u = np.asarray(u, dtype=float)
    n = u.shape[0]
    # Householder reflection mapping e_1 to u gives a stable, deterministic frame.
    sign = 1.0 if u[0] >= 0 else -1.0
    v = u.copy()
    v[0] += sign * np.linalg.norm(u)
    v /= np.linalg.norm(v)
    basis = -sign * (np.eye(n) - 2.0 * np.outer(v, v))
    return basis[:, 1:].T


def subsphere_rule(u: np.ndarray, resolution: int,
                   seed: Optional[int] = None) -> CircleRule:
    """Quadrature rule on the great subsphere S^{n-1} ∩ u-perp.

    n=2: the two-point rule {u-perp, -u-perp}; n=3: equally spaced points on the
    great circle; n>=4: seeded uniform sample of the (n-2)-sphere inside u-perp.
    """
    u = np.asarray(u, dtype=float)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise DomainError("direction u must be nonzero")
    if abs(norm - 1.0) > 1e-10:
        raise DomainError("direction u must be a unit vector within 1e-10")
    u = u / norm
    n = u.shape[0]

    if n == 2:
        perp = np.array([-u[1], u[0]])
        nodes = np.vstack((perp, -perp))
        weights = np.array([0.5, 0.5])
    elif n == 3:
        frame = orthonormal_complement(u)
        ang = 2.0 * np.pi * np.arange(resolution) / resolution
        nodes = np.outer(np.cos(ang), frame[0]) + np.outer(np.sin(ang), frame[1])
        weights = np.full(resolution, 1.0 / resolution)
    else:
        frame = orthonormal_complement(u)
        rng = np.random.default_rng(seed)
        raw = rng.standard_normal((resolution, n - 1))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        nodes = raw @ frame
        weights = np.full(resolution, 1.0 / resolution)

    nodes = nodes - np.outer(nodes @ u, u)          # pin orthogonality
    nodes /= np.linalg.norm(nodes, axis=1, keepdims=True)
    return CircleRule(center_direction=u, nodes=nodes, weights=weights)


def _evaluate(field: ScalarField, nodes: np.ndarray) -> np.ndarray:
    if callable(field):
        return np.asarray(field(nodes), dtype=float)
    return np.asarray(field, dtype=float)


def quadrature(grid: SphereGrid, f: ScalarField) -> float:
    """Integrate f against the grid's probability weights.

    ``f`` is either an array of node values or a callable evaluated on the
    nodes.  Raises :class:`NumericError` naming the first bad node if any
    value is non-finite.
    """
    values = _evaluate(f, grid.nodes)
    if values.shape != (grid.size,):
        raise DomainError(f"field has shape {values.shape}, expected ({grid.size},)")
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.argmax(bad))
        raise NumericError(f"non-finite field value at node {i}: {grid.nodes[i]}")
    return float(grid.weights @ values)


def circle_quadrature(rule: CircleRule, f: ScalarField) -> float:
    values = _evaluate(f, rule.nodes)
    return float(rule.weights @ values)
