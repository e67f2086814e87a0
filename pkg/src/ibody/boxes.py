"""Parallelotope volumes, hyperplane sections of boxes, and the rectangle
equality-case classifier.

The central-section volume of an axis-aligned box is evaluated in closed form
by the signed-power expansion over the 2^n vertices (the density of a sum of
independent uniform variables), with coordinates where theta vanishes
factored out exactly.  The classifier decides, for a box R and a hyperplane
through the origin with normal theta, which of the flatness conditions the
recentering profile t -> |(R - t c) ∩ theta-perp| satisfies at t = 0+.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import DegenerateSampleError, DomainError, UnsupportedDirectionError
from .intervals import IntervalUnion

_ZERO_TOL = 1e-12


@dataclass
class Box:
    """Axis-aligned box: center c and strictly positive half-lengths."""

    center: np.ndarray
    half_lengths: np.ndarray

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        self.half_lengths = np.asarray(self.half_lengths, dtype=float)
        if self.center.shape != self.half_lengths.shape:
            raise DomainError("center and half_lengths must have equal shape")
        if np.any(self.half_lengths <= 0):
            raise DomainError("box half-lengths must be strictly positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def centered(self) -> "Box":
        return Box(np.zeros(self.dim), self.half_lengths)

    def translate(self, v) -> "Box":
        return Box(self.center + np.asarray(v, dtype=float), self.half_lengths)


@dataclass
class BoxUnion:
    """Finite union of pairwise interior-disjoint boxes."""

    boxes: List[Box]

    @classmethod
    def from_interval_product(cls, fibers: Sequence[IntervalUnion]) -> "BoxUnion":
        """Expand a product of interval unions (one per axis) into boxes."""
        boxes = []
        for combo in itertools.product(*[f.intervals for f in fibers]):
            lo = np.array([ab[0] for ab in combo], dtype=float)
            hi = np.array([ab[1] for ab in combo], dtype=float)
            boxes.append(Box((lo + hi) / 2.0, (hi - lo) / 2.0))
        return cls(boxes)

    def __len__(self) -> int:
        return len(self.boxes)


@dataclass
class EqualityVerdict:
    tag: str                      # no-section | centered | n-minus-1-pairs | violated
    derivative_estimate: float


def parallelotope_volume(vectors) -> float:
    """m-volume of the parallelotope spanned by the rows of ``vectors`` (m <= n).

    Square root of the Gram determinant; 0 iff the rows are dependent.
    """
    x = np.atleast_2d(np.asarray(vectors, dtype=float))
    m, n = x.shape
    if m > n:
        raise DomainError("more spanning vectors than ambient dimensions")
    if m == n:
        return abs(float(np.linalg.det(x)))
    gram = x @ x.T
    return math.sqrt(max(float(np.linalg.det(gram)), 0.0))


def dependency_direction(points, tol: float = 1e-10) -> np.ndarray:
    """Unit linear dependency of n points in an (n-1)-dimensional hyperplane.

    ``points`` has shape (n, n-1): n points given in coordinates of a basis of
    the hyperplane.  Returns the unit theta in R^n with sum_i theta_i y_i = 0,
    sign fixed by the first-nonzero-coordinate-positive convention.  Raises
    :class:`DegenerateSampleError` when the configuration is nearly affinely
    dependent (caller resamples).
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    if pts.shape != (n, n - 1):
        raise DomainError(f"expected n points with n-1 coordinates, got {pts.shape}")
    mat = pts.T                                   # (n-1, n), rows are the y-tilde vectors
    _, s, vt = np.linalg.svd(mat)
    scale = max(float(s[0]), 1.0)
    if float(s[-1]) < tol * scale:
        raise DegenerateSampleError("points are nearly affinely dependent")
    theta = vt[-1]
    lead = np.nonzero(np.abs(theta) > _ZERO_TOL)[0][0]
    if theta[lead] < 0:
        theta = -theta
    return theta / np.linalg.norm(theta)


def _section_nonzero(center, half, theta_nz, offset) -> float:
    """Signed-power vertex expansion, all components of theta_nz nonzero."""
    k = theta_nz.shape[0]
    mid = float(theta_nz @ center)
    spans = np.abs(theta_nz) * half
    if k == 1:
        lo, hi = mid - spans[0], mid + spans[0]
        return 1.0 / abs(theta_nz[0]) if lo <= offset <= hi else 0.0
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=k)))
    parity = (-1.0) ** (((signs + 1) / 2).sum(axis=1))   # (-1)^{#upper vertex coords}
    vertex_vals = mid + signs @ spans
    rel = offset - vertex_vals
    terms = parity * np.where(rel > 0, rel, 0.0) ** (k - 1)
    return math.fsum(terms) / (math.factorial(k - 1) * float(np.prod(np.abs(theta_nz))))


def box_section_volume(box: Box, theta, offset: float = 0.0) -> float:
    """(n-1)-volume of box ∩ {x : <theta, x> = offset}.

    Exact up to roundoff; coordinates with theta_i = 0 contribute their full
    extent as a factor (the limiting value of the generic formula).  Returns 0
    for an empty section; an axis-aligned theta yields the facet area.
    """
    theta = np.asarray(theta, dtype=float)
    nz = np.abs(theta) > _ZERO_TOL
    if not nz.any():
        raise DomainError("theta must be a nonzero vector")
    factor = float(np.prod(2.0 * box.half_lengths[~nz]))
    val = _section_nonzero(box.center[nz], box.half_lengths[nz], theta[nz], float(offset))
    return factor * max(val, 0.0)


def box_sections_batch(centers, halves, thetas, offsets) -> np.ndarray:
    """Vectorized central sections for M boxes/directions at once.

    Requires every theta component nonzero (generic directions); rows with a
    vanishing component fall back to the scalar path.
    """
    centers = np.asarray(centers, dtype=float)
    halves = np.asarray(halves, dtype=float)
    thetas = np.asarray(thetas, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    m, n = centers.shape
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))   # (2^n, n)
    parity = (-1.0) ** (((signs + 1) / 2).sum(axis=1))
    spans = np.abs(thetas) * halves                                    # (M, n)
    mids = (thetas * centers).sum(axis=1)                              # (M,)
    vertex_vals = mids[:, None] + spans @ signs.T                      # (M, 2^n)
    rel = offsets[:, None] - vertex_vals
    terms = parity[None, :] * np.where(rel > 0.0, rel, 0.0) ** (n - 1)
    denom = math.factorial(n - 1) * np.prod(np.abs(thetas), axis=1)
    out = terms.sum(axis=1) / denom
    out = np.maximum(out, 0.0)

    degenerate = (np.abs(thetas) <= _ZERO_TOL).any(axis=1)
    for i in np.nonzero(degenerate)[0]:
        out[i] = box_section_volume(Box(centers[i], halves[i]), thetas[i], offsets[i])
    return out


def box_union_section_volume(union: BoxUnion, theta) -> float:
    """Sum of central-section volumes over the components."""
    return sum(box_section_volume(b, theta, 0.0) for b in union.boxes)


def _projection_range(box: Box, theta):
    mid = float(np.dot(theta, box.center))
    spread = float(np.abs(theta) @ box.half_lengths)
    return mid - spread, mid + spread


def facet_criterion(box: Box, theta) -> bool:
    """True iff {<theta, x> = 0} meets all n opposing facet pairs of the box.

    Decided exactly by max_{x in R} |<theta, x>| >= 2 max_i |theta_i| l_i.
    Requires a nonempty section.
    """
    theta = np.asarray(theta, dtype=float)
    lo, hi = _projection_range(box, theta)
    if lo > 0 or hi < 0:
        raise DomainError("facet criterion requires the section to be nonempty")
    peak = max(abs(lo), abs(hi))
    return peak >= 2.0 * float(np.max(np.abs(theta) * box.half_lengths))


def classify_equality(box: Box, theta, tol: float = 1e-9) -> str:
    """Decide which flatness condition the box satisfies for direction theta.

    Decision order: "no-section" (the hyperplane misses the box, or touches a
    face of dimension < n-2), else "centered" (<theta, c> = 0 within
    tolerance), else "n-minus-1-pairs" (the centered box fails the all-facets
    criterion), else "violated".  Axis-aligned theta is not supported.
    """
    theta = np.asarray(theta, dtype=float)
    theta = theta / np.linalg.norm(theta)
    if np.max(np.abs(theta)) > 1.0 - 1e-9:
        raise UnsupportedDirectionError("axis-aligned theta is excluded")
    scale = float(np.linalg.norm(box.center) + np.linalg.norm(box.half_lengths))
    tol_s = tol * scale
    lo, hi = _projection_range(box, theta)
    if lo > tol_s or hi < -tol_s:
        return "no-section"
    if min(abs(lo), abs(hi)) <= tol_s:
        # hyperplane touches the extremal face; its dimension counts the
        # coordinates that do not contribute to the projection spread
        face_dim = int(np.sum(np.abs(theta) * box.half_lengths <= tol_s))
        if face_dim < box.dim - 2:
            return "no-section"
    if abs(float(np.dot(theta, box.center))) <= tol_s:
        return "centered"
    if not facet_criterion(box.centered(), theta):
        return "n-minus-1-pairs"
    return "violated"


def recentering_profile(box: Box, theta, t_samples) -> np.ndarray:
    """f(t) = |(R - t c) ∩ theta-perp| for each t; non-decreasing on [0, 1]."""
    theta = np.asarray(theta, dtype=float)
    shift = float(np.dot(theta, box.center))
    return np.array([box_section_volume(box, theta, t * shift) for t in t_samples])


def equality_verdict(box: Box, theta, tol: float = 1e-9,
                     fd_step: float = 1e-6) -> EqualityVerdict:
    """Classifier tag plus a finite-difference estimate of f'(0+)."""
    tag = classify_equality(box, theta, tol)
    f0, fh = recentering_profile(box, theta, [0.0, fd_step])
    return EqualityVerdict(tag=tag, derivative_estimate=float((fh - f0) / fd_step))
