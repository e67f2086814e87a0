"""Star bodies represented by sampled radial functions.

A star body K (star-shaped about the origin, positive continuous radial
function) is stored as rho sampled on a :class:`SphereGrid`, plus an
interpolation rule for evaluating rho off the nodes.  An analytic
:class:`BodySpec` catalog covers the standard test bodies; ``materialize``
samples a spec onto a grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import ConfigurationError, DomainError, NumericError
from .spheregrid import SphereGrid, build_grid, quadrature, unit_ball_volume


@dataclass
class BodySpec:
    """Analytic test-body description.

    kinds: ball(R) | ellipsoid(a1..an [, rotation]) | lp-ball(p, s1..sn) |
    cube(half) | perturbed-ball(amplitude, harmonic degree) | radial-table(path)
    """

    kind: str
    params: tuple = ()
    rotation: Optional[np.ndarray] = None
    path: Optional[str] = None

    def __post_init__(self):
        self.params = tuple(float(p) for p in self.params)
        if self.kind in ("ball", "ellipsoid", "lp-ball", "cube"):
            if any(p <= 0 for p in self.params):
                raise DomainError(f"{self.kind} parameters must be positive")
        elif self.kind == "perturbed-ball":
            amp, deg = self.params
            if not 0 <= amp < 1:
                raise DomainError("perturbation amplitude must lie in [0, 1)")
            if deg < 0 or deg != int(deg):
                raise DomainError("harmonic degree must be a non-negative integer")
        elif self.kind == "radial-table":
            if not self.path:
                raise DomainError("radial-table spec needs a file path")
        else:
            raise ConfigurationError(f"unknown body kind {self.kind!r}")

    # -- constructors -------------------------------------------------
    @classmethod
    def ball(cls, radius: float = 1.0):
        return cls("ball", (radius,))

    @classmethod
    def ellipsoid(cls, *semi_axes: float, rotation: Optional[np.ndarray] = None):
        return cls("ellipsoid", tuple(semi_axes), rotation=rotation)

    @classmethod
    def lp_ball(cls, p: float, scales):
        return cls("lp-ball", (p, *scales))

    @classmethod
    def cube(cls, half_side: float = 1.0):
        return cls("cube", (half_side,))

    @classmethod
    def perturbed_ball(cls, amplitude: float, degree: int):
        return cls("perturbed-ball", (amplitude, degree))

    @classmethod
    def radial_table(cls, path: str):
        return cls("radial-table", (), path=path)

    @classmethod
    def parse(cls, text: str) -> "BodySpec":
        """Parse CLI syntax like ``ellipsoid:1,2,3`` or ``perturbed-ball:0.05:2``."""
        parts = text.split(":")
        kind = parts[0]
        if kind == "ball":
            return cls.ball(float(parts[1]) if len(parts) > 1 else 1.0)
        if kind == "cube":
            return cls.cube(float(parts[1]) if len(parts) > 1 else 1.0)
        if kind == "ellipsoid":
            return cls.ellipsoid(*[float(v) for v in parts[1].split(",")])
        if kind == "lp-ball":
            return cls.lp_ball(float(parts[1]), [float(v) for v in parts[2].split(",")])
        if kind == "perturbed-ball":
            return cls.perturbed_ball(float(parts[1]), int(parts[2]))
        if kind == "radial-table":
            return cls.radial_table(parts[1])
        raise ConfigurationError(f"cannot parse body spec {text!r}")

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "params": list(self.params)}
        if self.rotation is not None:
            d["rotation"] = np.asarray(self.rotation).tolist()
        if self.path is not None:
            d["path"] = self.path
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BodySpec":
        rot = np.asarray(d["rotation"]) if d.get("rotation") is not None else None
        return cls(d["kind"], tuple(d.get("params", ())), rotation=rot,
                   path=d.get("path"))


def radial_values(spec: BodySpec, directions: np.ndarray) -> np.ndarray:
    """Analytic rho of a BodySpec, evaluated at unit directions (M, n)."""
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    n = directions.shape[1]
    if spec.kind == "ball":
        return np.full(directions.shape[0], spec.params[0])
    if spec.kind == "ellipsoid":
        axes = np.asarray(spec.params)
        if axes.shape[0] != n:
            raise DomainError("ellipsoid axis count must match dimension")
        d = directions if spec.rotation is None else directions @ np.asarray(spec.rotation)
        return 1.0 / np.linalg.norm(d / axes, axis=1)
    if spec.kind == "lp-ball":
        p, scales = spec.params[0], np.asarray(spec.params[1:])
        if scales.shape[0] != n:
            raise DomainError("lp-ball scale count must match dimension")
        return (np.abs(directions / scales) ** p).sum(axis=1) ** (-1.0 / p)
    if spec.kind == "cube":
        return spec.params[0] / np.abs(directions).max(axis=1)
    if spec.kind == "perturbed-ball":
        amp, deg = spec.params
        if n == 2:
            ang = np.arctan2(directions[:, 1], directions[:, 0])
        else:
            ang = np.arccos(np.clip(directions[:, -1], -1.0, 1.0))
        return 1.0 + amp * np.cos(deg * ang)
    raise ConfigurationError(f"no analytic radial function for kind {spec.kind!r}")


@dataclass
class StarBody:
    """rho sampled on a sphere grid, with an interpolation rule for off-node queries."""

    grid: SphereGrid
    rho: np.ndarray
    interpolation: str = "nearest"     # "nearest" | "local-average"
    interp_k: int = 4                  # neighbor count for local-average
    spec: Optional[BodySpec] = field(default=None, compare=False)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.grid.size,):
            raise DomainError("rho must provide one value per grid node")
        if not np.all(np.isfinite(self.rho)) or np.any(self.rho <= 0):
            raise DomainError("radial function must be positive and finite")
        if self.interpolation not in ("nearest", "local-average"):
            raise ConfigurationError(f"unknown interpolation {self.interpolation!r}")

    @property
    def dim(self) -> int:
        return self.grid.dim

    def rho_at(self, directions: np.ndarray) -> np.ndarray:
        """Interpolated rho at arbitrary unit directions (M, n) -> (M,)."""
        directions = np.atleast_2d(np.asarray(directions, dtype=float))
        if self.interpolation == "nearest":
            return self.rho[self.grid.nearest(directions)]
        k = min(self.interp_k, self.grid.size)
        dist, idx = self.grid.tree().query(directions, k=k, workers=-1)
        w = 1.0 / (dist + 1e-12)
        w /= w.sum(axis=1, keepdims=True)
        return (w * self.rho[idx]).sum(axis=1)

    def circumradius(self) -> float:
        return float(self.rho.max())

    def inradius(self) -> float:
        return float(self.rho.min())

    def scaled(self, factor: float) -> "StarBody":
        return replace(self, rho=self.rho * factor, spec=None)


def materialize(spec: BodySpec, grid: SphereGrid, interpolation: str = "nearest",
                interp_k: int = 4) -> StarBody:
    """Sample an analytic BodySpec onto a grid."""
    if spec.kind == "radial-table":
        body = load_body(spec.path)
        if body.grid.descriptor() != grid.descriptor():
            raise ConfigurationError("radial table was sampled on a different grid")
        return replace(body, interpolation=interpolation, interp_k=interp_k)
    rho = radial_values(spec, grid.nodes)
    return StarBody(grid=grid, rho=rho, interpolation=interpolation,
                    interp_k=interp_k, spec=spec)


def volume(body: StarBody) -> float:
    """omega_n * int rho^n dsigma, the polar-coordinates volume."""
    n = body.dim
    return unit_ball_volume(n) * quadrature(body.grid, body.rho ** n)


def gauge(body: StarBody, x: np.ndarray) -> np.ndarray:
    """Minkowski gauge |x| / rho(x/|x|); 0 at the origin; membership is gauge <= 1."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    r = np.linalg.norm(pts, axis=1)
    out = np.zeros(pts.shape[0])
    nz = r > 0
    if nz.any():
        out[nz] = r[nz] / body.rho_at(pts[nz] / r[nz, None])
    return float(out[0]) if single else out


def eccentricity(body: StarBody) -> float:
    """log(max rho / min rho); zero exactly for balls."""
    return float(np.log(body.rho.max() / body.rho.min()))


def normalize_volume(body: StarBody, target: float) -> StarBody:
    """Rescale to the requested volume; shape is unchanged."""
    if target <= 0:
        raise DomainError("target volume must be positive")
    factor = (target / volume(body)) ** (1.0 / body.dim)
    return body.scaled(factor)


def lipschitz_estimate(body: StarBody, cap_factor: float = 4.0) -> float:
    """Finite-difference bound for the tangential gauge-Lipschitz constant.

    Takes the max of |rho(a) - rho(b)| / geodesic(a, b) over node pairs within
    a small geodesic cap and divides by (min rho)^2, the tangential gradient
    bound for 1/rho.  Constant rho gives 0.  Estimates grow toward the true
    constant under grid refinement.
    """
    n, N = body.dim, body.grid.size
    spacing = 2.0 * np.pi / N if n == 2 else (sphere_area(n) / N) ** (1.0 / (n - 1))
    cap = cap_factor * spacing
    chord = 2.0 * math.sin(min(cap, math.pi) / 2.0)
    pairs = body.grid.tree().query_pairs(r=chord, output_type="ndarray")
    if len(pairs) == 0:
        return 0.0
    a, b = pairs[:, 0], pairs[:, 1]
    dots = np.clip((body.grid.nodes[a] * body.grid.nodes[b]).sum(axis=1), -1.0, 1.0)
    geo = np.arccos(dots)
    good = geo > 1e-12
    slope = float(np.max(np.abs(body.rho[a[good]] - body.rho[b[good]]) / geo[good]))
    return slope / body.inradius() ** 2


def gauge_lipschitz_bound(body: StarBody) -> float:
    """Full gauge-Lipschitz bound combining radial (1/r) and tangential parts."""
    tangential = lipschitz_estimate(body)
    r = body.inradius()
    return math.sqrt(tangential ** 2 + 1.0 / r ** 2)


def sphere_area(n: int) -> float:
    return n * unit_ball_volume(n)


# -- JSON body files -------------------------------------------------

def save_body(body: StarBody, path: str) -> None:
    payload = {
        "grid": body.grid.descriptor(),
        "rho": body.rho.tolist(),
        "spec": body.spec.to_dict() if body.spec is not None else None,
        "interpolation": body.interpolation,
        "interp_k": body.interp_k,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_body(path: str) -> StarBody:
    with open(path) as fh:
        payload = json.load(fh)
    g = payload["grid"]
    grid = build_grid(g["dim"], g["resolution"], g["kind"], g.get("seed"))
    spec = BodySpec.from_dict(payload["spec"]) if payload.get("spec") else None
    rho = np.asarray(payload["rho"], dtype=float)
    if rho.shape != (grid.size,):
        raise NumericError("radial table length does not match its grid")
    return StarBody(grid=grid, rho=rho,
                    interpolation=payload.get("interpolation", "nearest"),
                    interp_k=payload.get("interp_k", 4), spec=spec)
