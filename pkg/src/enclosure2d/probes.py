"""Boundary traces and gradients of the two probe families.

Exponential probes exp(tau * x.(theta + i theta_perp)) are stored in a
depth-shifted form, exp(tau * ((x.theta - t) + i x.theta_perp)), so that the
scalar factor exp(-2 tau t) of the depth-t indicator is folded into the trace
and stored values stay bounded by exp(tau * diam(domain)).

Mittag-Leffler probes E_a(tau * ((x-y).theta - t + i (x-y).theta_perp)) grow
inside the open cone of half-aperture pi*a/2 about theta with vertex y + t*theta
and decay algebraically outside it; cone membership and shape-avoidance tests
live here alongside the trace evaluators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .mesh import ShapeSpec
from .mittag import MLParams, ml_deriv_many, ml_eval_many

_OVERFLOW_GUARD = 700.0


class ProbeError(ValueError):
    """Invalid probe parameters."""


def rot90(v: np.ndarray) -> np.ndarray:
    """Counterclockwise quarter turn."""
    return np.array([-v[1], v[0]])


def _unit(v, name: str) -> np.ndarray:
    u = np.asarray(v, dtype=float).reshape(2)
    if abs(np.hypot(u[0], u[1]) - 1.0) > 1e-9:
        raise ProbeError(f"{name} must be a unit vector")
    return u


@dataclass(frozen=True)
class ConeSpec:
    """Open cone: vertex, unit axis, half-aperture in (0, pi/2)."""

    vertex: tuple[float, float]
    axis: tuple[float, float]
    half_aperture: float

    def __post_init__(self):
        _unit(self.axis, "axis")
        if not (0 < self.half_aperture < math.pi / 2):
            raise ProbeError("half-aperture must lie in (0, pi/2)")

    def local_coords(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(axial, transverse) coordinates of points relative to the vertex."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        v = np.asarray(self.vertex)
        t = np.asarray(self.axis)
        d = p - v
        return d @ t, d @ rot90(t)


def cone_contains(cone: ConeSpec, x) -> bool:
    """Closed membership: the angle from the axis is at most the half-aperture."""
    xi, eta = cone.local_coords(np.asarray(x, dtype=float).reshape(1, 2))
    ang = math.atan2(abs(float(eta[0])), float(xi[0]))
    return ang <= cone.half_aperture + 1e-12


def cone_contains_many(cone: ConeSpec, points: np.ndarray) -> np.ndarray:
    xi, eta = cone.local_coords(points)
    return np.arctan2(np.abs(eta), xi) <= cone.half_aperture + 1e-12


def _ray_hits_disk(origin, direction, center, radius: float) -> bool:
    """Open intersection test of the ray origin + s*direction (s >= 0) with a disk;
    grazing tangency does not count."""
    oc = np.asarray(center) - np.asarray(origin)
    b = float(oc @ direction)
    c = float(oc @ oc) - radius * radius
    if c < -1e-12:
        return True          # origin inside the disk
    disc = b * b - c
    if disc <= 1e-12:
        return False
    s = b - math.sqrt(disc)  # nearest crossing
    return s > -1e-12 and (b + math.sqrt(disc)) > 1e-12


def cone_avoids_shape(cone: ConeSpec, shape: ShapeSpec) -> bool:
    """True when the open cone and the shape do not overlap (tangency allowed).

    Exact for disks and ellipses via edge-ray tests (the ellipse case maps to
    a disk by the axis scaling); polygons use vertex and edge tests.
    """
    v = np.asarray(cone.vertex, dtype=float)
    axis = np.asarray(cone.axis, dtype=float)
    psi = cone.half_aperture
    ca, sa = math.cos(psi), math.sin(psi)
    edge1 = np.array([ca * axis[0] - sa * axis[1], sa * axis[0] + ca * axis[1]])
    edge2 = np.array([ca * axis[0] + sa * axis[1], -sa * axis[0] + ca * axis[1]])

    if shape.contains(v[None, :])[0]:
        # vertex strictly inside fails; boundary contact counts as avoidance
        if shape.boundary_distance(v[None, :])[0] > 1e-12:
            return False

    if shape.kind == "disk":
        # dist(center, solid cone) < radius exactly when the open disk meets the cone
        return _point_cone_distance(cone, np.asarray(shape.center)) >= shape.radius - 1e-12
    if shape.kind == "ellipse":
        # scale the ellipse frame into a unit disk and re-test each edge ray
        rot = shape.rotation
        ct, st = math.cos(rot), math.sin(rot)
        rmat = np.array([[ct, st], [-st, ct]])
        scale = np.diag([1.0 / shape.semi_axes[0], 1.0 / shape.semi_axes[1]])
        to_local = scale @ rmat
        c = np.asarray(shape.center)
        v_l = to_local @ (v - c)
        for e in (edge1, edge2):
            e_l = to_local @ e
            n = np.hypot(e_l[0], e_l[1])
            if _ray_hits_disk(v_l, e_l / n, np.zeros(2), 1.0):
                return False
        if cone_contains(cone, c):
            return False
        return True
    # polygon: any vertex interior to the cone, or any edge crossed by a cone ray
    verts = shape.vertices
    xi, eta = cone.local_coords(verts)
    ang = np.arctan2(np.abs(eta), xi)
    if np.any(ang < psi - 1e-12):
        return False
    far = 4.0 * (np.max(np.hypot(*(verts - v).T)) + 1.0)
    for e in (edge1, edge2):
        tip = v + far * e
        for i in range(len(verts)):
            a, b = verts[i], verts[(i + 1) % len(verts)]
            if _segments_intersect_open(v, tip, a, b):
                return False
    return True


def _point_cone_distance(cone: ConeSpec, point) -> float:
    """Distance from a point to the closed solid cone (0 inside)."""
    xi, eta = cone.local_coords(np.asarray(point, dtype=float).reshape(1, 2))
    xi, eta = float(xi[0]), abs(float(eta[0]))
    phi = math.atan2(eta, xi)
    psi = cone.half_aperture
    if phi <= psi:
        return 0.0
    r = math.hypot(xi, eta)
    if phi - psi < math.pi / 2:
        return r * math.sin(phi - psi)
    return r


def _segments_intersect_open(p1, p2, q1, q2) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    return (d1 * d2 < -1e-24) and (d3 * d4 < -1e-24)


def critical_cone_offset(y, theta, half_aperture: float, shape: ShapeSpec,
                         t_lo: float, t_hi: float, tol: float = 1e-10) -> float:
    """Largest axis offset t at which the cone with vertex y + t*theta first
    touches the shape (bisection on the exact avoidance test).

    Requires the cone to avoid the shape at t_hi and hit it at t_lo.
    """
    y = np.asarray(y, dtype=float)
    th = _unit(theta, "theta")

    def avoids(t):
        return cone_avoids_shape(
            ConeSpec(vertex=tuple(y + t * th), axis=(th[0], th[1]),
                     half_aperture=half_aperture), shape)

    if not avoids(t_hi):
        raise ProbeError("cone already touches the shape at the upper offset")
    if avoids(t_lo):
        raise ProbeError("cone misses the shape over the whole offset interval")
    lo, hi = t_lo, t_hi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if avoids(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Probe specification and evaluators


@dataclass(frozen=True)
class ProbeSpec:
    """CGO (pure exponential) or Mittag-Leffler probe parameters.

    ``theta_perp`` must be a unit vector orthogonal to ``theta``; flipping its
    sign conjugates the probe values.  ML probes additionally carry the cone
    vertex ``y`` outside the domain and the order ``alpha`` in (0, 1); the
    vertex cone of half-aperture pi*alpha/2 must avoid the domain disk, which
    is checked when ``domain_radius`` is supplied.
    """

    kind: str                     # "cgo" | "mittag_leffler"
    theta: tuple[float, float]
    theta_perp: tuple[float, float]
    t: float
    tau: float
    y: Optional[tuple[float, float]] = None
    alpha: Optional[float] = None
    domain_radius: Optional[float] = None

    def __post_init__(self):
        th = _unit(self.theta, "theta")
        tp = _unit(self.theta_perp, "theta_perp")
        if abs(th @ tp) > 1e-9:
            raise ProbeError("theta_perp must be orthogonal to theta")
        if self.tau < 0:
            raise ProbeError("tau must be nonnegative")
        if self.kind == "cgo":
            return
        if self.kind != "mittag_leffler":
            raise ProbeError(f"unknown probe kind {self.kind!r}")
        if self.y is None or self.alpha is None:
            raise ProbeError("ML probes need a vertex y and an order alpha")
        if not (0 < self.alpha < 1):
            raise ProbeError("ML probe order must lie in (0, 1)")
        if self.domain_radius is not None:
            if np.hypot(*self.y) <= self.domain_radius:
                raise ProbeError("ML probe vertex must lie outside the domain")
            if not cone_avoids_shape(self.base_cone(),
                                     ShapeSpec.disk((0.0, 0.0), self.domain_radius)):
                raise ProbeError("vertex cone must avoid the domain disk")

    def base_cone(self) -> ConeSpec:
        """Cone at zero offset (vertex y)."""
        return ConeSpec(vertex=self.y, axis=self.theta,
                        half_aperture=math.pi * self.alpha / 2)

    def offset_cone(self, t: Optional[float] = None) -> ConeSpec:
        t = self.t if t is None else t
        y = np.asarray(self.y) + t * np.asarray(self.theta)
        return ConeSpec(vertex=(y[0], y[1]), axis=self.theta,
                        half_aperture=math.pi * self.alpha / 2)

    def with_t_tau(self, t: float, tau: float) -> "ProbeSpec":
        return ProbeSpec(kind=self.kind, theta=self.theta, theta_perp=self.theta_perp,
                         t=t, tau=tau, y=self.y, alpha=self.alpha,
                         domain_radius=self.domain_radius)

    def ml_argument(self, points: np.ndarray) -> np.ndarray:
        """w(x) = tau * ((x-y).theta - t + i (x-y).theta_perp)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        y = np.asarray(self.y)
        th, tp = np.asarray(self.theta), np.asarray(self.theta_perp)
        d = p - y
        return self.tau * ((d @ th - self.t) + 1j * (d @ tp))


def cgo_trace(spec: ProbeSpec, points) -> np.ndarray:
    """Depth-shifted exponential probe values exp(tau((x.theta - t) + i x.theta_perp))."""
    if spec.kind != "cgo":
        raise ProbeError("cgo_trace needs a cgo probe")
    p = np.atleast_2d(np.asarray(points, dtype=float))
    th, tp = np.asarray(spec.theta), np.asarray(spec.theta_perp)
    ex = spec.tau * (p @ th - spec.t)
    if ex.size and ex.max() > _OVERFLOW_GUARD:
        raise ProbeError(
            f"exponent {ex.max():.3g} exceeds the overflow guard; lower tau or raise t")
    return np.exp(ex + 1j * spec.tau * (p @ tp))


def cgo_gradient(spec: ProbeSpec, points) -> np.ndarray:
    """Gradient tau*(theta + i theta_perp) times the trace value, per point."""
    vals = cgo_trace(spec, points)
    d = spec.tau * (np.asarray(spec.theta) + 1j * np.asarray(spec.theta_perp))
    return vals[:, None] * d[None, :]


def _ml_params_for(spec: ProbeSpec, params: Optional[MLParams]) -> MLParams:
    if params is None:
        return MLParams(alpha=spec.alpha)
    if params.alpha != spec.alpha:
        raise ProbeError("evaluation parameters do not match the probe order")
    return params


def ml_probe_trace(spec: ProbeSpec, points, params: Optional[MLParams] = None) -> np.ndarray:
    """E_alpha evaluated at the depth-shifted cone coordinate of each point."""
    if spec.kind != "mittag_leffler":
        raise ProbeError("ml_probe_trace needs a mittag_leffler probe")
    return ml_eval_many(_ml_params_for(spec, params), spec.ml_argument(points))


def ml_probe_gradient(spec: ProbeSpec, points, params: Optional[MLParams] = None) -> np.ndarray:
    if spec.kind != "mittag_leffler":
        raise ProbeError("ml_probe_gradient needs a mittag_leffler probe")
    dv = ml_deriv_many(_ml_params_for(spec, params), spec.ml_argument(points))
    d = spec.tau * (np.asarray(spec.theta) + 1j * np.asarray(spec.theta_perp))
    return dv[:, None] * d[None, :]


def probe_trace(spec: ProbeSpec, points, params: Optional[MLParams] = None) -> np.ndarray:
    return cgo_trace(spec, points) if spec.kind == "cgo" else ml_probe_trace(spec, points, params)


def probe_gradient(spec: ProbeSpec, points, params: Optional[MLParams] = None) -> np.ndarray:
    return cgo_gradient(spec, points) if spec.kind == "cgo" else ml_probe_gradient(spec, points, params)


def write_probe_csv(path, spec: ProbeSpec, points,
                    params: Optional[MLParams] = None) -> None:
    """Tabulate probe values for debugging: columns x, y, re, im."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    vals = probe_trace(spec, pts, params)
    with open(path, "w") as f:
        f.write("x,y,re,im\n")
        for (x, y), v in zip(pts, vals):
            f.write(f"{x:.17g},{y:.17g},{v.real:.17g},{v.imag:.17g}\n")
