"""Indicator functionals on boundary data and the region estimates built from them.

Everything here consumes only assembled boundary-operator matrices (plus probe
parameters); mesh interiors and true inclusion shapes appear exclusively in
the validation helpers, which keeps the reconstruction side honest.

The depth-t exponential indicator obeys log|I(tau, t)| ~ 2 tau (h(theta) - t),
so the support value in a direction is recovered as t plus the slope of a
trailing-window linear fit.  The cone-probe indicator switches from decay to
growth as the probing cone first reaches the inclusion; the critical offset is
located by bisection on a decay/growth classification of the tau ladder.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fem import BoundaryBasis, DtnPair, gap_matrix, quadratic_gap
from .mesh import INCLUSION, Mesh, ShapeSpec
from .mittag import MLParams
from .probes import (ConeSpec, ProbeSpec, cgo_trace, cone_avoids_shape,
                     cone_contains_many, probe_gradient, rot90, ml_probe_trace)

_UNDERFLOW_FLOOR = 1e-280
_DEAD_BAND = 1e-2
_FIT_RESIDUAL = 0.05
_EXPANSION_WARN = 1e-6


class IndicatorError(ValueError):
    """Invalid indicator inputs or an unusable sample series."""


@dataclass(frozen=True)
class IndicatorSeries:
    """Indicator samples I(tau, t) over an increasing tau grid, with the probe
    metadata and optional ground-truth energy values J for validation."""

    spec: ProbeSpec
    taus: np.ndarray
    values: np.ndarray
    j_values: Optional[np.ndarray] = None

    def __post_init__(self):
        if np.any(np.diff(self.taus) <= 0):
            raise IndicatorError("tau grid must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise IndicatorError("indicator values must be finite")


@dataclass(frozen=True)
class SupportFit:
    """Per-direction support estimate from the log-slope of an indicator series."""

    theta: tuple[float, float]
    t: float
    h_est: float
    slope: float
    intercept: float
    rms_residual: float
    window: tuple[int, int]
    low_confidence: bool


@dataclass(frozen=True)
class SupportEstimate:
    fits: tuple[SupportFit, ...]

    @property
    def directions(self) -> np.ndarray:
        return np.array([f.theta for f in self.fits])

    @property
    def h_values(self) -> np.ndarray:
        return np.array([f.h_est for f in self.fits])


@dataclass(frozen=True)
class TransitionEstimate:
    """Critical cone offset located by decay/growth bisection."""

    y: tuple[float, float]
    theta: tuple[float, float]
    alpha: float
    h_est: Optional[float]
    bracket: tuple[float, float]
    status: str                  # "ok" | "no_transition"
    low_confidence_steps: int = 0


@dataclass(frozen=True)
class RegionEstimate:
    """Upper estimate of the inclusion: a clipped half-plane hull or the domain
    minus a union of cones (the cone list is authoritative; the mask is a
    rasterized convenience)."""

    kind: str                    # "hull" | "cones"
    domain_radius: float
    polygon: Optional[np.ndarray] = None
    cones: tuple[ConeSpec, ...] = ()
    mask: Optional[np.ndarray] = None

    def area(self) -> float:
        if self.kind == "hull":
            return _polygon_area(self.polygon)
        if self.mask is None:
            raise IndicatorError("cone estimate has no rasterized mask")
        cell = (2 * self.domain_radius / self.mask.shape[0]) ** 2
        return float(self.mask.sum() * cell)


# ---------------------------------------------------------------------------
# Quadratic-form indicators


def default_tau_ladder(mesh_h: float, n_points: int = 12, tau_min: float = 1.0,
                       resolution_factor: float = 0.3) -> np.ndarray:
    """Geometric tau grid up to the mesh-resolution cap resolution_factor / h."""
    tau_max = max(resolution_factor / mesh_h, 2.0 * tau_min)
    return np.geomspace(tau_min, tau_max, n_points)


def _expand_probe(pair: DtnPair, spec: ProbeSpec,
                  params: Optional[MLParams] = None) -> tuple[np.ndarray, BoundaryBasis]:
    basis = pair[0].basis
    pts = basis.points
    if spec.kind == "cgo":
        vals = cgo_trace(spec, pts)
    else:
        vals = ml_probe_trace(spec, pts, params)
    coef, res = basis.expand(vals)
    if res > _EXPANSION_WARN and np.all(np.isfinite(vals)):
        warnings.warn(f"trace expansion residual {res:.2e} exceeds {_EXPANSION_WARN:.0e}",
                      stacklevel=2)
    return coef, basis


def indicator_cgo(pair: DtnPair, theta, theta_perp, t: float, tau: float) -> float:
    """Depth-shifted exponential-probe indicator from an operator pair."""
    h = pair[0].mesh_h
    if tau * h > 0.9:
        warnings.warn(f"tau = {tau:.3g} exceeds the mesh-resolution advisory "
                      f"({0.9 / h:.3g}) for h = {h}", stacklevel=2)
    spec = ProbeSpec(kind="cgo", theta=tuple(theta), theta_perp=tuple(theta_perp),
                     t=t, tau=tau)
    coef, basis = _expand_probe(pair, spec)
    return quadratic_gap(gap_matrix(pair), basis, coef)


def indicator_ml(pair: DtnPair, alpha: float, y, theta, t: float, tau: float,
                 theta_perp=None, params: Optional[MLParams] = None) -> float:
    """Cone-probe indicator; rejects probes whose base cone meets the domain."""
    th = np.asarray(theta, dtype=float)
    tp = rot90(th) if theta_perp is None else np.asarray(theta_perp, dtype=float)
    spec = ProbeSpec(kind="mittag_leffler", theta=(th[0], th[1]), theta_perp=(tp[0], tp[1]),
                     t=t, tau=tau, y=tuple(y), alpha=alpha,
                     domain_radius=pair[0].basis.radius)
    coef, basis = _expand_probe(pair, spec, params)
    if not np.all(np.isfinite(coef)):
        return math.inf
    return quadratic_gap(gap_matrix(pair), basis, coef)


def indicator_series_cgo(pair: DtnPair, theta, theta_perp, t: float,
                         taus: Sequence[float]) -> IndicatorSeries:
    taus = np.asarray(taus, dtype=float)
    vals = np.array([indicator_cgo(pair, theta, theta_perp, t, tau) for tau in taus])
    spec = ProbeSpec(kind="cgo", theta=tuple(theta), theta_perp=tuple(theta_perp),
                     t=t, tau=float(taus[-1]))
    return IndicatorSeries(spec=spec, taus=taus, values=vals)


def j_oracle(mesh: Mesh, spec: ProbeSpec, tau: float, t: float,
             params: Optional[MLParams] = None) -> float:
    """Ground-truth probe energy: quadrature of |grad probe|^2 over the labeled
    inclusion elements (validation mode only)."""
    inc = mesh.labels == INCLUSION
    if not inc.any():
        return 0.0
    s = spec.with_t_tau(t, tau) if spec.kind == "mittag_leffler" else ProbeSpec(
        kind="cgo", theta=spec.theta, theta_perp=spec.theta_perp, t=t, tau=tau)
    cents = mesh.centroids()[inc]
    areas = mesh.triangle_areas()[inc]
    g = probe_gradient(s, cents, params)
    return float(np.sum(areas * (np.abs(g) ** 2).sum(axis=1)))


# ---------------------------------------------------------------------------
# Support recovery by log-slope fitting


def support_slope_fit(series: IndicatorSeries) -> SupportFit:
    """Least-squares slope of log|I| against 2 tau over the largest trailing
    window with per-point residual below the acceptance threshold.

    Samples with |I| below the underflow floor are censored (not zeroed).
    """
    taus = series.taus
    vals = np.abs(series.values)
    usable = np.isfinite(vals) & (vals > _UNDERFLOW_FLOOR)
    if usable.sum() < 5:
        raise IndicatorError("fewer than 5 usable samples above the underflow floor")
    x = 2.0 * taus[usable]
    yv = np.log(vals[usable])
    n = len(x)
    best = None
    low_confidence = False
    for length in range(n, 3, -1):
        xs, ys = x[n - length:], yv[n - length:]
        slope, intercept = np.polyfit(xs, ys, 1)
        rms = float(np.sqrt(np.mean((ys - (slope * xs + intercept)) ** 2)))
        if rms <= _FIT_RESIDUAL:
            best = (slope, intercept, rms, (n - length, n))
            break
        if best is None or rms < best[2]:
            best = (slope, intercept, rms, (n - length, n))
    else:
        low_confidence = True
    slope, intercept, rms, window = best
    t = series.spec.t
    return SupportFit(theta=series.spec.theta, t=t, h_est=t + float(slope),
                      slope=float(slope), intercept=float(intercept),
                      rms_residual=rms, window=window, low_confidence=low_confidence)


def fit_support_directions(pair: DtnPair, thetas: np.ndarray, t: float,
                           taus: Sequence[float]) -> SupportEstimate:
    """Slope fits over a direction set (theta_perp taken as the left normal)."""
    fits = []
    for th in np.atleast_2d(thetas):
        series = indicator_series_cgo(pair, th, rot90(np.asarray(th)), t, taus)
        fits.append(support_slope_fit(series))
    return SupportEstimate(fits=tuple(fits))


# ---------------------------------------------------------------------------
# Cone-probe transition search


def _classification_noise_floor(pair: DtnPair, coef_mag_sq: float) -> float:
    g = gap_matrix(pair)
    return coef_mag_sq * float(np.max(np.abs(g))) * g.shape[0] * 1e-16


def classify_series(taus: np.ndarray, values: np.ndarray,
                    noise_floors: Optional[np.ndarray] = None,
                    dead_band: float = _DEAD_BAND) -> tuple[str, bool]:
    """Label a series "growth" or "decay" by the monotonicity of log|I| over
    the trailing half; ties are labelled growth with a low-confidence flag
    (growth errs toward a shallower, containment-safe estimate).

    Samples below their roundoff noise floor (and everything after the first
    such sample) are discarded.  A sustained decline followed by an explosive
    upturn is the signature of discretization leakage from the probe's large
    boundary values, not of the limiting growth, so such tails are censored
    at the minimum before classifying.
    """
    vals = np.abs(np.asarray(values, dtype=float))
    n = len(vals)
    cut = n
    for i in range(n):
        bad = not np.isfinite(vals[i]) or vals[i] <= _UNDERFLOW_FLOOR
        if noise_floors is not None and not bad:
            bad = vals[i] < 10.0 * noise_floors[i]
        if bad:
            cut = i
            break
    if cut < 4:
        return "growth", True
    logs = np.log(vals[:cut])
    # leakage announces itself with an explosive per-step jump well above any
    # near-transition trend; censor the tail from the first such step
    jumps = np.flatnonzero(np.diff(logs) > 2.0)
    if len(jumps):
        logs = logs[:jumps[0] + 1]
    if len(logs) < 4:
        return "growth", True
    half = logs[len(logs) // 2:]
    mean_step = float(np.mean(np.diff(half)))
    if mean_step > dead_band:
        return "growth", False
    if mean_step < -dead_band:
        return "decay", False
    return "growth", True


def transition_search_ml(pair: DtnPair, alpha: float, y, theta,
                         t_interval: tuple[float, float],
                         taus: Sequence[float],
                         dt_tol: float = 0.02,
                         params: Optional[MLParams] = None) -> TransitionEstimate:
    """Bisect the decay/growth transition of the cone-probe indicator in t.

    The search interval must lie in (-inf, 0); if both endpoints classify the
    same there is no transition to report.
    """
    t_lo, t_hi = float(t_interval[0]), float(t_interval[1])
    if not (t_lo < t_hi < 0):
        raise IndicatorError("search interval must satisfy t_lo < t_hi < 0")
    taus = np.asarray(taus, dtype=float)
    params = params or MLParams(alpha=alpha)
    basis = pair[0].basis
    pts = basis.points
    gap = gap_matrix(pair)
    gap_scale = float(np.max(np.abs(gap))) * gap.shape[0] * 1e-16
    th = np.asarray(theta, dtype=float)
    tp = rot90(th)
    low_conf = 0

    def classify(t: float) -> str:
        nonlocal low_conf
        vals = np.empty(len(taus))
        floors = np.empty(len(taus))
        for i, tau in enumerate(taus):
            spec = ProbeSpec(kind="mittag_leffler", theta=(th[0], th[1]),
                             theta_perp=(tp[0], tp[1]), t=t, tau=float(tau),
                             y=tuple(y), alpha=alpha, domain_radius=basis.radius)
            trace = ml_probe_trace(spec, pts, params)
            if not np.all(np.isfinite(trace)):
                vals[i:] = np.inf
                floors[i:] = 0.0
                break
            coef, _ = basis.expand(trace)
            cc = basis.conjugate_coefficients(coef)
            vals[i] = float(np.real(np.dot(coef, gap @ cc)))
            floors[i] = float(np.max(np.abs(coef)) ** 2) * gap_scale
        label, tie = classify_series(taus, vals, floors)
        if tie:
            low_conf += 1
        return label

    lo_label = classify(t_lo)
    hi_label = classify(t_hi)
    if lo_label == hi_label:
        return TransitionEstimate(y=tuple(y), theta=(th[0], th[1]), alpha=alpha,
                                  h_est=None, bracket=(t_lo, t_hi),
                                  status="no_transition", low_confidence_steps=low_conf)
    lo, hi = t_lo, t_hi
    while hi - lo > dt_tol:
        mid = 0.5 * (lo + hi)
        if classify(mid) == "growth":
            lo = mid
        else:
            hi = mid
    return TransitionEstimate(y=tuple(y), theta=(th[0], th[1]), alpha=alpha,
                              h_est=0.5 * (lo + hi), bracket=(lo, hi), status="ok",
                              low_confidence_steps=low_conf)


# ---------------------------------------------------------------------------
# Region assembly


def clip_polygon_halfplane(poly: np.ndarray, normal: np.ndarray, offset: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to {x . normal <= offset}."""
    out = []
    n = len(poly)
    for i in range(n):
        cur, nxt = poly[i], poly[(i + 1) % n]
        d_cur = cur @ normal - offset
        d_nxt = nxt @ normal - offset
        if d_cur <= 0:
            out.append(cur)
            if d_nxt > 0:
                s = d_cur / (d_cur - d_nxt)
                out.append(cur + s * (nxt - cur))
        elif d_nxt <= 0:
            s = d_cur / (d_cur - d_nxt)
            out.append(cur + s * (nxt - cur))
    return np.array(out) if out else np.empty((0, 2))


def convex_hull_estimate(estimate: SupportEstimate, domain_radius: float,
                         n_boundary: int = 128) -> RegionEstimate:
    """Intersection of the half-planes {x . theta <= h(theta)}, clipped to the domain."""
    if len(estimate.fits) < 3:
        raise IndicatorError("need at least 3 directions for a hull")
    ang = np.linspace(0, 2 * math.pi, n_boundary, endpoint=False)
    poly = domain_radius * np.stack([np.cos(ang), np.sin(ang)], axis=1)
    for fit in estimate.fits:
        poly = clip_polygon_halfplane(poly, np.asarray(fit.theta), fit.h_est)
        if len(poly) < 3:
            raise IndicatorError("half-plane intersection is empty; estimates inconsistent")
    return RegionEstimate(kind="hull", domain_radius=domain_radius, polygon=poly)


def cone_carving(estimates: Sequence[TransitionEstimate], domain_radius: float,
                 resolution: int = 512) -> RegionEstimate:
    """Domain minus the union of critical cones, with a rasterized mask."""
    cones = []
    for est in estimates:
        if est.status != "ok" or est.h_est is None:
            continue
        v = np.asarray(est.y) + est.h_est * np.asarray(est.theta)
        cones.append(ConeSpec(vertex=(v[0], v[1]), axis=est.theta,
                              half_aperture=math.pi * est.alpha / 2))
    xs = np.linspace(-domain_radius, domain_radius, resolution)
    gx, gy = np.meshgrid(xs, xs, indexing="xy")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    mask = (np.hypot(pts[:, 0], pts[:, 1]) <= domain_radius)
    for cone in cones:
        mask &= ~cone_contains_many(cone, pts)
    return RegionEstimate(kind="cones", domain_radius=domain_radius,
                          cones=tuple(cones), mask=mask.reshape(resolution, resolution))


def _polygon_area(poly: np.ndarray) -> float:
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * float(abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


# ---------------------------------------------------------------------------
# Validation helpers (ground truth required)


def hull_contains_shape(estimate: SupportEstimate, shape: ShapeSpec,
                        tol: float = 1e-9) -> bool:
    """Soundness: the true support never exceeds the fitted one per direction."""
    return all(shape.support(np.asarray(f.theta)) <= f.h_est + tol
               for f in estimate.fits)


def cones_avoid_shape(region: RegionEstimate, shape: ShapeSpec) -> bool:
    return all(cone_avoids_shape(c, shape) for c in region.cones)


# ---------------------------------------------------------------------------
# CSV and SVG output


def write_indicator_csv(path, rows: Sequence[dict], provenance: Optional[dict] = None) -> None:
    """Columns: family, alpha, theta_x, theta_y, y_x, y_y, t, tau, I, logabsI, J."""
    cols = ("family", "alpha", "theta_x", "theta_y", "y_x", "y_y", "t", "tau",
            "I", "logabsI", "J")
    with open(path, "w") as f:
        for key, val in (provenance or {}).items():
            f.write(f"# {key}: {val}\n")
        f.write(",".join(cols) + "\n")
        for r in rows:
            out = []
            for c in cols:
                v = r.get(c)
                if v is None:
                    out.append("")
                elif isinstance(v, str):
                    out.append(v)
                else:
                    out.append(f"{v:.17g}")
            f.write(",".join(out) + "\n")


def read_indicator_csv(path) -> list[dict]:
    rows = []
    with open(path) as f:
        lines = [ln.strip() for ln in f if not ln.startswith("#")]
    header = lines[0].split(",")
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        row = {}
        for key, val in zip(header, parts):
            if key == "family":
                row[key] = val
            elif val == "":
                row[key] = None
            else:
                row[key] = float(val)
        rows.append(row)
    return rows


def write_region_svg(path, estimate: RegionEstimate,
                     true_shape: Optional[ShapeSpec] = None,
                     size: int = 600, provenance: Optional[dict] = None) -> None:
    """Overlay of the domain circle, the estimate, and (in validation mode)
    the true inclusion."""
    r = estimate.domain_radius
    scale = size / (2.2 * r)

    def sx(x):
        return (x + 1.1 * r) * scale

    def sy(y):
        return (1.1 * r - y) * scale

    prov = "".join(f"<!-- {k}: {v} -->\n" for k, v in (provenance or {}).items())
    parts = [prov + f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
             f'viewBox="0 0 {size} {size}">',
             f'<circle cx="{sx(0):.2f}" cy="{sy(0):.2f}" r="{r * scale:.2f}" '
             'fill="none" stroke="black" stroke-width="1.5"/>']
    if true_shape is not None:
        pts = true_shape.boundary_points(128)
        d = "M " + " L ".join(f"{sx(p[0]):.2f} {sy(p[1]):.2f}" for p in pts) + " Z"
        parts.append(f'<path d="{d}" fill="#9ecae1" fill-opacity="0.6" stroke="#3182bd"/>')
    if estimate.kind == "hull" and estimate.polygon is not None:
        d = "M " + " L ".join(f"{sx(p[0]):.2f} {sy(p[1]):.2f}" for p in estimate.polygon) + " Z"
        parts.append(f'<path d="{d}" fill="none" stroke="#d62728" stroke-width="2"/>')
    else:
        span = 6.0 * r
        for cone in estimate.cones:
            v = np.asarray(cone.vertex)
            ax = np.asarray(cone.axis)
            psi = cone.half_aperture
            for sgn in (1.0, -1.0):
                ca, sa = math.cos(sgn * psi), math.sin(sgn * psi)
                e = np.array([ca * ax[0] - sa * ax[1], sa * ax[0] + ca * ax[1]])
                tip = v + span * e
                parts.append(f'<line x1="{sx(v[0]):.2f}" y1="{sy(v[1]):.2f}" '
                             f'x2="{sx(tip[0]):.2f}" y2="{sy(tip[1]):.2f}" '
                             'stroke="#d62728" stroke-width="1"/>')
    parts.append("</svg>")
    with open(path, "w") as f:
        f.write("\n".join(parts) + "\n")
