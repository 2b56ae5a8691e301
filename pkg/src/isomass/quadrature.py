"""Metric volumes of coordinate balls and annuli, metric areas of spheres.

Integrals are split as ``flat + excess``: the flat part is the Euclidean
closed form and only the excess (``sqrt(det g) - 1`` and its area analogue)
is integrated numerically.  Far from the origin the excess is many orders of
magnitude below the flat value, and keeping it separate is what makes the
isoperimetric deficit of huge far-away balls computable in double precision.

The rule is a tensor product of Gauss-Legendre in radius and ``cos(theta)``
with the periodic trapezoid rule in ``phi``.  Every panel is evaluated at
base and doubled order; the difference is the panel's error estimate, and
the panel with the largest estimate is bisected (or its azimuthal resolution
doubled) until the total estimate is below ``rel_tol * value``.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from . import _backend
from .errors import (BallIntersectsExcisedSet, SphereIntersectsExcisedSet,
                     ToleranceNotReached)
from .metrics import MetricModel

_MAX_PHI = 4096


@dataclass(frozen=True)
class QuadratureConfig:
    rel_tol: float = 1e-9
    max_subdivisions: int = 2000
    radial_rule_order: int = 8
    angular_rule_order: int = 8
    azimuthal_points: int = 8
    strict: bool = False

    def __post_init__(self):
        if not 0 < self.rel_tol <= 1e-2:
            raise ValueError("rel_tol must lie in (0, 1e-2]")
        if self.radial_rule_order < 2 or self.angular_rule_order < 2:
            raise ValueError("rule orders must be >= 2")
        if self.azimuthal_points < 2 or self.azimuthal_points % 2:
            raise ValueError("azimuthal_points must be even and >= 2")
        if self.max_subdivisions < 0:
            raise ValueError("max_subdivisions must be nonnegative")

    def tightened(self, factor: float = 10.0) -> "QuadratureConfig":
        return replace(self, rel_tol=self.rel_tol / factor)


@dataclass(frozen=True)
class Measure:
    """A metric volume or area: ``value = flat + excess``."""

    value: float
    abs_error_bound: float
    evaluations: int
    flat: float = 0.0
    excess: float = 0.0
    converged: bool = True


# rules -----------------------------------------------------------------------


@lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _rules(a: float, b: float, n: int):
    half, mid = 0.5 * (b - a), 0.5 * (a + b)
    xc, wc = _gauss_legendre(n)
    xf, wf = _gauss_legendre(2 * n)
    return mid + half * xc, half * wc, mid + half * xf, half * wf


def _frame(center) -> np.ndarray:
    """Orthonormal rows (e1, e2, e3) with e3 pointing along ``center``."""
    c = np.asarray(center, dtype=float)
    d = float(np.linalg.norm(c))
    if d == 0.0:
        return np.eye(3)
    e3 = c / d
    helper = np.array([1.0, 0.0, 0.0]) if abs(e3[0]) < 0.9 else np.array(
        [0.0, 1.0, 0.0])
    e1 = np.cross(helper, e3)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return np.array([e1, e2, e3])


def _graded(a: float, b: float, toward_b: bool, min_width: float) -> list:
    """Breakpoints of [a, b] halving in width toward one end."""
    L = b - a
    pts = [a, b]
    w = L / 2.0
    j = 0
    while w > min_width and j < 60:
        pts.append(b - w if toward_b else a + w)
        w /= 2.0
        j += 1
    return sorted(set(pts))


def _intervals(points: Sequence[float]):
    return [(points[i], points[i + 1]) for i in range(len(points) - 1)]


# adaptive driver ---------------------------------------------------------------


@dataclass
class _PanelResult:
    q: float
    err: float
    dim_errs: tuple
    phi_err: float
    evaluations: int


def _adapt(evaluate: Callable, panels: list, flat: float,
           cfg: QuadratureConfig, what: str) -> Measure:
    results = {}
    heap = []
    counter = 0
    evals = 0
    for p in panels:
        r = evaluate(p)
        results[p] = r
        evals += r.evaluations
        heapq.heappush(heap, (-r.err, counter, p))
        counter += 1

    def totals():
        qs = math.fsum(r.q for r in results.values())
        es = math.fsum(r.err for r in results.values())
        return qs, es

    q, e = totals()
    splits = 0
    while e > cfg.rel_tol * abs(flat + q) and splits < cfg.max_subdivisions:
        _, _, worst = heapq.heappop(heap)
        r = results.pop(worst)
        bounds, nphi = worst
        errs = list(r.dim_errs)
        k = int(np.argmax(errs))
        if r.phi_err > errs[k] and nphi < _MAX_PHI:
            children = [(bounds, 2 * nphi)]
        else:
            lo, hi = bounds[k]
            mid = 0.5 * (lo + hi)
            children = []
            for half in ((lo, mid), (mid, hi)):
                b = list(bounds)
                b[k] = half
                children.append((tuple(b), nphi))
        for ch in children:
            rc = evaluate(ch)
            results[ch] = rc
            evals += rc.evaluations
            heapq.heappush(heap, (-rc.err, counter, ch))
            counter += 1
        splits += 1
        q, e = totals()
    converged = e <= cfg.rel_tol * abs(flat + q)
    m = Measure(flat + q, e, evals, flat, q, converged)
    if not converged and cfg.strict:
        raise ToleranceNotReached(
            f"{what}: error estimate {e:.3e} above tolerance after "
            f"{splits} subdivisions", m)
    return m


def _ball_evaluator(model: MetricModel, center, frame, cfg, kernels):
    code, params = model.kernel_code, model.kernel_params
    nr, nm = cfg.radial_rule_order, cfg.angular_rule_order

    def evaluate(panel):
        ((ra, rb), (ma, mb)), nphi = panel
        rc, wrc, rf, wrf = _rules(ra, rb, nr)
        mc, wmc, mf, wmf = _rules(ma, mb, nm)
        fine, coarse = kernels.ball_grid(
            code, params, center, frame, np.concatenate([rc, rf]),
            np.concatenate([mc, mf]), nphi)
        Wc = wrc * rc * rc
        Wf = wrf * rf * rf
        q_fff = Wf @ fine[nr:, nm:] @ wmf
        q_ccc = Wc @ coarse[:nr, :nm] @ wmc
        q_cff = Wc @ fine[:nr, nm:] @ wmf
        q_fcf = Wf @ fine[nr:, :nm] @ wmc
        q_ffc = Wf @ coarse[nr:, nm:] @ wmf
        return _PanelResult(
            float(q_fff), abs(float(q_fff - q_ccc)),
            (abs(float(q_fff - q_cff)), abs(float(q_fff - q_fcf))),
            abs(float(q_fff - q_ffc)), 9 * nr * nm * nphi)

    return evaluate


def _sphere_evaluator(model, center, frame, radius, general, cfg, kernels):
    code, params = model.kernel_code, model.kernel_params
    nm = cfg.angular_rule_order
    r2 = radius * radius

    def evaluate(panel):
        ((ma, mb),), nphi = panel
        mc, wmc, mf, wmf = _rules(ma, mb, nm)
        fine, coarse = kernels.sphere_grid(
            code, params, center, frame, float(radius),
            np.concatenate([mc, mf]), nphi, bool(general))
        q_ff = r2 * float(wmf @ fine[nm:])
        q_cc = r2 * float(wmc @ coarse[:nm])
        q_cf = r2 * float(wmc @ fine[:nm])
        q_fc = r2 * float(wmf @ coarse[nm:])
        return _PanelResult(q_ff, abs(q_ff - q_cc), (abs(q_ff - q_cf),),
                            abs(q_ff - q_fc), 3 * nm * nphi)

    return evaluate


def _kernels(backend: str | None):
    if backend is None:
        return _backend.kernels
    return _backend.BACKENDS[backend]


def _feature_scale(model: MetricModel, center, radius: float) -> float:
    """Chart distance from the ball to where the integrand varies fastest."""
    d = float(np.linalg.norm(center))
    if model.has_core:
        return d - radius - model.inner_radius
    return max(1.0, d - radius)


# public operations -------------------------------------------------------------


def _check_ball(model: MetricModel, center, radius: float, exc):
    if not radius > 0:
        raise ValueError("radius must be positive")
    if model.has_core:
        d = float(np.linalg.norm(center))
        if not d - radius > model.inner_radius:
            raise exc(
                f"ball (center {tuple(center)}, radius {radius}) reaches the "
                f"inner boundary |x| <= {model.inner_radius}")


def ball_volume(model: MetricModel, center, radius: float,
                cfg: QuadratureConfig = QuadratureConfig(),
                backend: str | None = None) -> Measure:
    """Metric volume of the coordinate ball ``|x - center| < radius``."""
    center = tuple(float(v) for v in center)
    radius = float(radius)
    _check_ball(model, center, radius, BallIntersectsExcisedSet)
    flat = 4.0 * math.pi * radius ** 3 / 3.0
    if model.kernel_code == 0:
        return Measure(flat, 0.0, 0, flat, 0.0)
    frame = _frame(center)
    d = float(np.linalg.norm(center))
    scale = _feature_scale(model, center, radius)
    if scale < radius:
        rho_pts = _graded(0.0, radius, True, 0.5 * scale)
        mu_pts = _graded(-1.0, 1.0, False, max(1e-12, (scale / radius) ** 2))
    else:
        rho_pts = [0.0, 0.5 * radius, radius]
        mu_pts = [-1.0, 0.0, 1.0]
    if not model.has_core and 0.0 < d < radius:
        rho_pts = sorted(set(rho_pts) | {d})
    panels = [((r, m), cfg.azimuthal_points)
              for r in _intervals(rho_pts) for m in _intervals(mu_pts)]
    ev = _ball_evaluator(model, center, frame, cfg, _kernels(backend))
    return _adapt(ev, panels, flat, cfg, "ball_volume")


def annulus_volume(model: MetricModel, outer_radius: float,
                   cfg: QuadratureConfig = QuadratureConfig(),
                   backend: str | None = None) -> Measure:
    """Volume of ``B_R``: the region between the inner boundary and ``|x| = R``.

    For models without an inner boundary this is the full centered ball.
    """
    R = float(outer_radius)
    a = model.inner_radius
    if not R > a:
        raise BallIntersectsExcisedSet(
            f"outer radius {R} must exceed inner radius {a}")
    flat = 4.0 * math.pi * R ** 3 / 3.0
    hole = 4.0 * math.pi * a ** 3 / 3.0
    if model.kernel_code == 0:
        return Measure(flat, 0.0, 0, flat, 0.0)
    rho_pts = _graded(a, R, False, 0.05 * max(a, 1.0))
    panels = [(((lo, hi), (-1.0, 1.0)), cfg.azimuthal_points)
              for lo, hi in _intervals(rho_pts)]
    ev = _ball_evaluator(model, (0.0, 0.0, 0.0), np.eye(3), cfg,
                         _kernels(backend))
    m = _adapt(ev, panels, flat - hole, cfg, "annulus_volume")
    return replace(m, flat=flat, excess=m.excess - hole)


def sphere_area(model: MetricModel, center, radius: float,
                cfg: QuadratureConfig = QuadratureConfig(),
                method: str = "auto", backend: str | None = None) -> Measure:
    """Area of the coordinate sphere in the induced metric.

    ``method`` is ``"general"`` (pull back ``g`` to the sphere and integrate
    ``sqrt(det h)``), ``"conformal"`` (``g = lambda delta`` so the area
    element is ``lambda dA``; conformal models only) or ``"auto"``.
    """
    center = tuple(float(v) for v in center)
    radius = float(radius)
    if not radius > 0:
        raise ValueError("radius must be positive")
    d = float(np.linalg.norm(center))
    if d == 0.0:
        if model.has_core and not radius > model.excised_radius:
            raise SphereIntersectsExcisedSet(
                f"sphere radius {radius} inside excised ball")
    else:
        _check_ball(model, center, radius, SphereIntersectsExcisedSet)
    if method == "auto":
        method = "conformal" if model.is_conformal else "general"
    if method not in ("general", "conformal"):
        raise ValueError(f"unknown method {method!r}")
    if method == "conformal" and not model.is_conformal:
        raise ValueError("conformal path requires a conformally flat model")
    flat = 4.0 * math.pi * radius ** 2
    if model.kernel_code == 0:
        return Measure(flat, 0.0, 0, flat, 0.0)
    frame = _frame(center)
    scale = _feature_scale(model, center, radius) if d > 0 else radius
    if scale < radius:
        mu_pts = _graded(-1.0, 1.0, False, max(1e-12, (scale / radius) ** 2))
    else:
        mu_pts = [-1.0, 0.0, 1.0]
    panels = [((m,), cfg.azimuthal_points) for m in _intervals(mu_pts)]
    ev = _sphere_evaluator(model, center, frame, radius,
                           method == "general", cfg, _kernels(backend))
    return _adapt(ev, panels, flat, cfg, "sphere_area")
