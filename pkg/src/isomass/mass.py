"""The quasilocal isoperimetric mass and the constructions built on it.

``mql(Omega) = (2/P) (V - P**1.5 / (6 sqrt(pi)))`` with ``V`` the metric
volume and ``P`` the perimeter.  The bracket (the isoperimetric deficit) is
evaluated relative to the Euclidean ball with the same radius as the largest
component, using the flat/excess split of every measure; the naive formula
loses all significant digits once ``V`` is large.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BudgetExhausted, IllConditionedFit, InvalidRegion,
                     OffsetSearchExhausted, ZeroPerimeter)
from .metrics import MetricModel
from .quadrature import Measure, QuadratureConfig
from .regions import (Ball, ComponentMeasure, MeasuredRegion, Region,
                      measure, measure_component, validate_region)

ISO_CONSTANT = 1.0 / (6.0 * math.sqrt(math.pi))
PERIMETER_FACTOR = (36.0 * math.pi) ** (1.0 / 3.0)


def mql_naive(volume: float, perimeter: float) -> float:
    """Direct evaluation of the formula; fine for moderate sizes only."""
    if not perimeter > 0:
        raise ZeroPerimeter("perimeter must be positive")
    return 2.0 / perimeter * (volume - ISO_CONSTANT * perimeter ** 1.5)


def mql_sensitivities(volume: float, perimeter: float) -> tuple[float, float]:
    """Partial derivatives of ``mql`` with respect to volume and perimeter."""
    dV = 2.0 / perimeter
    dP = -2.0 * volume / perimeter ** 2 - ISO_CONSTANT / math.sqrt(perimeter)
    return dV, dP


def deficit(parts) -> float:
    """``V - P**1.5/(6 sqrt(pi))`` of a union of measured components."""
    parts = list(parts)
    ref = max(range(len(parts)), key=lambda i: (parts[i].perimeter.flat, -i))
    dV = dP = 0.0
    for i, p in enumerate(parts):
        if i != ref:
            dV += p.volume.value
            dP += p.perimeter.value
    dV += parts[ref].volume.excess
    dP += parts[ref].perimeter.excess
    V_ref = parts[ref].volume.flat
    P_ref = parts[ref].perimeter.flat
    return dV - V_ref * math.expm1(1.5 * math.log1p(dP / P_ref))


@dataclass(frozen=True)
class MassReport:
    mql: float
    volume: float
    perimeter: float
    propagated_error: float
    deficit: float


def mass_ql(m: MeasuredRegion) -> MassReport:
    P = m.perimeter.value
    if not P > 0:
        raise ZeroPerimeter("perimeter must be positive")
    V = m.volume.value
    dft = deficit(m.parts)
    dV, dP = mql_sensitivities(V, P)
    err = abs(dV) * m.volume.abs_error_bound + abs(dP) * m.perimeter.abs_error_bound
    return MassReport(2.0 * dft / P, V, P, err, dft)


# centered sweeps -----------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    R: float
    mql: float
    volume: float
    perimeter: float
    vol_err: float
    per_err: float
    propagated_error: float


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def sweep_centered(model: MetricModel, radii, cfg=QuadratureConfig(),
                   backend: str | None = None) -> SweepTable:
    radii = [float(r) for r in radii]
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly increasing")
    rows = []
    for R in radii:
        mr = measure(model, Region(annulus=R), cfg, backend)
        rep = mass_ql(mr)
        rows.append(SweepRow(R, rep.mql, rep.volume, rep.perimeter,
                             mr.volume.abs_error_bound,
                             mr.perimeter.abs_error_bound,
                             rep.propagated_error))
    return SweepTable(tuple(rows))


@dataclass(frozen=True)
class LimitEstimate:
    limit: float
    fit_coeffs: tuple[float, float]
    residual: float
    rows_used: int
    propagated_error: float
    model: str = "m + a/R + b/R^2"


def extrapolate(table: SweepTable, floor: float = 1e-4) -> LimitEstimate:
    """Fit ``mql(R) = m + a/R + b/R**2`` to the larger-R half of a sweep.

    ``residual`` is the largest absolute misfit over the rows used.  The fit
    is refused when the residual exceeds ten times the propagated quadrature
    error plus ``floor * max(1, |m|)``; the floor absorbs the ``log(R)/R**2``
    terms the three-parameter model cannot represent.
    """
    rows = table.rows
    if len(rows) < 4:
        raise ValueError("extrapolation needs at least 4 rows")
    if rows[-1].R < 8 * rows[0].R:
        raise ValueError("radii must span at least a factor of 8")
    n = max(4, math.ceil(len(rows) / 2))
    used = rows[-n:]
    R = np.array([r.R for r in used])
    y = np.array([r.mql for r in used])
    R0 = R[0]
    x = R0 / R
    A = np.vstack([np.ones_like(x), x, x * x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    residual = float(np.max(np.abs(A @ coef - y)))
    prop = max(r.propagated_error for r in used)
    est = LimitEstimate(float(coef[0]), (float(coef[1] * R0),
                                         float(coef[2] * R0 * R0)),
                        residual, n, prop)
    if residual > 10.0 * prop + floor * max(1.0, abs(est.limit)):
        raise IllConditionedFit(
            f"fit residual {residual:.3e} too large for a 1/R expansion", est)
    return est


# far off-center balls ---------------------------------------------------------------


@dataclass(frozen=True)
class FarBall:
    ball: Ball
    volume: Measure
    perimeter: Measure
    offset: float
    deficit: float
    attempts: int

    @property
    def component(self) -> ComponentMeasure:
        return ComponentMeasure(self.ball, self.volume, self.perimeter)


def lemma1_inequalities(volume: float, perimeter: float, dft: float,
                        V: float, eps: float) -> tuple[bool, bool, bool]:
    return (volume >= V, perimeter >= PERIMETER_FACTOR * V ** (2.0 / 3.0),
            abs(dft) <= eps)


def _clear_of(model: MetricModel, forbidden: Region | None, ball: Ball,
              keep_out: float) -> bool:
    d = ball.distance_to_origin
    if not d - ball.radius > max(keep_out, model.inner_radius if
                                 model.has_core else -math.inf):
        return False
    if forbidden is None:
        return True
    if forbidden.annulus is not None and not d - ball.radius > forbidden.annulus:
        return False
    return all(math.dist(b.center, ball.center) - b.radius - ball.radius > 0
               for b in forbidden.balls)


def lemma1_construct(model: MetricModel, forbidden: Region | None, V: float,
                     eps: float, cfg=QuadratureConfig(), *,
                     keep_out: float = 0.0, max_doublings: int = 400,
                     backend: str | None = None) -> FarBall:
    """A coordinate ball far from ``forbidden`` with ``|E| >= V`` and small deficit.

    The radius satisfies ``4 pi R^3 / 3 = 2 V``; centers ``(d, 0, 0)`` start
    at ``d = 4 R`` and double until the ball is clear of ``forbidden`` (and of
    ``|x| <= keep_out``) and all three inequalities hold when measured.
    """
    if not (V > 0 and eps > 0):
        raise ValueError("V and eps must be positive")
    R = (3.0 * 2.0 * V / (4.0 * math.pi)) ** (1.0 / 3.0)
    d = 4.0 * R
    last = math.nan
    for attempt in range(1, max_doublings + 1):
        ball = Ball((d, 0.0, 0.0), R)
        if _clear_of(model, forbidden, ball, keep_out):
            cm = measure_component(model, ball, cfg, backend)
            last = deficit([cm])
            if all(lemma1_inequalities(cm.volume.value, cm.perimeter.value,
                                       last, V, eps)):
                return FarBall(ball, cm.volume, cm.perimeter, d, last,
                                    attempt)
        d *= 2.0
        if not math.isfinite(d):
            break
    raise OffsetSearchExhausted(
        f"no admissible offset up to {d:.3e} (last deficit {last:.3e})", last)


# augmenting a region with a far ball ------------------------------------------------


@dataclass(frozen=True)
class AugmentStep:
    V: float
    ball: Ball
    ball_perimeter: float
    ball_deficit: float
    omega_perimeter: float
    mql: float

    @property
    def damping_term(self) -> float:
        """First term of the damping bound for ``|mql(Omega u E)|``."""
        PE = self.ball_perimeter
        return 2.0 / PE * abs(self.ball_deficit) / (1.0 + self.omega_perimeter / PE)

    @property
    def fitted_K(self) -> float:
        """Constant ``K`` making the bound tight: excess over the first term times sqrt(P_E)."""
        return (abs(self.mql) - self.damping_term) * math.sqrt(self.ball_perimeter)


@dataclass(frozen=True)
class Augmentation:
    region: Region
    report: MassReport
    measured: MeasuredRegion
    ball: FarBall
    history: tuple[AugmentStep, ...]


def lemma2_augment(model: MetricModel, omega: Region, eps: float,
                   cfg=QuadratureConfig(), *, keep_out: float = 0.0,
                   max_volume: float = 1e250,
                   backend: str | None = None) -> Augmentation:
    """Add one far ball to ``omega`` so the union has ``|mql| <= eps``.

    Ball volumes follow ``V_k = 2**k max(|omega|, 1)``; each ball's own
    deficit target is chosen so that its contribution to ``|mql|`` is at most
    ``eps / 4``.  The region is always augmented, even if ``omega`` already
    meets the bound.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    problem = validate_region(model, omega)
    if problem:
        raise InvalidRegion(problem)
    m_omega = measure(model, omega, cfg, backend)
    base = max(m_omega.volume.value, 1.0)
    history = []
    best = None
    k = 0
    while True:
        V = base * 2.0 ** k
        if V > max_volume:
            raise BudgetExhausted(
                f"volume budget {max_volume:.3e} reached; best |mql| "
                f"{abs(best.report.mql) if best else math.nan:.3e}",
                best=best)
        target = eps * PERIMETER_FACTOR * V ** (2.0 / 3.0) / 8.0
        l1 = lemma1_construct(model, omega, V, target, cfg,
                              keep_out=keep_out, backend=backend)
        union = omega.with_ball(l1.ball)
        mr = measure(model, union, cfg, backend)
        rep = mass_ql(mr)
        history.append(AugmentStep(V, l1.ball, l1.perimeter.value, l1.deficit,
                                  m_omega.perimeter.value, rep.mql))
        aug = Augmentation(union, rep, mr, l1, tuple(history))
        if best is None or abs(rep.mql) < abs(best.report.mql):
            best = aug
        if abs(rep.mql) <= eps:
            return aug
        k += 1


# exhaustion ---------------------------------------------------------------------


@dataclass(frozen=True)
class ExhaustionStep:
    index: int
    region: Region
    target_eps: float
    achieved_mql_abs: float
    mql: float
    propagated_error: float
    offset_used: float
    ball_radius_used: float
    volume: float
    perimeter: float
    augment_history: tuple[AugmentStep, ...] = ()


@dataclass(frozen=True)
class ExhaustionTrace:
    R0: float
    steps: tuple[ExhaustionStep, ...]
    tail: int = 1
    complete: bool = True

    @property
    def delta(self) -> float:
        """Evaluated bound: max of ``|mql| + error`` over the last ``tail`` steps."""
        aug_steps = [s for s in self.steps if s.index > 1] or list(self.steps)
        tail = aug_steps[-self.tail:]
        return max(s.achieved_mql_abs + s.propagated_error for s in tail)

    def statement(self) -> str:
        return f"m_iso >= -{self.delta:.12g}"


def exhaust(model: MetricModel, R0: float, steps: int,
            cfg=QuadratureConfig(), *, tail: int = 1,
            backend: str | None = None) -> ExhaustionTrace:
    """Nested regions ``B_R0 = O_1, O_2, ...`` with ``|mql(O_{i+1})| <= 1/i``.

    ``O_{i+1}`` augments ``O_i u B_{R0+i}`` by one far ball.  Balls are kept
    outside ``|x| <= R0 + steps - 1`` so every later ``B_{R0+i}`` stays
    disjoint from them.
    """
    R0 = float(R0)
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not R0 > model.inner_radius:
        raise InvalidRegion(f"R0 must exceed {model.inner_radius}")
    region = Region(annulus=R0)
    mr = measure(model, region, cfg, backend)
    rep = mass_ql(mr)
    trace = [ExhaustionStep(1, region, math.nan, abs(rep.mql), rep.mql,
                            rep.propagated_error, math.nan, math.nan,
                            rep.volume, rep.perimeter)]
    keep_out = R0 + steps - 1
    for i in range(1, steps):
        omega = region.with_annulus(R0 + i)
        try:
            aug = lemma2_augment(model, omega, 1.0 / i, cfg,
                                 keep_out=keep_out, backend=backend)
        except BudgetExhausted as exc:
            raise BudgetExhausted(
                str(exc), best=exc.best,
                partial=ExhaustionTrace(R0, tuple(trace), tail, False)) from exc
        region = aug.region
        r = aug.report
        trace.append(ExhaustionStep(
            i + 1, region, 1.0 / i, abs(r.mql), r.mql, r.propagated_error,
            aug.ball.offset, aug.ball.ball.radius, r.volume, r.perimeter,
            aug.history))
    return ExhaustionTrace(R0, tuple(trace), tail)
