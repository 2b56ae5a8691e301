"""Finite disjoint unions of coordinate balls plus at most one centered B_R."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable

from .errors import InvalidRegion
from .metrics import MetricModel
from .quadrature import (Measure, QuadratureConfig, annulus_volume,
                         ball_volume, sphere_area)


@dataclass(frozen=True, order=True)
class Ball:
    center: tuple[float, float, float]
    radius: float

    def __post_init__(self):
        c = tuple(float(v) for v in self.center)
        if len(c) != 3:
            raise ValueError("ball center must have three coordinates")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", float(self.radius))

    @property
    def distance_to_origin(self) -> float:
        return math.sqrt(sum(v * v for v in self.center))

    def literal(self) -> str:
        return "ball:" + ",".join(_fmt(v) for v in (*self.center, self.radius))


@dataclass(frozen=True)
class Region:
    """``annulus`` is the outer radius of the centered component ``B_R``.

    Balls are stored in canonical (sorted) order, so two regions listing the
    same components compare and measure identically.
    """

    annulus: float | None = None
    balls: tuple[Ball, ...] = field(default=())

    def __post_init__(self):
        balls = tuple(b if isinstance(b, Ball) else Ball(*b)
                      for b in self.balls)
        object.__setattr__(self, "balls", tuple(sorted(balls)))
        if self.annulus is not None:
            object.__setattr__(self, "annulus", float(self.annulus))

    def components(self) -> list:
        comps: list = ([("annulus", self.annulus)]
                       if self.annulus is not None else [])
        return comps + list(self.balls)

    def with_ball(self, ball: Ball) -> "Region":
        return Region(self.annulus, self.balls + (ball,))

    def with_annulus(self, R: float) -> "Region":
        return Region(R, self.balls)

    def literal(self) -> str:
        parts = ([f"annulus:{_fmt(self.annulus)}"]
                 if self.annulus is not None else [])
        parts += [b.literal() for b in self.balls]
        return "+".join(parts)

    def to_dict(self) -> dict:
        return {"annulus": self.annulus,
                "balls": [{"center": list(b.center), "radius": b.radius}
                          for b in self.balls]}

    def __str__(self) -> str:
        return self.literal() or "<empty>"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def parse_region(text) -> Region:
    """Parse ``"annulus:10+ball:100,0,0,5"`` or the JSON/dict form."""
    if isinstance(text, Region):
        return text
    if isinstance(text, dict):
        return _region_from_dict(text)
    s = str(text).strip()
    if s.startswith("{"):
        return _region_from_dict(json.loads(s))
    annulus = None
    balls = []
    if not s:
        raise ValueError("empty region literal")
    for part in s.split("+"):
        kind, _, rest = part.strip().partition(":")
        kind = kind.strip().lower()
        try:
            nums = [float(v) for v in rest.split(",")]
        except ValueError as exc:
            raise ValueError(f"bad numbers in component {part!r}") from exc
        if kind == "annulus" and len(nums) == 1:
            if annulus is not None:
                raise ValueError("at most one annulus component")
            annulus = nums[0]
        elif kind == "ball" and len(nums) == 4:
            balls.append(Ball(tuple(nums[:3]), nums[3]))
        else:
            raise ValueError(f"bad region component {part!r}")
    return Region(annulus, tuple(balls))


def _region_from_dict(d: dict) -> Region:
    balls = tuple(Ball(tuple(b["center"]), b["radius"])
                  for b in d.get("balls", ()))
    return Region(d.get("annulus"), balls)


def validate_region(model: MetricModel, region: Region) -> str | None:
    """Return ``None`` if the region is valid, else a description."""
    R = region.annulus
    if R is not None:
        if not R > 0:
            return f"annulus radius must be positive, got {R}"
        if model.has_core and not R > model.inner_radius:
            return (f"annulus radius {R} does not exceed the inner boundary "
                    f"radius {model.inner_radius}")
    if R is None and not region.balls:
        return "empty region"
    for i, b in enumerate(region.balls):
        if not b.radius > 0:
            return f"ball[{i}] has nonpositive radius"
        d = b.distance_to_origin
        if model.has_core and not d - b.radius > model.inner_radius:
            return (f"ball[{i}] {b.literal()} intersects excised set "
                    f"(|x| <= {model.inner_radius})")
        if R is not None:
            gap = d - b.radius - R
            if gap < 0:
                return f"overlapping components: annulus and ball[{i}]"
            if gap == 0:
                return f"touching components: annulus and ball[{i}]"
    for i, a in enumerate(region.balls):
        for j in range(i + 1, len(region.balls)):
            b = region.balls[j]
            gap = math.dist(a.center, b.center) - a.radius - b.radius
            if gap < 0:
                return f"overlapping components: ball[{i}] and ball[{j}]"
            if gap == 0:
                return f"touching components: ball[{i}] and ball[{j}]"
    return None


def region_gap(model: MetricModel, region: Region) -> float:
    """Smallest chart distance between components or to the inner boundary."""
    gaps = []
    R = region.annulus
    if model.has_core:
        if R is not None:
            gaps.append(R - model.inner_radius)
        gaps += [b.distance_to_origin - b.radius - model.inner_radius
                 for b in region.balls]
    if R is not None:
        gaps += [b.distance_to_origin - b.radius - R for b in region.balls]
    bs = region.balls
    for i in range(len(bs)):
        for j in range(i + 1, len(bs)):
            gaps.append(math.dist(bs[i].center, bs[j].center)
                        - bs[i].radius - bs[j].radius)
    return min(gaps) if gaps else math.inf


@dataclass(frozen=True)
class ComponentMeasure:
    component: object
    volume: Measure
    perimeter: Measure


@dataclass(frozen=True)
class MeasuredRegion:
    region: Region
    volume: Measure
    perimeter: Measure
    parts: tuple[ComponentMeasure, ...]


@lru_cache(maxsize=8192)
def measure_component(model: MetricModel, component, cfg: QuadratureConfig,
                      backend: str | None = None) -> ComponentMeasure:
    if isinstance(component, Ball):
        vol = ball_volume(model, component.center, component.radius, cfg,
                          backend=backend)
        per = sphere_area(model, component.center, component.radius, cfg,
                          backend=backend)
    else:
        R = component[1]
        vol = annulus_volume(model, R, cfg, backend=backend)
        per = sphere_area(model, (0.0, 0.0, 0.0), R, cfg, backend=backend)
    return ComponentMeasure(component, vol, per)


def combine(measures: Iterable[Measure]) -> Measure:
    """Sum component measures left to right (callers pass canonical order)."""
    value = err = flat = excess = 0.0
    evals = 0
    ok = True
    for m in measures:
        value += m.value
        err += m.abs_error_bound
        flat += m.flat
        excess += m.excess
        evals += m.evaluations
        ok = ok and m.converged
    return Measure(value, err, evals, flat, excess, ok)


def assemble(region: Region, parts) -> MeasuredRegion:
    parts = tuple(parts)
    return MeasuredRegion(region, combine(p.volume for p in parts),
                          combine(p.perimeter for p in parts), parts)


def measure(model: MetricModel, region: Region,
            cfg: QuadratureConfig = QuadratureConfig(),
            backend: str | None = None) -> MeasuredRegion:
    """Metric volume and perimeter of a valid region."""
    problem = validate_region(model, region)
    if problem:
        raise InvalidRegion(problem)
    parts = [measure_component(model, c, cfg, backend)
             for c in region.components()]
    return assemble(region, parts)
