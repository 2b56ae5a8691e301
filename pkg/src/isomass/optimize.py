"""Derivative-free search for large ``mql`` over low-dimensional region families.

Every value found is an evaluated quasilocal mass of an explicit region;
for families that can be pushed to infinity inside an exhaustion (far
off-center balls) these values serve as numerical lower-bound evidence for
the isoperimetric mass of the end.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

from .errors import IsomassError
from .mass import mass_ql
from .metrics import MetricModel
from .quadrature import QuadratureConfig
from .regions import Ball, Region, measure, region_gap, validate_region

FAMILIES = ("centered_annulus", "offset_ball", "annulus_plus_ball", "k_balls")
# members can be embedded in exhaustions with d -> infinity
LOWER_BOUND_FAMILIES = frozenset({"offset_ball"})


@dataclass(frozen=True)
class FamilySpec:
    family: str
    bounds: tuple[tuple[str, float, float], ...]
    min_gap: float = 1e-6
    k: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not self.min_gap > 0:
            raise ValueError("min_gap must be positive")
        names = [b[0] for b in self.bounds]
        if names != param_names(self.family, self.k):
            raise ValueError(f"bounds must be given for {param_names(self.family, self.k)}")
        for name, lo, hi in self.bounds:
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"bad bounds for {name}: [{lo}, {hi}]")
        if len(self.bounds) > 6:
            raise ValueError("families are limited to 6 parameters")

    @property
    def names(self) -> list[str]:
        return [b[0] for b in self.bounds]

    @classmethod
    def from_dict(cls, d: dict) -> "FamilySpec":
        family = d["family"]
        k = int(d.get("k", 1))
        raw = d["bounds"]
        if family == "k_balls":
            if not 1 <= k <= 4:
                raise ValueError("k_balls needs 1 <= k <= 4")
            raw = dict(raw)
            gap = raw.pop("gap", None)
            for i in range(2, k + 1):
                raw.setdefault(f"g{i}", gap)
        bounds = tuple((n, float(raw[n][0]), float(raw[n][1]))
                       for n in param_names(family, k))
        return cls(family, bounds, float(d.get("min_gap", 1e-6)), k)

    def to_dict(self) -> dict:
        return {"family": self.family, "k": self.k, "min_gap": self.min_gap,
                "bounds": {n: [lo, hi] for n, lo, hi in self.bounds}}


def param_names(family: str, k: int = 1) -> list[str]:
    if family == "centered_annulus":
        return ["R"]
    if family == "offset_ball":
        return ["R", "d"]
    if family == "annulus_plus_ball":
        return ["R_annulus", "R_ball", "d"]
    if family == "k_balls":
        return ["R", "d1"] + [f"g{i}" for i in range(2, k + 1)]
    raise ValueError(f"unknown family {family!r}")


def build_region(spec: FamilySpec, params) -> Region:
    p = [float(v) for v in params]
    if spec.family == "centered_annulus":
        return Region(annulus=p[0])
    if spec.family == "offset_ball":
        return Region(balls=(Ball((p[1], 0.0, 0.0), p[0]),))
    if spec.family == "annulus_plus_ball":
        return Region(p[0], (Ball((p[2], 0.0, 0.0), p[1]),))
    R, x = p[0], p[1]
    balls = [Ball((x, 0.0, 0.0), R)]
    for g in p[2:]:
        x = x + 2.0 * R + g
        balls.append(Ball((x, 0.0, 0.0), R))
    return Region(balls=tuple(balls))


def evaluate(model: MetricModel, spec: FamilySpec, params,
             cfg: QuadratureConfig = QuadratureConfig(),
             backend: str | None = None) -> float | None:
    """``mql`` of the family member, or ``None`` if it is infeasible."""
    for (name, lo, hi), v in zip(spec.bounds, params):
        if not lo <= v <= hi:
            raise ValueError(f"{name}={v} outside [{lo}, {hi}]")
    try:
        region = build_region(spec, params)
    except ValueError:
        return None
    if validate_region(model, region) or region_gap(model, region) < spec.min_gap:
        return None
    try:
        return mass_ql(measure(model, region, cfg, backend)).mql
    except IsomassError:
        return None


@dataclass(frozen=True)
class SearchResult:
    family: str
    best_params: dict
    best_mql: float
    best_region: Region | None
    evaluations: int
    history: tuple[tuple[tuple[float, ...], float | None], ...]
    lower_bound_family: bool
    note: str = ""


class _BudgetSpent(Exception):
    pass


class _Scaler:
    """Maps parameters to the unit cube, logarithmically for wide ranges."""

    def __init__(self, spec: FamilySpec):
        self.lo = np.array([b[1] for b in spec.bounds])
        self.hi = np.array([b[2] for b in spec.bounds])
        self.log = (self.lo > 0) & (self.hi / np.where(self.lo > 0, self.lo, 1) >= 100)

    def to_params(self, u) -> tuple[float, ...]:
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        lin = self.lo + u * (self.hi - self.lo)
        lg = np.exp(np.log(np.where(self.log, self.lo, 1))
                    + u * (np.log(np.where(self.log, self.hi, 1))
                           - np.log(np.where(self.log, self.lo, 1))))
        x = np.where(self.log, lg, lin)
        return tuple(float(v) for v in np.clip(x, self.lo, self.hi))


def search(model: MetricModel, spec: FamilySpec, budget: int, seed: int = 0,
           cfg: QuadratureConfig = QuadratureConfig(), *, restarts: int = 4,
           simplex_scale: float = 0.15, initial_fraction: float = 0.25,
           backend: str | None = None) -> SearchResult:
    """Multi-start bounded Nelder-Mead maximization of ``mql``.

    A space-filling design (an even grid for one-parameter families) takes
    ``initial_fraction`` of the budget; the best ``restarts`` design points
    seed local simplex searches sharing the rest.  Infeasible members score
    ``-inf``.  Deterministic for a fixed seed.
    """
    if budget < 20:
        raise ValueError("budget must be >= 20")
    n = len(spec.bounds)
    scaler = _Scaler(spec)
    history: list[tuple[tuple[float, ...], float | None]] = []

    def f(u):
        if len(history) >= budget:
            raise _BudgetSpent
        params = scaler.to_params(u)
        val = evaluate(model, spec, params, cfg, backend)
        history.append((params, val))
        return math.inf if val is None else -val

    n_init = max(restarts, int(budget * initial_fraction))
    if n == 1:
        design = np.linspace(0.0, 1.0, n_init)[:, None]
    else:
        design = qmc.LatinHypercube(d=n, seed=np.random.default_rng(seed)).random(n_init)
    scores = [f(u) for u in design]
    order = sorted(range(n_init), key=lambda i: (scores[i], i))
    starts = [design[i] for i in order[:restarts] if math.isfinite(scores[i])]
    for j, u0 in enumerate(starts):
        remaining = budget - len(history)
        if remaining <= n + 1:
            break
        per = remaining // (len(starts) - j)
        simplex = [u0]
        for i in range(n):
            v = u0.copy()
            step = simplex_scale if u0[i] + simplex_scale <= 1.0 else -simplex_scale
            v[i] = u0[i] + step
            simplex.append(v)
        try:
            minimize(f, u0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * n,
                     options={"maxfev": per, "initial_simplex": np.array(simplex),
                              "xatol": 1e-9, "fatol": 1e-13})
        except _BudgetSpent:
            break

    feasible = [(i, h) for i, h in enumerate(history) if h[1] is not None]
    if not feasible:
        return SearchResult(spec.family, {}, -math.inf, None, len(history),
                            tuple(history), spec.family in LOWER_BOUND_FAMILIES,
                            "no feasible member found")
    i_best, (p_best, v_best) = max(feasible, key=lambda t: (t[1][1], -t[0]))
    lb = spec.family in LOWER_BOUND_FAMILIES
    note = ("members embed in exhaustions (far balls): values are lower-bound "
            "evidence for m_iso" if lb else
            "no exhaustion embedding for this family: values are not lower "
            "bounds for m_iso")
    return SearchResult(spec.family, dict(zip(spec.names, p_best)), v_best,
                        build_region(spec, p_best), len(history),
                        tuple(history), lb, note)
