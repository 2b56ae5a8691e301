"""Explicit metric models on an asymptotically flat coordinate chart.

All built-in models are diagonal, ``g_ij = (1 + k_i(x)) delta_ij``, and every
kernel works with the deviation ``k_i`` rather than ``g`` itself so that far
from the origin (where ``k`` is tiny) no precision is lost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import PointAtConformalSingularity, PointInExcisedSet

EUCLIDEAN = "euclidean"
SCHWARZSCHILD = "schwarzschild"
CONFORMAL = "conformal"
DIAGONAL = "diagonal"

KINDS = (EUCLIDEAN, SCHWARZSCHILD, CONFORMAL, DIAGONAL)
_KIND_CODES = {EUCLIDEAN: 0, SCHWARZSCHILD: 1, CONFORMAL: 2, DIAGONAL: 3}


@dataclass(frozen=True)
class MetricModel:
    """A metric on the chart together with its declared decay constants.

    ``decay_constant`` and ``decay_rate`` are the user's claim that
    ``max_ij |g_ij - delta_ij| <= C |x|^-tau``; :func:`decay_check` tests it.
    ``mass`` is used by the Schwarzschild kind, ``amplitude`` by the conformal
    kind and ``amplitudes`` by the diagonal kind; ``falloff`` is the rate at
    which the perturbation kinds actually decay.
    """

    kind: str = EUCLIDEAN
    mass: float = 0.0
    amplitude: float = 0.0
    amplitudes: tuple[float, float, float] = (0.0, 0.0, 0.0)
    falloff: float = 1.0
    decay_constant: float = 1.0
    decay_rate: float = 1.0
    kernel_params: tuple[float, float, float, float] = field(
        init=False, repr=False, compare=False
    )

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown metric kind {self.kind!r}")
        object.__setattr__(self, "mass", float(self.mass))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(
            self, "amplitudes", tuple(float(a) for a in self.amplitudes)
        )
        if len(self.amplitudes) != 3:
            raise ValueError("amplitudes must have three entries")
        if not self.falloff > 0:
            raise ValueError("falloff must be positive")
        if not (self.decay_constant > 0 and self.decay_rate > 0):
            raise ValueError("decay constant and rate must be positive")
        # 1 + A w(x) with 0 < w <= 1 stays positive iff A > -1
        if self.kind == CONFORMAL and self.amplitude <= -1:
            raise ValueError("conformal amplitude must exceed -1")
        if self.kind == DIAGONAL and min(self.amplitudes) <= -1:
            raise ValueError("diagonal amplitudes must exceed -1")
        if self.kind == SCHWARZSCHILD:
            p = (self.mass, 0.0, 0.0, 0.0)
        elif self.kind == CONFORMAL:
            p = (self.amplitude, self.falloff, 0.0, 0.0)
        elif self.kind == DIAGONAL:
            p = (*self.amplitudes, self.falloff)
        else:
            p = (0.0, 0.0, 0.0, 0.0)
        object.__setattr__(self, "kernel_params", p)

    # constructors ---------------------------------------------------------

    @classmethod
    def euclidean(cls) -> "MetricModel":
        return cls(EUCLIDEAN)

    @classmethod
    def schwarzschild(cls, mass: float, decay_constant: float | None = None,
                      decay_rate: float = 1.0) -> "MetricModel":
        if decay_constant is None:
            decay_constant = _schwarzschild_default_constant(float(mass))
        return cls(SCHWARZSCHILD, mass=mass, decay_constant=decay_constant,
                   decay_rate=decay_rate)

    @classmethod
    def conformal(cls, amplitude: float, falloff: float,
                  decay_constant: float | None = None,
                  decay_rate: float | None = None) -> "MetricModel":
        return cls(
            CONFORMAL, amplitude=amplitude, falloff=falloff,
            decay_constant=decay_constant or max(abs(amplitude), 1e-300),
            decay_rate=falloff if decay_rate is None else decay_rate,
        )

    @classmethod
    def diagonal(cls, amplitudes: Sequence[float], falloff: float,
                 decay_constant: float | None = None,
                 decay_rate: float | None = None) -> "MetricModel":
        amps = tuple(float(a) for a in amplitudes)
        return cls(
            DIAGONAL, amplitudes=amps, falloff=falloff,
            decay_constant=decay_constant or max(max(map(abs, amps)), 1e-300),
            decay_rate=falloff if decay_rate is None else decay_rate,
        )

    # derived geometry -----------------------------------------------------

    @property
    def kernel_code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def excised_radius(self) -> float:
        """Coordinate radius of the removed closed inner ball."""
        if self.kind == SCHWARZSCHILD and self.mass < 0:
            return -self.mass / 2.0
        return 0.0

    @property
    def inner_radius(self) -> float:
        """Radius of the chart's inner boundary sphere used by regions.

        Negative mass: the excised ball. Positive mass: the horizon
        ``|x| = m/2``, the minimal boundary of the one-ended exterior.
        Zero for models that are regular everywhere.
        """
        if self.kind == SCHWARZSCHILD:
            return abs(self.mass) / 2.0
        return 0.0

    @property
    def has_core(self) -> bool:
        """True if regions must stay outside the closed ball ``inner_radius``."""
        return self.kind == SCHWARZSCHILD and self.mass != 0.0

    @property
    def is_conformal(self) -> bool:
        return self.kind in (EUCLIDEAN, SCHWARZSCHILD, CONFORMAL)

    @property
    def is_isotropic(self) -> bool:
        """Metric depends on |x| only (holds for every built-in kind)."""
        return True

    @property
    def known_adm(self) -> float | None:
        if self.kind == EUCLIDEAN:
            return 0.0
        if self.kind == SCHWARZSCHILD:
            return self.mass
        return None

    def describe(self) -> dict:
        d = {"kind": self.kind, "decay_constant": self.decay_constant,
             "decay_rate": self.decay_rate}
        if self.kind == SCHWARZSCHILD:
            d["mass"] = self.mass
        elif self.kind == CONFORMAL:
            d.update(amplitude=self.amplitude, falloff=self.falloff)
        elif self.kind == DIAGONAL:
            d.update(amplitudes=list(self.amplitudes), falloff=self.falloff)
        return d


def _schwarzschild_default_constant(m: float) -> float:
    # sup of r |(1 + m/2r)^4 - 1| over r >= max(1, |m|) for m < 0 (increasing
    # toward 2|m|) and over r >= 1 for m > 0 (decreasing from r = 1)
    if m == 0:
        return 1.0
    if m < 0:
        return 2.0 * abs(m)
    return (1.0 + m / 2.0) ** 4 - 1.0


def model_from_dict(d: dict) -> MetricModel:
    """Build a model from its config-file description."""
    d = dict(d)
    kind = str(d.pop("kind", EUCLIDEAN)).lower()
    C = d.pop("decay_constant", None)
    tau = d.pop("decay_rate", None)
    if kind == EUCLIDEAN:
        m = MetricModel.euclidean()
        if C is not None or tau is not None:
            m = MetricModel(EUCLIDEAN, decay_constant=C or 1.0,
                            decay_rate=tau or 1.0)
    elif kind == SCHWARZSCHILD:
        m = MetricModel.schwarzschild(float(d.pop("mass")), C,
                                      1.0 if tau is None else tau)
    elif kind == CONFORMAL:
        m = MetricModel.conformal(float(d.pop("amplitude")),
                                  float(d.pop("falloff", 1.0)), C, tau)
    elif kind == DIAGONAL:
        m = MetricModel.diagonal(d.pop("amplitudes"),
                                 float(d.pop("falloff", 1.0)), C, tau)
    else:
        raise ValueError(f"unknown metric kind {kind!r}")
    if d:
        raise ValueError(f"unexpected model keys: {sorted(d)}")
    return m


# pointwise evaluation --------------------------------------------------------


def deviation(model: MetricModel, x: np.ndarray) -> np.ndarray:
    """Diagonal deviations ``k_i = g_ii - 1`` at points ``x`` (shape (..., 3)).

    No admissibility check; callers guarantee points lie in the chart.
    """
    x = np.asarray(x, dtype=float)
    r2 = np.einsum("...i,...i->...", x, x)
    shape = x.shape[:-1] + (3,)
    if model.kind == EUCLIDEAN:
        return np.zeros(shape)
    if model.kind == SCHWARZSCHILD:
        t = model.mass / (2.0 * np.sqrt(r2))
        k = np.expm1(4.0 * np.log1p(t))
        return np.broadcast_to(k[..., None], shape).copy()
    w = np.exp(-0.5 * model.falloff * np.log1p(r2))
    if model.kind == CONFORMAL:
        k = model.amplitude * w
        return np.broadcast_to(k[..., None], shape).copy()
    return w[..., None] * np.asarray(model.amplitudes)


def density_excess(model: MetricModel, x: np.ndarray) -> np.ndarray:
    """``sqrt(det g) - 1`` evaluated without cancellation."""
    k = deviation(model, x)
    return np.expm1(0.5 * np.log1p(k).sum(axis=-1))


def _check_point(model: MetricModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(3)
    r = float(np.linalg.norm(x))
    if model.kind == SCHWARZSCHILD:
        if model.mass < 0:
            if r == model.excised_radius:
                raise PointAtConformalSingularity(
                    f"conformal factor vanishes at |x| = {r}")
            if r < model.excised_radius:
                raise PointInExcisedSet(
                    f"|x| = {r} inside excised ball of radius "
                    f"{model.excised_radius}")
        elif model.mass > 0 and r == 0.0:
            raise PointAtConformalSingularity("conformal factor blows up at 0")
    return x


def metric_at(model: MetricModel, x) -> np.ndarray:
    """The 3x3 metric tensor ``g_ij(x)``."""
    x = _check_point(model, x)
    if model.kind == SCHWARZSCHILD:
        r = float(np.linalg.norm(x))
        return (1.0 + model.mass / (2.0 * r)) ** 4 * np.eye(3)
    return np.diag(1.0 + deviation(model, x))


def volume_density(model: MetricModel, x) -> float:
    """``sqrt(det g(x))``; equals ``u**6`` for ``g = u**4 delta``."""
    x = _check_point(model, x)
    if model.kind == SCHWARZSCHILD:
        r = float(np.linalg.norm(x))
        return (1.0 + model.mass / (2.0 * r)) ** 6
    return float(1.0 + density_excess(model, x))


# decay check -----------------------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    max_violation: float
    passed: bool
    sup_scaled_deviation: float
    samples: int


def fibonacci_directions(n: int) -> np.ndarray:
    """Quasi-uniform unit vectors (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    s = np.sqrt(1.0 - z * z)
    phi = math.pi * (3.0 - math.sqrt(5.0)) * i
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=-1)


def decay_check(model: MetricModel, radii: Iterable[float],
                directions_per_radius: int = 64) -> DecayReport:
    """Sample ``max_ij |g_ij - delta_ij| |x|^tau`` and compare with ``C``.

    ``max_violation`` is how far the sampled supremum exceeds the declared
    constant (zero when the claim holds on the samples).
    """
    radii = [float(r) for r in radii]
    if any(r <= 0 for r in radii) or radii != sorted(radii):
        raise ValueError("radii must be positive and ascending")
    dirs = fibonacci_directions(directions_per_radius)
    sup = 0.0
    for r in radii:
        for x in r * dirs:
            g = metric_at(model, x)
            dev = float(np.max(np.abs(g - np.eye(3))))
            sup = max(sup, dev * r ** model.decay_rate)
    violation = max(0.0, sup - model.decay_constant)
    return DecayReport(violation, sup <= model.decay_constant, sup,
                       len(radii) * directions_per_radius)
