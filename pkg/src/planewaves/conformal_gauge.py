"""Invariant conformal gauges: build a leaf function f with the cocycle
f(u + b) = f(u) - alpha and certify that e^f g is preserved by given
chart maps.

A leaf function depends on u only, so every leaf-preserving isometry of g
is automatically an isometry of e^f g; the cocycle makes the designated
similarity one as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .chart_action import ChartMap, similarity_factor
from .geometry import BrinkmannPoint, MetricAtPoint, ModelSpec, _metric_matrix
from .sampling import brinkmann_samples

__all__ = [
    "GaugeSpec",
    "GaugeFunction",
    "GaugeReport",
    "GaugeMeasurementError",
    "build_gauge",
    "rescaled_metric_at",
    "verify_gauge",
    "measure_gauge_data",
]


class GaugeMeasurementError(ValueError):
    """The chart map does not act by a constant u-translation."""


@dataclass(frozen=True)
class GaugeSpec:
    """Data of a gauge: u-translation length b of the designated element,
    its log conformal factor alpha, and the construction variant."""

    b: float
    alpha: float
    variant: str = "linear"
    phi0: Optional[Callable[[float], float]] = None
    epsilon: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "alpha", float(self.alpha))
        if self.b == 0.0:
            raise ValueError(
                "gauge needs a nontrivial u-translation (b must be nonzero)"
            )
        if self.variant not in ("linear", "bump"):
            raise ValueError(f"unknown gauge variant {self.variant!r}")
        if self.variant == "bump":
            if self.epsilon is None or not 0.0 < self.epsilon < self.b:
                raise ValueError("bump variant requires 0 < epsilon < b")


class GaugeFunction:
    """The leaf profile of a gauge, with FD derivatives up to order 5."""

    def __init__(self, fn: Callable[[float], float], b: float, alpha: float, variant: str):
        self._fn = fn
        self.b = b
        self.alpha = alpha
        self.variant = variant

    def __call__(self, u: float) -> float:
        return float(self._fn(u))

    evaluate = __call__

    def derivative(self, u: float, order: int = 1, step: Optional[float] = None) -> float:
        if not 1 <= order <= 5:
            raise ValueError("derivative order must be between 1 and 5")
        h = step if step is not None else np.finfo(float).eps ** (1.0 / (order + 2))
        total = 0.0
        for j in range(order + 1):
            total += (-1) ** j * math.comb(order, j) * self(u + (order / 2 - j) * h)
        return total / h**order


def _smooth_ramp(s: float) -> float:
    """0 on (-inf, 0], 1 on [1, inf), all derivatives flat at both ends."""
    if s <= 0.0:
        return 0.0
    if s >= 1.0:
        return 1.0
    a = math.exp(-1.0 / s)
    c = math.exp(-1.0 / (1.0 - s))
    return a / (a + c)


def build_gauge(gspec: GaugeSpec) -> GaugeFunction:
    """Build the leaf function satisfying f(u + b) = f(u) - alpha.

    The linear variant is the canonical exact solution -(alpha/b) u.
    The bump variant blends the seed function phi0 into its shifted copy
    phi0 o (u - b) - alpha over one period with a flat-ended mollifier
    ramp and extends by the cocycle; phi0 must be smooth on (-b, b).
    """
    b, alpha = gspec.b, gspec.alpha
    if gspec.variant == "linear":
        return GaugeFunction(lambda u: -(alpha / b) * u, b, alpha, "linear")

    eps = gspec.epsilon
    phi0 = gspec.phi0 if gspec.phi0 is not None else (lambda u: 0.0)

    def f0(u: float) -> float:
        w = _smooth_ramp((u - eps) / (b - eps))
        return (1.0 - w) * phi0(u) + w * (phi0(u - b) - alpha)

    def fbar(u: float) -> float:
        k = math.floor(u / b)
        return f0(u - k * b) - k * alpha

    return GaugeFunction(fbar, b, alpha, "bump")


def rescaled_metric_at(
    spec: ModelSpec, f: GaugeFunction, p: BrinkmannPoint
) -> MetricAtPoint:
    """e^{f(u(p))} . g(p); the factor is constant along each leaf."""
    return MetricAtPoint(math.exp(f(p.u)) * _metric_matrix(spec, p.coords()))


@dataclass(frozen=True)
class GaugeReport:
    b: float
    alpha: float
    variant: str
    per_element: tuple

    @property
    def all_isometries(self) -> bool:
        return all(e["verdict"] == "isometry" for e in self.per_element)

    def to_json_dict(self) -> dict:
        return {
            "b": self.b,
            "alpha": self.alpha,
            "variant": self.variant,
            "per_element": [dict(e) for e in self.per_element],
        }


def verify_gauge(
    spec: ModelSpec,
    f: GaugeFunction,
    elements: Sequence,
    tol: float = 1e-8,
    samples: Optional[Sequence[BrinkmannPoint]] = None,
) -> GaugeReport:
    """Residual of phi*(e^f g) against e^f g for each chart map.

    ``elements`` may contain ChartMaps or (name, ChartMap) pairs; the
    report lists one verdict per element.
    """
    if samples is None:
        samples = brinkmann_samples(spec, 32, seed=0)
    rows = []
    for item in elements:
        if isinstance(item, tuple):
            name, phi = item
        else:
            name, phi = item.name, item
        resid = 0.0
        for p in samples:
            c = p.coords()
            img = phi._forward(c)
            J = phi._jacobian(c)
            pulled = math.exp(f(img[-1])) * (J.T @ _metric_matrix(spec, img) @ J)
            target = math.exp(f(c[-1])) * _metric_matrix(spec, c)
            resid = max(resid, float(np.max(np.abs(pulled - target))))
        rows.append(
            {
                "name": name,
                "residual": resid,
                "verdict": "isometry" if resid <= tol else "not_isometry",
            }
        )
    return GaugeReport(f.b, f.alpha, f.variant, tuple(rows))


def measure_gauge_data(
    spec: ModelSpec,
    phi: ChartMap,
    samples: Optional[Sequence[BrinkmannPoint]] = None,
    tol: float = 1e-10,
):
    """Read (b, alpha) off a chart map: b from the u-displacement, which
    must be sample-independent, and alpha as the log similarity factor.

    Maps that reverse the leaf order (affine but non-translational action
    on u) are rejected.
    """
    if samples is None:
        samples = brinkmann_samples(spec, 32, seed=0)
    disp = [phi.forward(p).u - p.u for p in samples]
    lo, hi = min(disp), max(disp)
    if hi - lo > tol * max(1.0, abs(hi), abs(lo)):
        raise GaugeMeasurementError(
            "u-displacement is not constant across samples; the map does not "
            "preserve the translation structure on the leaf space"
        )
    sim = similarity_factor(spec, phi, samples, tol=1e-8)
    if sim.factor is None:
        raise GaugeMeasurementError(
            f"map is not a similarity within tolerance (residual {sim.max_residual:.3e})"
        )
    return 0.5 * (lo + hi), math.log(sim.factor)
