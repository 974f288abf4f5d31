"""Seeded low-discrepancy sample points for the verification loops."""

from __future__ import annotations

from typing import Union

from scipy.stats import qmc

from .geometry import BrinkmannPoint, ModelSpec

__all__ = ["brinkmann_samples"]


def brinkmann_samples(
    spec: Union[ModelSpec, int],
    count: int = 32,
    seed: int = 0,
    box: tuple = (-2.0, 2.0),
) -> list:
    """Quasi-random chart points in the box [lo, hi]^(n+2).

    Deterministic for a fixed seed; accepts a model or a bare n.
    """
    n = spec.n if isinstance(spec, ModelSpec) else int(spec)
    lo, hi = box
    sampler = qmc.Halton(d=n + 2, scramble=True, seed=seed)
    pts = lo + (hi - lo) * sampler.random(count)
    return [BrinkmannPoint(row[0], row[1:-1], row[-1]) for row in pts]
