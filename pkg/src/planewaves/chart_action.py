"""Realize group elements as explicit diffeomorphisms of the Brinkmann
chart, with exact Jacobians, and certify similarity pullbacks numerically.

Every realized map preserves the u-foliation; its action on u is affine
and recorded exactly on the map object.  The Heisenberg realization acts
leafwise: on the leaf at u it applies

    v -> v - b'(u).x - <b(u), b'(u)>/2 + c,      x -> x + b(u),

where (b', b) solves the linear system b'' = S(u) b.  In exponential
coordinates (l', l, c) of the group element the initial state is
(-l', l); with that sign the realization is a homomorphism into chart
maps, acts isometrically, and at u = 0 reduces to the standard leafwise
affine action v -> v + l'.x + <l, l'>/2 + c, x -> x + l.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .geometry import (
    BrinkmannPoint,
    MetricAtPoint,
    ModelSpec,
    NonConstantProfileError,
    ProfileDomainError,
    _metric_matrix,
)
from .lie_core import ConfGroupElement, HeisElement, heis_log

__all__ = [
    "ChartMap",
    "SimilarityReport",
    "ChartPreconditionError",
    "identity_map",
    "compose",
    "realize_heis",
    "realize_conf_flow",
    "realize_translation_flow",
    "realize_flip",
    "realize_K",
    "realize_conf_element",
    "pullback_metric",
    "similarity_factor",
    "fd_jacobian",
]

DEFAULT_ODE_STEPS = 2048


class ChartPreconditionError(ValueError):
    """A chart realization's precondition failed (symmetry, invariance...)."""


@dataclass(frozen=True, eq=False)
class ChartMap:
    """Differentiable self-map of the chart with exact Jacobian evaluation.

    ``u_affine = (s, b)`` records the induced map u -> s u + b exactly;
    every constructor here produces maps whose u-output depends on the
    u-input alone.
    """

    name: str
    _forward: Callable[[np.ndarray], np.ndarray]
    _jacobian: Callable[[np.ndarray], np.ndarray]
    u_affine: tuple

    def forward(self, p: BrinkmannPoint) -> BrinkmannPoint:
        return BrinkmannPoint.from_coords(self._forward(p.coords()))

    def jacobian(self, p: BrinkmannPoint) -> np.ndarray:
        return self._jacobian(p.coords())

    def __matmul__(self, other: "ChartMap") -> "ChartMap":
        return compose(self, other)


def compose(phi: ChartMap, psi: ChartMap) -> ChartMap:
    """phi after psi; Jacobians multiply by the chain rule."""

    def fwd(c):
        return phi._forward(psi._forward(c))

    def jac(c):
        mid = psi._forward(c)
        return phi._jacobian(mid) @ psi._jacobian(c)

    s1, b1 = phi.u_affine
    s2, b2 = psi.u_affine
    return ChartMap(f"({phi.name} o {psi.name})", fwd, jac, (s1 * s2, s1 * b2 + b1))


def identity_map(spec: ModelSpec) -> ChartMap:
    dim = spec.dim
    return ChartMap("id", lambda c: c.copy(), lambda c: np.eye(dim), (1.0, 0.0))


# ---------------------------------------------------------------------------
# Leaf flow: fundamental solution of w' = [[0, S(u)], [I, 0]] w
# ---------------------------------------------------------------------------


class _ConstantLeafFlow:
    def __init__(self, B: np.ndarray):
        n = B.shape[0]
        A = np.zeros((2 * n, 2 * n))
        A[:n, n:] = B
        A[n:, :n] = np.eye(n)
        self._A = A
        self._cache: dict[float, np.ndarray] = {}

    def fundamental(self, u: float) -> np.ndarray:
        got = self._cache.get(u)
        if got is None:
            got = expm(u * self._A)
            self._cache[u] = got
        return got


class _SampledLeafFlow:
    """Grid of fundamental matrices advanced by RK4 from u = 0."""

    def __init__(self, spec: ModelSpec, steps: int):
        lo, hi = spec.profile.domain
        if lo > 0.0 or hi < 0.0:
            raise ProfileDomainError(
                "leafwise realization needs u = 0 inside the profile domain"
            )
        self._spec = spec
        self._h = (hi - lo) / steps
        self._lo, self._hi = lo, hi
        self._pos = self._advance(hi)
        self._neg = self._advance(lo)
        self._cache: dict[float, np.ndarray] = {}

    def _M(self, u: float) -> np.ndarray:
        n = self._spec.n
        M = np.zeros((2 * n, 2 * n))
        M[:n, n:] = self._spec.S(u)
        M[n:, :n] = np.eye(n)
        return M

    def _rk4(self, u0: float, h: float, Phi: np.ndarray) -> np.ndarray:
        k1 = self._M(u0) @ Phi
        k2 = self._M(u0 + h / 2) @ (Phi + (h / 2) * k1)
        k3 = self._M(u0 + h / 2) @ (Phi + (h / 2) * k2)
        k4 = self._M(u0 + h) @ (Phi + h * k3)
        return Phi + (h / 6) * (k1 + 2 * k2 + 2 * k3 + k4)

    def _advance(self, end: float) -> list[np.ndarray]:
        n = self._spec.n
        h = self._h if end >= 0 else -self._h
        out = [np.eye(2 * n)]
        u = 0.0
        while (u + h <= end + 1e-15) if end >= 0 else (u + h >= end - 1e-15):
            out.append(self._rk4(u, h, out[-1]))
            u += h
        return out

    def fundamental(self, u: float) -> np.ndarray:
        got = self._cache.get(u)
        if got is not None:
            return got
        if u < self._lo or u > self._hi:
            raise ProfileDomainError(
                f"u = {u} outside profile domain [{self._lo}, {self._hi}]"
            )
        grid = self._pos if u >= 0 else self._neg
        i = min(int(abs(u) // self._h), len(grid) - 1)
        node = math.copysign(i * self._h, u) if u != 0 else 0.0
        Phi = grid[i]
        delta = u - node
        if delta != 0.0:
            Phi = self._rk4(node, delta, Phi)
        self._cache[u] = Phi
        return Phi


@lru_cache(maxsize=None)
def _leaf_flow(spec: ModelSpec, steps: int):
    if spec.profile.is_constant:
        return _ConstantLeafFlow(spec.profile.B)
    return _SampledLeafFlow(spec, steps)


# ---------------------------------------------------------------------------
# Realizations
# ---------------------------------------------------------------------------


def realize_heis(
    spec: ModelSpec, h: HeisElement, ode_steps: int = DEFAULT_ODE_STEPS
) -> ChartMap:
    """Leafwise action of a Heisenberg element as a chart map.

    Constant profiles use the exact matrix exponential of the state
    system; sampled profiles use RK4 with fixed step (domain length /
    ``ode_steps``).
    """
    if h.n != spec.n:
        raise ValueError("element rank does not match the model")
    X = heis_log(h)
    w0 = np.concatenate([-X.a_plus, X.a_minus])
    c0 = X.z
    flow = _leaf_flow(spec, ode_steps)
    n = spec.n

    def state(u: float):
        w = flow.fundamental(u) @ w0
        return w[:n], w[n:]

    def fwd(c):
        u = c[-1]
        bp, b = state(u)
        out = c.copy()
        out[0] = c[0] - bp @ c[1:-1] - 0.5 * (b @ bp) + c0
        out[1:-1] = c[1:-1] + b
        return out

    def jac(c):
        u = c[-1]
        bp, b = state(u)
        S = spec.S(u)
        J = np.eye(n + 2)
        J[0, 1:-1] = -bp
        J[0, -1] = -(S @ b) @ c[1:-1] - 0.5 * (bp @ bp + b @ (S @ b))
        J[1:-1, -1] = bp
        return J

    return ChartMap(f"heis({h.alpha.tolist()},{h.beta.tolist()},{h.z})", fwd, jac, (1.0, 0.0))


def realize_conf_flow(spec: ModelSpec, t_H: float) -> ChartMap:
    """(v, x, u) -> (e^{2t} v, e^t x, u); a similarity, factor e^{2t}."""
    t = float(t_H)
    dim = spec.dim

    def fwd(c):
        out = c.copy()
        out[0] *= math.exp(2 * t)
        out[1:-1] *= math.exp(t)
        return out

    J = np.eye(dim)
    J[0, 0] = math.exp(2 * t)
    J[1:-1, 1:-1] = math.exp(t) * np.eye(dim - 2)
    J.setflags(write=False)
    return ChartMap(f"homothety({t})", fwd, lambda c: J, (1.0, 0.0))


def realize_translation_flow(spec: ModelSpec, t: float) -> ChartMap:
    """Pure u-translation; an isometry of constant-profile models only."""
    if not spec.profile.is_constant:
        raise NonConstantProfileError(
            "u-translation is only realized for constant profiles"
        )
    t = float(t)
    dim = spec.dim

    def fwd(c):
        out = c.copy()
        out[-1] += t
        return out

    I = np.eye(dim)
    I.setflags(write=False)
    return ChartMap(f"translate({t})", fwd, lambda c: I, (1.0, t))


def realize_flip(spec: ModelSpec, b: float) -> ChartMap:
    """The involution (v, x, u) -> (-v, x, -u + b).

    Requires the profile symmetry S(-u + b) = S(u); constant profiles
    always satisfy it, sampled profiles are checked at their nodes.
    """
    b = float(b)
    if not spec.profile.is_constant:
        lo, hi = spec.profile.domain
        if abs(b - (lo + hi)) > 1e-9:
            raise ChartPreconditionError(
                "flip must map the sampled domain to itself (b = lo + hi)"
            )
        for u in spec.profile.us:
            if np.max(np.abs(spec.S(-u + b) - spec.S(u))) > 1e-9:
                raise ChartPreconditionError(
                    f"profile is not flip-symmetric at u = {u}"
                )
    dim = spec.dim

    def fwd(c):
        out = c.copy()
        out[0] = -c[0]
        out[-1] = -c[-1] + b
        return out

    J = np.eye(dim)
    J[0, 0] = -1.0
    J[-1, -1] = -1.0
    J.setflags(write=False)
    return ChartMap(f"flip(b={b})", fwd, lambda c: J, (-1.0, b))


def realize_K(spec: ModelSpec, k) -> ChartMap:
    """Leafwise rotation (v, x, u) -> (v, k x, u); needs k S(u) k^T = S(u)."""
    k = np.asarray(k, dtype=float)
    n = spec.n
    if k.shape != (n, n) or np.max(np.abs(k.T @ k - np.eye(n))) > 1e-9:
        raise ChartPreconditionError("k must be n x n orthogonal")
    nodes = [0.0] if spec.profile.is_constant else list(spec.profile.us)
    for u in nodes:
        S = spec.S(u)
        if np.max(np.abs(k @ S @ k.T - S)) > 1e-9:
            raise ChartPreconditionError(
                f"rotation does not preserve the profile at u = {u}"
            )
    dim = spec.dim

    def fwd(c):
        out = c.copy()
        out[1:-1] = k @ c[1:-1]
        return out

    J = np.eye(dim)
    J[1:-1, 1:-1] = k
    J.setflags(write=False)
    return ChartMap("rotation", fwd, lambda c: J, (1.0, 0.0))


def realize_conf_element(spec: ModelSpec, g: ConfGroupElement) -> ChartMap:
    """Chart realization of a group element (a, x).

    Decomposed as heis(x) o homothety(t_H) o translate(t_L) o rotation(k);
    the three automorphism flows commute as chart maps.  t_L != 0 needs a
    constant profile.
    """
    if g.n != spec.n:
        raise ValueError("element rank does not match the model")
    if spec.profile.is_constant:
        own = spec.derivation().matrix
        if not np.allclose(own, g.deriv.matrix, rtol=0.0, atol=1e-9):
            raise ValueError(
                "element was built over a different structure derivation"
            )
    phi = realize_conf_flow(spec, g.t_H)
    if g.t_L != 0.0:
        phi = compose(phi, realize_translation_flow(spec, g.t_L))
    if np.max(np.abs(g.k - np.eye(spec.n))) > 1e-14:
        phi = compose(phi, realize_K(spec, g.k))
    if not g.x.is_identity(0.0):
        phi = compose(realize_heis(spec, g.x), phi)
    return ChartMap(f"element(t_H={g.t_H},t_L={g.t_L})", phi._forward, phi._jacobian, phi.u_affine)


# ---------------------------------------------------------------------------
# Pullbacks and similarity certification
# ---------------------------------------------------------------------------


def pullback_metric(spec: ModelSpec, phi: ChartMap, p: BrinkmannPoint) -> MetricAtPoint:
    """(phi* g)(p) = J(p)^T g(phi(p)) J(p)."""
    c = p.coords()
    J = phi._jacobian(c)
    g_img = _metric_matrix(spec, phi._forward(c))
    return MetricAtPoint(J.T @ g_img @ J)


@dataclass(frozen=True)
class SimilarityReport:
    """Least-squares conformal factor and the residual-based verdict."""

    factor: Optional[float]
    max_residual: float
    samples: int
    verdict: str  # isometry | similarity | not_conformal_in_tolerance

    def to_json_dict(self) -> dict:
        return {
            "factor": self.factor,
            "max_residual": self.max_residual,
            "samples": self.samples,
            "verdict": self.verdict,
        }


def similarity_factor(
    spec: ModelSpec,
    phi: ChartMap,
    samples: Sequence[BrinkmannPoint],
    tol: float = 1e-8,
) -> SimilarityReport:
    """Fit phi* g = c . g over the samples and judge by the max residual.

    The constant c minimizes the summed squared entry-wise error over all
    sample points; the verdict is ``isometry`` when c is within tol of 1.
    """
    pts = list(samples)
    if not pts:
        raise ValueError("sample set must be nonempty")
    num = 0.0
    den = 0.0
    pairs = []
    for p in pts:
        A = pullback_metric(spec, phi, p).g
        G = _metric_matrix(spec, p.coords())
        pairs.append((A, G))
        num += float(np.sum(A * G))
        den += float(np.sum(G * G))
    c = num / den
    resid = max(float(np.max(np.abs(A - c * G))) for A, G in pairs)
    if c <= 0 or resid > tol:
        return SimilarityReport(None, resid, len(pts), "not_conformal_in_tolerance")
    verdict = "isometry" if abs(c - 1.0) <= tol else "similarity"
    return SimilarityReport(c, resid, len(pts), verdict)


def fd_jacobian(phi: ChartMap, p: BrinkmannPoint, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of the forward map, for cross-checks."""
    c = p.coords()
    dim = len(c)
    J = np.empty((dim, dim))
    for e in range(dim):
        cp = c.copy(); cm = c.copy()
        cp[e] += h
        cm[e] -= h
        J[:, e] = (phi._forward(cp) - phi._forward(cm)) / (2 * h)
    return J
