"""Brinkmann-chart plane-wave metrics, a finite-difference curvature
engine, and conformal-flatness verdicts.

The metric on R^{n+2} with coordinates ordered (v, x^1..x^n, u) is

    2 du dv + x^T S(u) x du^2 + sum_i (dx^i)^2,

with S(u) a symmetric profile, either constant (Cahen-Wallach case) or a
sampled table interpolated by splines.  All curvature tensors are built
from central finite differences of the metric; the inverse metric is
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import make_interp_spline

from .lie_core import Derivation

__all__ = [
    "ConstantProfile",
    "SampledProfile",
    "ModelSpec",
    "BrinkmannPoint",
    "MetricAtPoint",
    "CurvatureTensors",
    "FlatnessReport",
    "ProfileDomainError",
    "NonConstantProfileError",
    "metric_at",
    "inverse_metric_at",
    "curvature_at",
    "conformal_flatness",
    "check_parallel",
]

#: default step for the central-difference engine.  Chosen so that the
#: cancellation noise eps*|g|/h^2 of second differences stays near 1e-11
#: while one Richardson level keeps the truncation error at O(h^4).
DEFAULT_FD_STEP = 1e-2


class ProfileDomainError(ValueError):
    """Evaluation outside the sampled profile's u-domain."""


class NonConstantProfileError(ValueError):
    """Operation requires a constant (Cahen-Wallach) profile."""


def _sym_check(m: np.ndarray, what: str, tol: float = 1e-9):
    bad = np.unravel_index(np.argmax(np.abs(m - m.T)), m.shape)
    if abs(m[bad] - m.T[bad]) > tol:
        raise ValueError(
            f"{what} is not symmetric at entry {tuple(int(b) for b in bad)}: "
            f"{m[bad]} != {m.T[bad]}"
        )


@dataclass(frozen=True, eq=False)
class ConstantProfile:
    """S(u) = B for all u."""

    B: np.ndarray

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        _sym_check(B, "constant profile B")
        B.setflags(write=False)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.B.shape[0]

    @property
    def is_constant(self) -> bool:
        return True

    @property
    def domain(self):
        return (-math.inf, math.inf)

    @property
    def is_flat(self) -> bool:
        return bool(np.max(np.abs(self.B)) == 0.0)

    def __call__(self, u: float) -> np.ndarray:
        return self.B


@dataclass(frozen=True, eq=False)
class SampledProfile:
    """S(u) given on nodes, interpolated by splines of the given order.

    The default order 5 keeps two nested derivative levels of the
    curvature engine accurate.
    """

    us: np.ndarray
    values: np.ndarray
    order: int = 5

    def __post_init__(self):
        us = np.array(self.us, dtype=float)
        vals = np.array(self.values, dtype=float)
        if us.ndim != 1 or len(us) < self.order + 1:
            raise ValueError("need at least order+1 sample nodes")
        if np.any(np.diff(us) <= 0):
            raise ValueError("sample nodes must be strictly increasing")
        if vals.shape[0] != len(us) or vals.ndim != 3 or vals.shape[1] != vals.shape[2]:
            raise ValueError("values must have shape (m, n, n)")
        for i, m in enumerate(vals):
            _sym_check(m, f"sampled profile S(u={us[i]})")
        us.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "us", us)
        object.__setattr__(self, "values", vals)
        object.__setattr__(
            self, "_spline", make_interp_spline(us, vals, k=self.order)
        )

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def is_constant(self) -> bool:
        return False

    @property
    def domain(self):
        return (float(self.us[0]), float(self.us[-1]))

    @property
    def is_flat(self) -> bool:
        return bool(np.max(np.abs(self.values)) == 0.0)

    def __call__(self, u: float) -> np.ndarray:
        lo, hi = self.domain
        if u < lo or u > hi:
            raise ProfileDomainError(
                f"u = {u} outside sampled profile domain [{lo}, {hi}]"
            )
        S = self._spline(u)
        return 0.5 * (S + S.T)  # interpolation keeps symmetry to rounding


Profile = Union[ConstantProfile, SampledProfile]


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """A plane-wave model: wavefront dimension n, profile S(u), rotation
    block F of the structure derivation, and orthogonal K-generators."""

    n: int
    profile: Profile
    F: np.ndarray = None
    K_generators: tuple = ()

    def __post_init__(self):
        n = int(self.n)
        object.__setattr__(self, "n", n)
        if n < 1:
            raise ValueError("wavefront dimension n must be >= 1")
        if self.profile.n != n:
            raise ValueError("profile dimension does not match n")
        F = np.zeros((n, n)) if self.F is None else np.array(self.F, dtype=float)
        if F.shape != (n, n):
            raise ValueError("F must be n x n")
        if np.max(np.abs(F + F.T)) > 1e-9:
            raise ValueError("F must be antisymmetric")
        F.setflags(write=False)
        object.__setattr__(self, "F", F)
        gens = []
        for k in self.K_generators:
            k = np.array(k, dtype=float)
            if k.shape != (n, n) or np.max(np.abs(k.T @ k - np.eye(n))) > 1e-9:
                raise ValueError("K generators must be n x n orthogonal")
            self._check_k_invariance(k)
            k.setflags(write=False)
            gens.append(k)
        object.__setattr__(self, "K_generators", tuple(gens))

    def _check_k_invariance(self, k: np.ndarray):
        if self.profile.is_constant:
            nodes = [0.0]
        else:
            nodes = self.profile.us
        for u in nodes:
            S = self.profile(u)
            if np.max(np.abs(k @ S @ k.T - S)) > 1e-9:
                raise ValueError(
                    f"K generator does not preserve the profile at u = {u}"
                )

    @property
    def dim(self) -> int:
        return self.n + 2

    @property
    def is_flat(self) -> bool:
        return self.profile.is_flat

    def S(self, u: float) -> np.ndarray:
        return self.profile(u)

    def derivation(self) -> Derivation:
        """Structure derivation [[F, S, 0], [I, F, 0], [0, 0, 0]].

        Only defined for constant profiles; a non-constant S(u) carries no
        canonical derivation here.
        """
        if not self.profile.is_constant:
            raise NonConstantProfileError(
                "structure derivation requires a constant profile"
            )
        return Derivation.from_profile_blocks(self.F, self.profile.B)

    # -- bundled constructors -------------------------------------------------

    @classmethod
    def cahen_wallach(cls, B, F=None, K_generators=()) -> "ModelSpec":
        B = np.asarray(B, dtype=float)
        return cls(B.shape[0], ConstantProfile(B), F, K_generators)

    @classmethod
    def dim3(cls, b: float) -> "ModelSpec":
        """Three-dimensional constant-profile model; K = {-1} in O(1)."""
        return cls.cahen_wallach([[float(b)]], K_generators=([[-1.0]],))

    @classmethod
    def cw4(cls) -> "ModelSpec":
        """The dimension-4 instance with B = [[6, sqrt(15)], [sqrt(15), 4]]."""
        r = math.sqrt(15.0)
        return cls.cahen_wallach([[6.0, r], [r, 4.0]])

    @classmethod
    def isotropic(cls, lam: float = 2.0, n: int = 2) -> "ModelSpec":
        """B = lam * I; conformally flat, all rotations act isometrically."""
        th = math.pi / 4
        rot = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        gens = (rot,) if n == 2 else ()
        return cls.cahen_wallach(lam * np.eye(n), K_generators=gens)

    @classmethod
    def flat(cls, n: int = 1) -> "ModelSpec":
        return cls.cahen_wallach(np.zeros((n, n)))


@dataclass(frozen=True, eq=False)
class BrinkmannPoint:
    """Chart point; coordinate order is fixed as (v, x^1..x^n, u)."""

    v: float
    x: np.ndarray
    u: float

    def __post_init__(self):
        x = np.atleast_1d(np.array(self.x, dtype=float))
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "v", float(self.v))
        object.__setattr__(self, "u", float(self.u))

    @property
    def n(self) -> int:
        return len(self.x)

    def coords(self) -> np.ndarray:
        return np.concatenate([[self.v], self.x, [self.u]])

    @classmethod
    def from_coords(cls, c) -> "BrinkmannPoint":
        c = np.asarray(c, dtype=float)
        return cls(c[0], c[1:-1], c[-1])


@dataclass(frozen=True, eq=False)
class MetricAtPoint:
    """Symmetric (n+2) x (n+2) metric matrix in the fixed coordinate order."""

    g: np.ndarray

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)

    def is_lorentzian(self) -> bool:
        ev = np.linalg.eigvalsh(self.g)
        return int(np.sum(ev < 0)) == 1 and int(np.sum(ev > 0)) == self.g.shape[0] - 1


@dataclass(frozen=True, eq=False)
class CurvatureTensors:
    """Christoffel symbols and curvature tensors at one point.

    ``riemann`` is all-lower; ``weyl`` is present for dim >= 4 only and
    ``cotton`` for dim 3 only.
    """

    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float
    weyl: Optional[np.ndarray] = None
    cotton: Optional[np.ndarray] = None


@dataclass(frozen=True)
class FlatnessReport:
    verdict: str  # conformally_flat | not_conformally_flat
    max_component: float
    witness_point: tuple
    tolerance: float
    dim: int
    sample_values: tuple = field(default=(), repr=False)

    def to_json_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_component": self.max_component,
            "witness_point": list(self.witness_point),
            "tolerance": self.tolerance,
            "dim": self.dim,
        }


# ---------------------------------------------------------------------------
# Metric and exact inverse
# ---------------------------------------------------------------------------


def _metric_matrix(spec: ModelSpec, c: np.ndarray) -> np.ndarray:
    n = spec.n
    g = np.zeros((n + 2, n + 2))
    g[0, -1] = g[-1, 0] = 1.0
    idx = np.arange(1, n + 1)
    g[idx, idx] = 1.0
    x = c[1:-1]
    g[-1, -1] = float(x @ spec.S(c[-1]) @ x)
    return g


def metric_at(spec: ModelSpec, p: BrinkmannPoint) -> MetricAtPoint:
    """Metric matrix at p; raises ProfileDomainError outside the profile."""
    return MetricAtPoint(_metric_matrix(spec, p.coords()))


def _inverse_metric_matrix(spec: ModelSpec, c: np.ndarray) -> np.ndarray:
    n = spec.n
    ginv = np.zeros((n + 2, n + 2))
    ginv[0, -1] = ginv[-1, 0] = 1.0
    idx = np.arange(1, n + 1)
    ginv[idx, idx] = 1.0
    x = c[1:-1]
    ginv[0, 0] = -float(x @ spec.S(c[-1]) @ x)
    return ginv


def inverse_metric_at(spec: ModelSpec, p: BrinkmannPoint) -> np.ndarray:
    """Exact inverse: g^{vu} = 1, g^{vv} = -x^T S x, g^{ii} = 1."""
    return _inverse_metric_matrix(spec, p.coords())


# ---------------------------------------------------------------------------
# Finite differences
# ---------------------------------------------------------------------------


def _dg_step(spec, c, h):
    dim = len(c)
    out = np.empty((dim, dim, dim))
    for e in range(dim):
        cp = c.copy()
        cm = c.copy()
        cp[e] += h
        cm[e] -= h
        out[e] = (_metric_matrix(spec, cp) - _metric_matrix(spec, cm)) / (2 * h)
    return out


def _d2g_step(spec, c, h):
    dim = len(c)
    out = np.empty((dim, dim, dim, dim))
    g0 = _metric_matrix(spec, c)
    for e in range(dim):
        cp = c.copy()
        cm = c.copy()
        cp[e] += h
        cm[e] -= h
        out[e, e] = (
            _metric_matrix(spec, cp) - 2 * g0 + _metric_matrix(spec, cm)
        ) / h**2
    for e in range(dim):
        for f in range(e + 1, dim):
            cpp = c.copy(); cpm = c.copy(); cmp = c.copy(); cmm = c.copy()
            cpp[[e, f]] += h
            cmm[[e, f]] -= h
            cpm[e] += h; cpm[f] -= h
            cmp[e] -= h; cmp[f] += h
            mixed = (
                _metric_matrix(spec, cpp)
                - _metric_matrix(spec, cpm)
                - _metric_matrix(spec, cmp)
                + _metric_matrix(spec, cmm)
            ) / (4 * h**2)
            out[e, f] = mixed
            out[f, e] = mixed
    return out


def _richardson(coarse, fine):
    # central differences have error series c2 h^2 + c4 h^4 + ...
    return (4.0 * fine - coarse) / 3.0


def _metric_derivatives(spec, c, h, richardson):
    if h <= 0:
        raise ValueError("fd_step must be positive")
    dg = _dg_step(spec, c, h)
    d2g = _d2g_step(spec, c, h)
    if richardson:
        dg = _richardson(dg, _dg_step(spec, c, h / 2))
        d2g = _richardson(d2g, _d2g_step(spec, c, h / 2))
    return dg, d2g


def _christoffel(ginv, dg):
    # Gamma^a_{bc} = 1/2 g^{ad} (dg[b,d,c] + dg[c,d,b] - dg[d,b,c])
    t = np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg
    return 0.5 * np.einsum("ad,dbc->abc", ginv, t)


def _christoffel_derivatives(ginv, dg, d2g):
    dginv = -np.einsum("ab,ebc,cd->ead", ginv, dg, ginv)
    t = np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg
    dt = np.einsum("ebdc->edbc", d2g) + np.einsum("ecdb->edbc", d2g) - d2g
    return 0.5 * (
        np.einsum("ead,dbc->eabc", dginv, t) + np.einsum("ad,edbc->eabc", ginv, dt)
    )


def curvature_at(
    spec: ModelSpec,
    p: BrinkmannPoint,
    fd_step: float = DEFAULT_FD_STEP,
    richardson: bool = True,
    with_weyl: Optional[bool] = None,
    with_cotton: Optional[bool] = None,
) -> CurvatureTensors:
    """All curvature tensors of the metric at p by central differences.

    Christoffel symbols come from first metric derivatives, the Riemann
    tensor from second derivatives, Ricci and the scalar by contraction
    with the exact inverse metric.  One Richardson extrapolation level is
    applied by default.
    """
    c = p.coords()
    dim = len(c)
    gamma, dgamma, g, ginv = _connection_data(spec, c, fd_step, richardson)
    riem_up = (
        np.einsum("cadb->abcd", dgamma)
        - np.einsum("dacb->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    riemann = np.einsum("ae,ebcd->abcd", g, riem_up)
    ricci = np.einsum("abad->bd", riem_up)
    scalar = float(np.einsum("bd,bd->", ginv, ricci))

    weyl = None
    cotton = None
    if with_weyl is None:
        with_weyl = dim >= 4
    if with_cotton is None:
        with_cotton = dim == 3
    if with_weyl and dim >= 4:
        weyl = _weyl_from(riemann, ricci, scalar, g, dim)
    if with_cotton and dim == 3:
        cotton = _cotton_at(spec, c, gamma, fd_step, richardson)
    return CurvatureTensors(gamma, riemann, ricci, scalar, weyl, cotton)


def _connection_data(spec, c, fd_step, richardson):
    g = _metric_matrix(spec, c)
    ginv = _inverse_metric_matrix(spec, c)
    dg, d2g = _metric_derivatives(spec, c, fd_step, richardson)
    gamma = _christoffel(ginv, dg)
    dgamma = _christoffel_derivatives(ginv, dg, d2g)
    return gamma, dgamma, g, ginv


def _weyl_from(riemann, ricci, scalar, g, m):
    go_r = (
        np.einsum("ac,bd->abcd", g, ricci)
        - np.einsum("ad,bc->abcd", g, ricci)
        + np.einsum("bd,ac->abcd", g, ricci)
        - np.einsum("bc,ad->abcd", g, ricci)
    )
    go_g = np.einsum("ac,bd->abcd", g, g) - np.einsum("ad,bc->abcd", g, g)
    return riemann - go_r / (m - 2) + scalar * go_g / ((m - 1) * (m - 2))


def _schouten(spec, c, fd_step, richardson):
    # P = Ric - (R/4) g in dimension 3; normalization does not affect the
    # zero/nonzero verdict of the Cotton tensor.
    g = _metric_matrix(spec, c)
    ginv = _inverse_metric_matrix(spec, c)
    dg, d2g = _metric_derivatives(spec, c, fd_step, richardson)
    gamma = _christoffel(ginv, dg)
    dgamma = _christoffel_derivatives(ginv, dg, d2g)
    riem_up = (
        np.einsum("cadb->abcd", dgamma)
        - np.einsum("dacb->abcd", dgamma)
        + np.einsum("ace,edb->abcd", gamma, gamma)
        - np.einsum("ade,ecb->abcd", gamma, gamma)
    )
    ricci = np.einsum("abad->bd", riem_up)
    scalar = float(np.einsum("bd,bd->", ginv, ricci))
    return ricci - 0.25 * scalar * g


def _cotton_at(spec, c, gamma, fd_step, richardson):
    dim = len(c)
    dP = np.empty((dim, dim, dim))

    def p_at(cc):
        return _schouten(spec, cc, fd_step, richardson)

    for e in range(dim):
        def step(h):
            cp = c.copy(); cm = c.copy()
            cp[e] += h
            cm[e] -= h
            return (p_at(cp) - p_at(cm)) / (2 * h)

        d = step(fd_step)
        if richardson:
            d = _richardson(d, step(fd_step / 2))
        dP[e] = d
    P = p_at(c)
    nabla = (
        dP
        - np.einsum("dab,dc->abc", gamma, P)
        - np.einsum("dac,bd->abc", gamma, P)
    )
    return nabla - np.einsum("abc->bac", nabla)


def conformal_flatness(
    spec: ModelSpec,
    sample_points: Sequence[BrinkmannPoint],
    tol: float,
    fd_step: float = DEFAULT_FD_STEP,
) -> FlatnessReport:
    """Verdict from the Weyl tensor (dim >= 4) or Cotton tensor (dim 3).

    The report carries the witness point and the largest component seen.
    """
    if spec.dim < 3:
        raise ValueError("conformal flatness needs dimension >= 3")
    points = list(sample_points)
    if not points:
        raise ValueError("sample set must be nonempty")
    worst = -1.0
    witness = points[0]
    values = []
    for p in points:
        if spec.dim >= 4:
            t = curvature_at(spec, p, fd_step=fd_step, with_weyl=True)
            comp = float(np.max(np.abs(t.weyl)))
        else:
            t = curvature_at(spec, p, fd_step=fd_step, with_cotton=True)
            comp = float(np.max(np.abs(t.cotton)))
        values.append(comp)
        if comp > worst:
            worst = comp
            witness = p
    verdict = "conformally_flat" if worst < tol else "not_conformally_flat"
    return FlatnessReport(
        verdict=verdict,
        max_component=worst,
        witness_point=tuple(witness.coords().tolist()),
        tolerance=tol,
        dim=spec.dim,
        sample_values=tuple(values),
    )


def check_parallel(
    spec: ModelSpec,
    fld: str,
    samples: Sequence[BrinkmannPoint],
    fd_step: float = DEFAULT_FD_STEP,
) -> float:
    """Max norm of the covariant derivative of a coordinate vector field.

    ``fld`` is ``"v"``, ``"u"``, or ``"x<i>"`` with 1-based i.  For a
    constant coordinate field e_mu the components of nabla e_mu are just
    Gamma^b_{a mu}.
    """
    dim = spec.dim
    if fld == "v":
        mu = 0
    elif fld == "u":
        mu = dim - 1
    elif fld.startswith("x"):
        i = int(fld[1:])
        if not 1 <= i <= spec.n:
            raise ValueError(f"no coordinate field {fld}")
        mu = i
    else:
        raise ValueError(f"unknown field {fld!r}; use 'v', 'u' or 'x<i>'")
    worst = 0.0
    for p in samples:
        t = curvature_at(
            spec, p, fd_step=fd_step, with_weyl=False, with_cotton=False
        )
        worst = max(worst, float(np.max(np.abs(t.christoffel[:, :, mu]))))
    return worst
