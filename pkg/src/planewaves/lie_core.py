"""Exact arithmetic for the Heisenberg group, its derivations and
automorphisms, and the homothety-extended similarity group built on it.

Conventions
-----------
Group elements carry coordinates ``(alpha, beta, z)`` of the affine matrix
model: an element is the affine map of R^{n+1} with unipotent linear part
``[[1, alpha^T], [0, I_n]]`` and translation ``(z, beta)``, so the product
cocycle is ``alpha1 . beta2``.  Algebra elements carry coordinates
``(a_plus, a_minus, z)`` in the ordered basis (a+, a-, z); the only
nonzero brackets are ``[a+_i, a-_j] = delta_ij . z``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag, expm

__all__ = [
    "HeisAlgebraElement",
    "HeisElement",
    "Derivation",
    "HeisAutomorphism",
    "ConfGroupElement",
    "ContractionReport",
    "DimensionMismatchError",
    "DerivationError",
    "AutomorphismError",
    "EigenvalueOneError",
    "IncompatibleGroupError",
    "bracket",
    "heis_mul",
    "heis_inv",
    "heis_exp",
    "heis_log",
    "exp_derivation",
    "rho_k",
    "spectral_type",
    "group_identity",
    "group_mul",
    "group_inv",
    "group_pow",
    "group_conjugate",
    "adjoint",
    "conjugate_to_linear",
    "contraction_test",
]

#: residual allowed when checking the derivation law / bracket preservation
DERIVATION_TOL = 1e-10
BRACKET_TOL = 1e-10
#: tolerance on real/imaginary parts when classifying spectra
SPECTRAL_TOL = 1e-9


class DimensionMismatchError(ValueError):
    """Operands live over Heisenberg groups of different rank."""


class DerivationError(ValueError):
    """Matrix fails the derivation law or the required block shape."""


class AutomorphismError(ValueError):
    """Matrix does not define a bracket-preserving automorphism."""


class EigenvalueOneError(ValueError):
    """Linearization needs an automorphism with no eigenvalue equal to 1."""


class IncompatibleGroupError(ValueError):
    """Group elements built over different structure derivations."""


def _ro(a, shape=None) -> np.ndarray:
    """Copy to a read-only float array (values are immutable after construction)."""
    out = np.array(a, dtype=float)
    if shape is not None and out.shape != shape:
        raise ValueError(f"expected array of shape {shape}, got {out.shape}")
    out.setflags(write=False)
    return out


def _vec_bracket(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bracket of two algebra coordinate vectors; lands in the center."""
    n = (len(u) - 1) // 2
    out = np.zeros(len(u))
    out[-1] = u[:n] @ v[n : 2 * n] - v[:n] @ u[n : 2 * n]
    return out


# ---------------------------------------------------------------------------
# Lie algebra and group elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class HeisAlgebraElement:
    """Element of the (2n+1)-dimensional two-step nilpotent algebra.

    Coordinates split as (a_plus, a_minus, z) with z spanning the center.
    """

    a_plus: np.ndarray
    a_minus: np.ndarray
    z: float

    def __post_init__(self):
        object.__setattr__(self, "a_plus", _ro(np.atleast_1d(self.a_plus)))
        object.__setattr__(self, "a_minus", _ro(np.atleast_1d(self.a_minus)))
        object.__setattr__(self, "z", float(self.z))
        if self.a_plus.shape != self.a_minus.shape or self.a_plus.ndim != 1:
            raise DimensionMismatchError(
                "a_plus and a_minus must be vectors of equal length"
            )

    @property
    def n(self) -> int:
        return len(self.a_plus)

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.a_plus, self.a_minus, [self.z]])

    @classmethod
    def from_vector(cls, v) -> "HeisAlgebraElement":
        v = np.asarray(v, dtype=float)
        n = (len(v) - 1) // 2
        if len(v) != 2 * n + 1:
            raise DimensionMismatchError("algebra vectors have odd length 2n+1")
        return cls(v[:n], v[n : 2 * n], v[-1])

    def norm(self) -> float:
        return float(np.linalg.norm(self.as_vector()))


def bracket(X: HeisAlgebraElement, Y: HeisAlgebraElement) -> HeisAlgebraElement:
    """[X, Y] = (0, 0, X+ . Y-  -  Y+ . X-); central, so two-step nilpotent."""
    if X.n != Y.n:
        raise DimensionMismatchError("bracket of elements of different rank")
    z = float(X.a_plus @ Y.a_minus - Y.a_plus @ X.a_minus)
    return HeisAlgebraElement(np.zeros(X.n), np.zeros(X.n), z)


@dataclass(frozen=True, eq=False)
class HeisElement:
    """Group element (alpha, beta, z) of the affine matrix model."""

    alpha: np.ndarray
    beta: np.ndarray
    z: float

    def __post_init__(self):
        object.__setattr__(self, "alpha", _ro(np.atleast_1d(self.alpha)))
        object.__setattr__(self, "beta", _ro(np.atleast_1d(self.beta)))
        object.__setattr__(self, "z", float(self.z))
        if self.alpha.shape != self.beta.shape or self.alpha.ndim != 1:
            raise DimensionMismatchError("alpha and beta must be vectors of equal length")

    @property
    def n(self) -> int:
        return len(self.alpha)

    @classmethod
    def identity(cls, n: int) -> "HeisElement":
        return cls(np.zeros(n), np.zeros(n), 0.0)

    @classmethod
    def center(cls, z: float, n: int = 1) -> "HeisElement":
        return cls(np.zeros(n), np.zeros(n), float(z))

    def is_identity(self, tol: float = 1e-12) -> bool:
        return bool(
            np.all(np.abs(self.alpha) <= tol)
            and np.all(np.abs(self.beta) <= tol)
            and abs(self.z) <= tol
        )

    def __mul__(self, other: "HeisElement") -> "HeisElement":
        return heis_mul(self, other)


def heis_mul(h1: HeisElement, h2: HeisElement) -> HeisElement:
    """Product in the matrix model; the cocycle term is alpha1 . beta2."""
    if h1.n != h2.n:
        raise DimensionMismatchError("product of elements of different rank")
    return HeisElement(
        h1.alpha + h2.alpha,
        h1.beta + h2.beta,
        h1.z + h2.z + float(h1.alpha @ h2.beta),
    )


def heis_inv(h: HeisElement) -> HeisElement:
    return HeisElement(-h.alpha, -h.beta, -h.z + float(h.alpha @ h.beta))


def heis_exp(X: HeisAlgebraElement) -> HeisElement:
    """exp(a, b, c) = (a, b, c + a.b/2); exact for a two-step algebra."""
    return HeisElement(X.a_plus, X.a_minus, X.z + 0.5 * float(X.a_plus @ X.a_minus))


def heis_log(h: HeisElement) -> HeisAlgebraElement:
    """Exact inverse of :func:`heis_exp`."""
    return HeisAlgebraElement(h.alpha, h.beta, h.z - 0.5 * float(h.alpha @ h.beta))


# ---------------------------------------------------------------------------
# Derivations
# ---------------------------------------------------------------------------


def derivation_residual(matrix: np.ndarray) -> float:
    """Max violation of D[X,Y] = [DX,Y] + [X,DY] over all basis pairs."""
    m = np.asarray(matrix, dtype=float)
    dim = m.shape[0]
    basis = np.eye(dim)
    worst = 0.0
    for i in range(dim):
        for j in range(i + 1, dim):
            lhs = m @ _vec_bracket(basis[i], basis[j])
            rhs = _vec_bracket(m @ basis[i], basis[j]) + _vec_bracket(
                basis[i], m @ basis[j]
            )
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@dataclass(frozen=True, eq=False)
class Derivation:
    """Derivation of the algebra, as a matrix in the basis (a+, a-, z)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _ro(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 == 0:
            raise DerivationError("derivation matrix must be square of odd size 2n+1")
        res = derivation_residual(m)
        if res > DERIVATION_TOL:
            raise DerivationError(f"derivation law violated, residual {res:.3e}")

    @property
    def n(self) -> int:
        return (self.matrix.shape[0] - 1) // 2

    @classmethod
    def from_profile_blocks(cls, F, B) -> "Derivation":
        """Build the block form [[F, B, 0], [I, F, 0], [0, 0, 0]].

        F must be antisymmetric and B symmetric; the result is trivial on
        the center, which is exactly the complete family.
        """
        F = np.asarray(F, dtype=float)
        B = np.asarray(B, dtype=float)
        n = F.shape[0]
        if F.shape != (n, n) or B.shape != (n, n):
            raise DerivationError("F and B must be square of equal size")
        if np.max(np.abs(F + F.T)) > 1e-10:
            raise DerivationError("F must be antisymmetric")
        if np.max(np.abs(B - B.T)) > 1e-10:
            raise DerivationError("B must be symmetric")
        m = np.zeros((2 * n + 1, 2 * n + 1))
        m[:n, :n] = F
        m[:n, n : 2 * n] = B
        m[n : 2 * n, :n] = np.eye(n)
        m[n : 2 * n, n : 2 * n] = F
        return cls(m)

    @classmethod
    def homothety(cls, n: int) -> "Derivation":
        """diag(I_n, I_n, 2): generates the homothety flow on the algebra."""
        d = np.ones(2 * n + 1)
        d[-1] = 2.0
        return cls(np.diag(d))

    def a_block(self) -> np.ndarray:
        """Restriction to a+ (+) a-."""
        n = self.n
        return np.array(self.matrix[: 2 * n, : 2 * n])

    def eigenvalues(self) -> np.ndarray:
        """Full spectrum, sorted by (real, imag)."""
        ev = np.linalg.eigvals(self.matrix)
        order = np.lexsort((ev.imag, ev.real))
        return ev[order]


def spectral_type(D: Derivation, tol: float = SPECTRAL_TOL) -> str:
    """Classify the nonzero spectrum of D restricted to a+ (+) a-.

    Returns one of ``hyperbolic`` (all nonzero eigenvalues real),
    ``elliptic`` (all purely imaginary), ``unipotent`` (no nonzero
    eigenvalues), or ``mixed``.  Eigenvalues within tolerance of more
    than one class yield ``mixed`` rather than a guess.
    """
    ev = np.linalg.eigvals(D.a_block())
    nonzero = [lam for lam in ev if abs(lam) > tol]
    if not nonzero:
        return "unipotent"
    real = all(abs(lam.imag) <= tol for lam in nonzero)
    imag = all(abs(lam.real) <= tol for lam in nonzero)
    if real and not imag:
        return "hyperbolic"
    if imag and not real:
        return "elliptic"
    return "mixed"


# ---------------------------------------------------------------------------
# Automorphisms
# ---------------------------------------------------------------------------


def _bracket_preservation_residual(m: np.ndarray) -> float:
    dim = m.shape[0]
    basis = np.eye(dim)
    worst = 0.0
    for i in range(dim):
        for j in range(i + 1, dim):
            lhs = m @ _vec_bracket(basis[i], basis[j])
            rhs = _vec_bracket(m @ basis[i], m @ basis[j])
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


@dataclass(frozen=True, eq=False)
class HeisAutomorphism:
    """Automorphism acting on log-coordinates; preserves brackets.

    The induced group action is x -> exp(matrix . log x).
    """

    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        m = _ro(self.matrix)
        object.__setattr__(self, "matrix", m)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] % 2 == 0:
            raise AutomorphismError("automorphism matrix must be square of odd size")
        if self.check:
            if abs(np.linalg.det(m)) < 1e-300:
                raise AutomorphismError("automorphism matrix is singular")
            res = _bracket_preservation_residual(m)
            if res > BRACKET_TOL * max(1.0, float(np.max(np.abs(m))) ** 2):
                raise AutomorphismError(
                    f"bracket preservation violated, residual {res:.3e}"
                )

    @property
    def n(self) -> int:
        return (self.matrix.shape[0] - 1) // 2

    @classmethod
    def identity(cls, n: int) -> "HeisAutomorphism":
        return cls(np.eye(2 * n + 1), check=False)

    def apply_algebra(self, X: HeisAlgebraElement) -> HeisAlgebraElement:
        return HeisAlgebraElement.from_vector(self.matrix @ X.as_vector())

    def apply_group(self, h: HeisElement) -> HeisElement:
        return heis_exp(self.apply_algebra(heis_log(h)))

    def compose(self, other: "HeisAutomorphism") -> "HeisAutomorphism":
        return HeisAutomorphism(self.matrix @ other.matrix, check=False)

    def inverse(self) -> "HeisAutomorphism":
        return HeisAutomorphism(np.linalg.inv(self.matrix), check=False)


def exp_derivation(D: Derivation, t: float) -> HeisAutomorphism:
    """Automorphism exp(t D); scaling-and-squaring matrix exponential."""
    return HeisAutomorphism(expm(float(t) * D.matrix))


def rho_k(k) -> HeisAutomorphism:
    """Embed an orthogonal matrix as diag(k, k, 1): trivial on the center,
    the standard action on a+ and a-."""
    k = np.asarray(k, dtype=float)
    n = k.shape[0]
    if k.shape != (n, n):
        raise AutomorphismError("k must be square")
    if np.max(np.abs(k.T @ k - np.eye(n))) > 1e-9:
        raise AutomorphismError("k must be orthogonal")
    return HeisAutomorphism(block_diag(k, k, np.eye(1)), check=False)


# ---------------------------------------------------------------------------
# The similarity group (R_H x R_L x K) |x Heis
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ConfGroupElement:
    """Element (a, x) with a = exp(t_H . H) exp(t_L . D) rho(k), x in Heis.

    ``deriv`` is the structure derivation D shared by all elements of one
    group; elements over different derivations cannot be multiplied.
    K-parts must commute with the derivation flow, otherwise the
    componentwise product law would not be associative.
    """

    t_H: float
    t_L: float
    k: np.ndarray
    x: HeisElement
    deriv: Derivation

    def __post_init__(self):
        object.__setattr__(self, "t_H", float(self.t_H))
        object.__setattr__(self, "t_L", float(self.t_L))
        object.__setattr__(self, "k", _ro(self.k))
        n = self.deriv.n
        if self.k.shape != (n, n):
            raise DimensionMismatchError("k must be n x n")
        if self.x.n != n:
            raise DimensionMismatchError("Heis part has wrong rank")
        if np.max(np.abs(self.k.T @ self.k - np.eye(n))) > 1e-9:
            raise AutomorphismError("k must be orthogonal")
        rk = block_diag(self.k, self.k, np.eye(1))
        comm = rk @ self.deriv.matrix - self.deriv.matrix @ rk
        if np.max(np.abs(comm)) > 1e-9 * max(1.0, float(np.max(np.abs(self.deriv.matrix)))):
            raise AutomorphismError(
                "k does not commute with the structure derivation"
            )
        a = expm(self.t_H * Derivation.homothety(n).matrix) @ expm(
            self.t_L * self.deriv.matrix
        ) @ rk
        object.__setattr__(self, "_a", HeisAutomorphism(a, check=False))

    @property
    def n(self) -> int:
        return self.deriv.n

    @property
    def automorphism(self) -> HeisAutomorphism:
        return self._a

    @classmethod
    def identity(cls, deriv: Derivation) -> "ConfGroupElement":
        n = deriv.n
        return cls(0.0, 0.0, np.eye(n), HeisElement.identity(n), deriv)

    @classmethod
    def from_heis(cls, x: HeisElement, deriv: Derivation) -> "ConfGroupElement":
        return cls(0.0, 0.0, np.eye(deriv.n), x, deriv)

    def is_identity(self, tol: float = 1e-12) -> bool:
        return bool(
            abs(self.t_H) <= tol
            and abs(self.t_L) <= tol
            and np.max(np.abs(self.k - np.eye(self.n))) <= tol
            and self.x.is_identity(tol)
        )


def _check_compatible(g1: ConfGroupElement, g2: ConfGroupElement):
    if g1.n != g2.n or not np.allclose(
        g1.deriv.matrix, g2.deriv.matrix, rtol=0.0, atol=1e-12
    ):
        raise IncompatibleGroupError(
            "elements built over different structure derivations"
        )


def group_identity(deriv: Derivation) -> ConfGroupElement:
    return ConfGroupElement.identity(deriv)


def group_mul(g1: ConfGroupElement, g2: ConfGroupElement) -> ConfGroupElement:
    """(a1, x1)(a2, x2) = (a1 a2, x1 . a1(x2))."""
    _check_compatible(g1, g2)
    return ConfGroupElement(
        g1.t_H + g2.t_H,
        g1.t_L + g2.t_L,
        g1.k @ g2.k,
        heis_mul(g1.x, g1.automorphism.apply_group(g2.x)),
        g1.deriv,
    )


def group_inv(g: ConfGroupElement) -> ConfGroupElement:
    """(a, x)^-1 = (a^-1, a^-1(x^-1))."""
    a_inv = g.automorphism.inverse()
    return ConfGroupElement(
        -g.t_H, -g.t_L, g.k.T, a_inv.apply_group(heis_inv(g.x)), g.deriv
    )


def group_pow(g: ConfGroupElement, m: int) -> ConfGroupElement:
    if m < 0:
        return group_pow(group_inv(g), -m)
    out = ConfGroupElement.identity(g.deriv)
    for _ in range(m):
        out = group_mul(out, g)
    return out


def group_conjugate(g: ConfGroupElement, h: ConfGroupElement) -> ConfGroupElement:
    """g h g^-1."""
    return group_mul(group_mul(g, h), group_inv(g))


def _ad_matrix(W: HeisAlgebraElement) -> np.ndarray:
    """Matrix of ad_W; the only nonzero row is the center row."""
    n = W.n
    m = np.zeros((2 * n + 1, 2 * n + 1))
    m[-1, :n] = -W.a_minus
    m[-1, n : 2 * n] = W.a_plus
    return m


def adjoint(g: ConfGroupElement) -> np.ndarray:
    """Adjoint action of (a, x) on the algebra: (I + ad_{log x}) . a."""
    return (np.eye(2 * g.n + 1) + _ad_matrix(heis_log(g.x))) @ g.automorphism.matrix


def conjugate_to_linear(
    g: ConfGroupElement, tol: float = 1e-9
) -> HeisElement:
    """Find x1 with x1 (a, x) x1^-1 = (a, 1).

    Solved on the abelianization by a linear solve, then corrected in the
    center.  Requires the automorphism part to have no eigenvalue equal
    to 1 (within ``tol``); pure isometric elements (t_H = 0) always fail
    this because their center eigenvalue is exactly 1.
    """
    A = g.automorphism.matrix
    ev = np.linalg.eigvals(A)
    if np.min(np.abs(ev - 1.0)) < tol:
        raise EigenvalueOneError(
            "automorphism part has an eigenvalue within tolerance of 1"
        )
    n = g.n
    abar = A[: 2 * n, : 2 * n]
    xbar = np.concatenate([g.x.alpha, g.x.beta])
    ybar = np.linalg.solve(abar - np.eye(2 * n), xbar)
    x1 = HeisElement(ybar[:n], ybar[n:], 0.0)
    # residual of the abelian solve is central by construction
    r = heis_mul(heis_mul(x1, g.x), g.automorphism.apply_group(heis_inv(x1)))
    mu = A[2 * n, 2 * n]
    w = r.z / (mu - 1.0)
    return heis_mul(x1, HeisElement.center(w, n))


@dataclass(frozen=True)
class ContractionReport:
    """Norms of the Heis-parts of g^k h g^-k in log-coordinates."""

    norms: np.ndarray
    verdict: str  # contracting | bounded | diverging

    def __post_init__(self):
        object.__setattr__(self, "norms", _ro(self.norms))


def contraction_test(
    g: ConfGroupElement, h: ConfGroupElement, k_max: int
) -> ContractionReport:
    """Iterate conjugation and record Heis-part norms.

    The Heis part of g^k h g^-k obeys y_{k+1} = p . A(y_k) . D(p^-1) with
    p = g.x, A the automorphism of g and D the conjugated automorphism of
    h, all constant along the iteration; only that recursion is run.
    """
    _check_compatible(g, h)
    A = g.automorphism
    C = h.automorphism
    D = HeisAutomorphism(
        A.matrix @ C.matrix @ np.linalg.inv(A.matrix), check=False
    )
    p = g.x
    dp_inv = D.apply_group(heis_inv(p))
    norms = np.empty(k_max + 1)
    y = h.x
    norms[0] = heis_log(y).norm()
    cap = 1e12
    truncated_at = None
    for k in range(1, k_max + 1):
        y = heis_mul(heis_mul(p, A.apply_group(y)), dp_inv)
        norms[k] = heis_log(y).norm()
        if not np.isfinite(norms[k]) or norms[k] > cap:
            norms[k:] = np.inf
            truncated_at = k
            break
    base = max(norms[0], 1.0)
    tail = norms[-max(1, (k_max + 1) // 4) :]
    if truncated_at is not None:
        verdict = "diverging"
    elif np.max(tail) < 1e-8 * base and norms[0] > 1e-15:
        verdict = "contracting"
    elif np.min(tail) > 1e8 * base:
        verdict = "diverging"
    else:
        verdict = "bounded"
    return ContractionReport(norms, verdict)
