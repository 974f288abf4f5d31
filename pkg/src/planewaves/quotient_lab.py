"""Discrete-subgroup machinery: Malcev closures, properness criteria for
cyclic-by-abelian groups, lattice-preservation certificates, membership
tests, and the bundled example constructions.

The groups handled here have the shape <gamma_hat> |x Gamma_0 with
Gamma_0 an abelian subgroup of the Heisenberg group and gamma_hat a
similarity normalizing it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .chart_action import realize_conf_element
from .geometry import BrinkmannPoint, ModelSpec
from .lie_core import (
    ConfGroupElement,
    Derivation,
    HeisAlgebraElement,
    HeisElement,
    bracket,
    group_conjugate,
    group_inv,
    group_mul,
    group_pow,
    heis_exp,
    heis_log,
    heis_mul,
    heis_inv,
    spectral_type,
)

__all__ = [
    "GammaSpec",
    "PropernessReport",
    "LatticeReport",
    "BuiltExample",
    "malcev_closure",
    "properness_check",
    "lattice_preservation",
    "build_example",
    "membership",
    "orbit_separation",
]

#: transversality threshold of the properness criterion
PROPERNESS_THRESHOLD = 1e-8


def _basis_matrix(basis) -> np.ndarray:
    """Rows are algebra coordinate vectors."""
    if isinstance(basis, np.ndarray):
        return np.array(basis, dtype=float)
    rows = []
    for b in basis:
        if isinstance(b, HeisAlgebraElement):
            rows.append(b.as_vector())
        elif isinstance(b, HeisElement):
            rows.append(heis_log(b).as_vector())
        else:
            rows.append(np.asarray(b, dtype=float))
    return np.array(rows, dtype=float)


def _orthonormal_rows(rows: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    if rows.size == 0:
        return rows.reshape(0, rows.shape[-1] if rows.ndim == 2 else 0)
    u, s, vt = np.linalg.svd(rows, full_matrices=False)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[:rank]


def malcev_closure(generators: Sequence[HeisElement], tol: float = 1e-12) -> np.ndarray:
    """Smallest bracket-closed subspace containing the generators' logs.

    Returns an orthonormal basis, one row per basis vector.  Two-step
    nilpotency makes the loop terminate after one bracket round, but the
    closure is iterated until the rank stabilizes anyway.
    """
    rows = _basis_matrix([heis_log(g) for g in generators])
    basis = _orthonormal_rows(rows, tol)
    while True:
        extra = []
        for i in range(len(basis)):
            for j in range(i + 1, len(basis)):
                extra.append(
                    bracket(
                        HeisAlgebraElement.from_vector(basis[i]),
                        HeisAlgebraElement.from_vector(basis[j]),
                    ).as_vector()
                )
        if not extra:
            return basis
        grown = _orthonormal_rows(np.vstack([basis, np.array(extra)]), tol)
        if len(grown) == len(basis):
            return basis
        basis = grown


# ---------------------------------------------------------------------------
# Properness criterion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropernessReport:
    cond_pL: bool
    cond_intersection_at_0: bool
    cond_dim: bool
    min_transversality: Optional[float]
    grid: tuple
    verdict: str  # pass | fail(<reason>) | inconclusive
    asymptotic_coefficient: Optional[float] = None
    witness: Optional[tuple] = None
    threshold: float = PROPERNESS_THRESHOLD

    def to_json_dict(self) -> dict:
        return {
            "cond_pL": self.cond_pL,
            "cond_intersection_at_0": self.cond_intersection_at_0,
            "cond_dim": self.cond_dim,
            "min_transversality": self.min_transversality,
            "grid": list(self.grid),
            "verdict": self.verdict,
            "asymptotic_coefficient": self.asymptotic_coefficient,
            "witness": list(self.witness) if self.witness is not None else None,
            "threshold": self.threshold,
        }


def _aplus_cols(n: int) -> np.ndarray:
    cols = np.zeros((2 * n + 1, n))
    cols[:n, :n] = np.eye(n)
    return cols


def _signed_subspace_dets(moved: np.ndarray, ap_cols: np.ndarray) -> np.ndarray:
    """det [Q(t) | a+] with Q(t) an orthonormal frame of the moved
    subspace, sign-fixed via diag(R) >= 0.  Orthonormalizing makes the
    magnitude basis-independent (transversality of the subspace, not
    conditioning of the carried basis); the consistent sign exposes
    transversal crossings as sign changes."""
    norms = np.linalg.norm(moved, axis=-2)
    safe = np.where(norms > 0, norms, 1.0)
    q, r = np.linalg.qr(moved / safe[..., None, :])
    diag = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    diag = np.where(diag == 0, 1.0, diag)
    q = q * diag[..., None, :]
    tiled = np.broadcast_to(ap_cols, q.shape[:-2] + ap_cols.shape)
    stacked = np.concatenate([q, tiled], axis=-1)
    d = np.linalg.det(stacked)
    d[np.any(norms == 0, axis=-1)] = 0.0
    return d


def _eig_data(Lm, n0_cols, mask_tol=1e-12):
    """Eigen decomposition plus masked coefficients of the columns.

    Coefficients below ``mask_tol`` (relative, per column) are treated as
    exact zeros: rounding noise of size eps on an expanding
    eigendirection would otherwise grow like e^{t . gap} and swamp d(t)
    at large |t| even though the intended subspace never meets a+.
    """
    evals, V = np.linalg.eig(Lm)
    if np.linalg.cond(V) > 1e8:
        raise np.linalg.LinAlgError("eigenbasis too ill-conditioned")
    recon = (V @ np.diag(evals) @ np.linalg.inv(V)).real
    if np.max(np.abs(recon - Lm)) > 1e-9 * max(1.0, float(np.max(np.abs(Lm)))):
        raise np.linalg.LinAlgError("eigen decomposition does not reproduce L")
    W = np.linalg.solve(V, n0_cols.astype(complex))
    scale = np.maximum(np.max(np.abs(W), axis=0, keepdims=True), 1e-300)
    W = np.where(np.abs(W) > mask_tol * scale, W, 0.0)
    return evals, V, W


def _rate_levels(key: np.ndarray, tol: float = 1e-9):
    order = np.argsort(-key)
    levels = [[order[0]]]
    for idx in order[1:]:
        if key[levels[-1][0]] - key[idx] <= tol:
            levels[-1].append(idx)
        else:
            levels.append([idx])
    return [np.array(l) for l in levels]


def _echelon_basis(evals, W, direction, tol=1e-9):
    """Reorganize the coefficient columns so each has a distinct dominant
    growth block for the given time direction.

    Gaussian elimination along the filtration by direction . Re(lambda):
    within each rate level an SVD picks combinations whose level blocks
    are independent; those components are then removed (and zeroed) from
    the rest.  Per-column normalization by the dominant rate keeps the
    evaluated frame well-conditioned for every t of the right sign, which
    a raw QR of e^{tL} columns cannot do once rate gaps exceed the float
    range.
    """
    remaining = W.copy()
    cols, rates = [], []
    for idx in _rate_levels(direction * evals.real, tol):
        if remaining.shape[1] == 0:
            break
        block = remaining[idx, :]
        bscale = float(np.max(np.abs(block))) if block.size else 0.0
        if bscale < 1e-13 * max(1.0, float(np.max(np.abs(remaining)))):
            continue
        u2, s2, vt2 = np.linalg.svd(block)
        rho = int(np.sum(s2 > 1e-10 * s2[0]))
        if rho == 0:
            continue
        picked = remaining @ vt2[:rho].conj().T
        for j in range(rho):
            cols.append(picked[:, j])
            rates.append(float(evals.real[idx[0]]))
        remaining = remaining @ vt2[rho:].conj().T
        remaining[idx, :] = 0.0
    if len(cols) != W.shape[1]:
        raise np.linalg.LinAlgError("rate-echelon reduction failed")
    return np.column_stack(cols), np.array(rates)


def _echelon_moved(V, evals, Wp, rates, ts):
    """Columns of e^{tL} (echelon basis), rescaled per column by e^{-t r}.

    Active coefficients satisfy direction . (Re(lambda) - r) <= 0, so the
    entries stay bounded; exponents of masked (zero) coefficients are
    clipped to avoid inf * 0.
    """
    log_growth = np.multiply.outer(ts, evals.real)[:, :, None] - np.multiply.outer(
        ts, rates
    )[:, None, :]
    phase = np.multiply.outer(ts, evals.imag)[:, :, None]
    E = np.exp(np.clip(log_growth, -745.0, 50.0)) * np.exp(1j * phase)
    return np.einsum("ij,tjk->tik", V, Wp[None, :, :] * E).real


def _transversality_curve(Lm, n0_cols, ap_cols, ts):
    """Signed d(t) along the grid; falls back to plain expm columns when
    no reliable eigenbasis exists."""
    ts = np.asarray(ts, dtype=float)
    try:
        evals, V, W = _eig_data(Lm, n0_cols)
        pos_basis = _echelon_basis(evals, W, +1.0)
        neg_basis = _echelon_basis(evals, W, -1.0)
    except np.linalg.LinAlgError:
        moved = np.stack([expm(t * Lm) @ n0_cols for t in ts])
        return _signed_subspace_dets(moved, ap_cols)
    out = np.empty(len(ts))
    pos = ts >= 0
    if np.any(pos):
        out[pos] = _signed_subspace_dets(
            _echelon_moved(V, evals, *pos_basis, ts[pos]), ap_cols
        )
    if np.any(~pos):
        vals = _signed_subspace_dets(
            _echelon_moved(V, evals, *neg_basis, ts[~pos]), ap_cols
        )
        # the two echelon frames may carry opposite orientations; stitch at 0
        zero = np.zeros(1)
        d0p = _signed_subspace_dets(_echelon_moved(V, evals, *pos_basis, zero), ap_cols)[0]
        d0n = _signed_subspace_dets(_echelon_moved(V, evals, *neg_basis, zero), ap_cols)[0]
        if d0p * d0n < 0:
            vals = -vals
        out[~pos] = vals
    return out


def _asymptotic_floor(Lm, n0_cols, ap_cols, t_scale):
    """Minimum |d(t)| sampled far beyond the grid in both directions.

    The echelon evaluation converges to the Grassmannian limit of the
    subspace, so this estimates the dominant coefficient of the
    exponential polynomial d(t); None when no reliable eigenbasis exists.
    """
    far = np.linspace(2.0 * t_scale, 4.0 * t_scale, 64)
    try:
        evals, V, W = _eig_data(Lm, n0_cols)
        hi = _signed_subspace_dets(
            _echelon_moved(V, evals, *_echelon_basis(evals, W, +1.0), far), ap_cols
        )
        lo = _signed_subspace_dets(
            _echelon_moved(V, evals, *_echelon_basis(evals, W, -1.0), -far), ap_cols
        )
    except np.linalg.LinAlgError:
        return None
    return float(min(np.min(np.abs(lo)), np.min(np.abs(hi))))


def properness_check(
    spec: ModelSpec,
    n0_basis,
    gamma_hat: ConfGroupElement,
    grid: tuple = (-20.0, 20.0, 4001),
    threshold: float = PROPERNESS_THRESHOLD,
) -> PropernessReport:
    """The proper-cocompact-action criteria for <gamma_hat> |x Gamma_0.

    Checks (i) nontrivial translation-flow projection of gamma_hat,
    (ii) trivial intersection of n0 with a+ at t = 0 (exact rank of the
    stacked system), (iii) dim n0 = n + 1, and (iv) transversality of
    e^{tD} n0 against a+ along the grid.  Sampling cannot certify all t,
    so a pass additionally requires the asymptotic coefficient to clear
    the threshold; small positive minima yield ``inconclusive``.
    """
    n = spec.n
    L = spec.derivation()
    B = _basis_matrix(n0_basis)
    if B.size == 0:
        raise ValueError("n0 basis must be nonempty")
    if np.linalg.matrix_rank(B, tol=1e-10) < B.shape[0]:
        raise ValueError("n0 basis is rank-deficient")
    k = B.shape[0]
    cond_pL = abs(gamma_hat.t_L) > 1e-12

    ap_rows = np.zeros((n, 2 * n + 1))
    ap_rows[:, :n] = np.eye(n)
    stacked_rank = np.linalg.matrix_rank(np.vstack([B, ap_rows]), tol=1e-10)
    inter_dim = k + n - stacked_rank
    cond_int = inter_dim == 0
    witness = None
    if not cond_int:
        # a combination of the basis with vanishing a- and z components
        tail = B[:, n:]
        u, s, _ = np.linalg.svd(tail, full_matrices=True)
        rank = int(np.sum(s > 1e-10))
        if rank < u.shape[1]:
            witness = tuple((u[:, rank] @ B).tolist())

    cond_dim = k == n + 1

    min_d = None
    asym = None
    t_at_min = None
    t_at_flip = None
    if cond_dim:
        t0, t1, count = grid
        ts = np.linspace(float(t0), float(t1), int(count))
        d = _transversality_curve(L.matrix, B.T, _aplus_cols(n), ts)
        imin = int(np.argmin(np.abs(d)))
        min_d = float(abs(d[imin]))
        t_at_min = float(ts[imin])
        flips = np.nonzero(d[:-1] * d[1:] < 0)[0]
        if len(flips):
            t_at_flip = float(0.5 * (ts[flips[0]] + ts[flips[0] + 1]))
        asym = _asymptotic_floor(
            L.matrix, B.T, _aplus_cols(n), max(abs(float(t0)), abs(float(t1)))
        )

    if not cond_pL:
        verdict = "fail(translation projection of gamma_hat is trivial)"
    elif not cond_int:
        verdict = "fail(n0 meets a+ at t = 0)"
    elif not cond_dim:
        verdict = f"fail(dim n0 = {k}, expected n + 1 = {n + 1})"
    elif min_d is not None and min_d <= threshold:
        verdict = f"fail(transversality lost near t = {t_at_min})"
        witness = (t_at_min,)
    elif t_at_flip is not None:
        verdict = f"fail(transversality sign change near t = {t_at_flip})"
        witness = (t_at_flip,)
    elif min_d is not None and (
        min_d < 10 * threshold or asym is None or asym <= threshold
    ):
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return PropernessReport(
        cond_pL=cond_pL,
        cond_intersection_at_0=cond_int,
        cond_dim=cond_dim,
        min_transversality=min_d,
        grid=tuple(grid),
        verdict=verdict,
        asymptotic_coefficient=asym,
        witness=witness,
        threshold=threshold,
    )


# ---------------------------------------------------------------------------
# Lattice preservation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LatticeReport:
    status: str  # preserved | not_preserved | inconclusive
    basis: Optional[np.ndarray]
    char_poly: tuple
    reason: Optional[str] = None
    max_coeff_defect: float = 0.0
    verify_residual: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "status": self.status,
            "basis": self.basis.tolist() if self.basis is not None else None,
            "char_poly": list(self.char_poly),
            "reason": self.reason,
            "max_coeff_defect": self.max_coeff_defect,
            "verify_residual": self.verify_residual,
        }


def lattice_preservation(A, tol: float = 1e-6) -> LatticeReport:
    """Certify or refute that A preserves a full lattice.

    The characteristic polynomial must be integral and A unimodular; the
    invariant lattice is then constructed from a cyclic vector v as the
    Z-span of v, Av, ..., A^{m-1}v, in which A acts by the (integer)
    companion matrix.  Non-cyclic integral cases return ``inconclusive``
    since the rational canonical form over Q is not implemented here.
    """
    A = np.asarray(A, dtype=float)
    m = A.shape[0]
    det = float(np.linalg.det(A))
    if abs(det) < 1e-12:
        raise ValueError("A must be invertible")
    coeffs = np.poly(A)
    defects = np.abs(coeffs - np.round(coeffs))
    worst = int(np.argmax(defects))
    max_defect = float(defects[worst])
    cp = tuple(float(c) for c in coeffs)
    if max_defect > 1e-3:
        return LatticeReport(
            "not_preserved",
            None,
            cp,
            reason=(
                f"characteristic polynomial coefficient {coeffs[worst]:.12g} "
                f"(degree {m - worst}) is not an integer"
            ),
            max_coeff_defect=max_defect,
        )
    if max_defect > tol:
        return LatticeReport(
            "inconclusive",
            None,
            cp,
            reason=(
                f"coefficient defect {max_defect:.3e} between {tol:.0e} and 1e-3; "
                "re-run in higher precision"
            ),
            max_coeff_defect=max_defect,
        )
    if abs(abs(det) - 1.0) > tol:
        return LatticeReport(
            "not_preserved",
            None,
            cp,
            reason=f"not unimodular: |det| = {abs(det):.12g}",
            max_coeff_defect=max_defect,
        )
    entry_defect = float(np.max(np.abs(A - np.round(A))))
    if entry_defect <= tol:
        return LatticeReport(
            "preserved", np.eye(m), cp,
            max_coeff_defect=max_defect, verify_residual=entry_defect,
        )
    # cyclic-vector companion construction
    rng = np.random.default_rng(0xC0FFEE)
    candidates = [np.eye(m)[i] for i in range(m)]
    candidates += [rng.standard_normal(m) for _ in range(8)]
    best = None
    best_score = 0.0
    for v in candidates:
        v = v / np.linalg.norm(v)
        K = np.empty((m, m))
        K[:, 0] = v
        for j in range(1, m):
            K[:, j] = A @ K[:, j - 1]
        s = np.linalg.svd(K, compute_uv=False)
        score = float(s[-1] / s[0])
        if score > best_score:
            best_score = score
            best = K
    if best is None or best_score < 1e-10:
        return LatticeReport(
            "inconclusive",
            None,
            cp,
            reason=(
                "no well-conditioned cyclic vector: A may be non-cyclic "
                "(rational canonical form over Q not implemented)"
            ),
            max_coeff_defect=max_defect,
        )
    C = np.linalg.solve(best, A @ best)
    resid = float(np.max(np.abs(C - np.round(C))))
    if resid <= 1e-8:
        return LatticeReport(
            "preserved", best, cp,
            max_coeff_defect=max_defect, verify_residual=resid,
        )
    return LatticeReport(
        "inconclusive",
        None,
        cp,
        reason=f"companion coordinates off integers by {resid:.3e}",
        max_coeff_defect=max_defect,
        verify_residual=resid,
    )


# ---------------------------------------------------------------------------
# Gamma specifications
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GammaSpec:
    """Generators of Gamma = <gamma_hat> |x Gamma_0 over a model.

    Gamma_0 must be abelian and normalized by gamma_hat: each conjugate
    of a generator must have integer coordinates in the log-lattice of
    the generators.
    """

    gamma_hat: ConfGroupElement
    gamma0_basis: tuple
    spec: ModelSpec
    tol: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "gamma0_basis", tuple(self.gamma0_basis))
        if self.spec.profile.is_constant:
            own = self.spec.derivation().matrix
            if not np.allclose(own, self.gamma_hat.deriv.matrix, atol=1e-9):
                raise ValueError("gamma_hat derivation does not match the model")
        for a, b in itertools.combinations(self.gamma0_basis, 2):
            comm = heis_mul(heis_mul(a, b), heis_inv(heis_mul(b, a)))
            if not comm.is_identity(1e-10):
                raise ValueError("Gamma_0 generators do not commute")
        logs = (
            np.column_stack([heis_log(g).as_vector() for g in self.gamma0_basis])
            if self.gamma0_basis
            else np.zeros((2 * self.spec.n + 1, 0))
        )
        object.__setattr__(self, "lattice_logs", logs)
        conj_cols = []
        for g in self.gamma0_basis:
            conj = group_conjugate(
                self.gamma_hat, ConfGroupElement.from_heis(g, self.gamma_hat.deriv)
            )
            if (
                abs(conj.t_H) > self.tol
                or abs(conj.t_L) > self.tol
                or np.max(np.abs(conj.k - np.eye(self.spec.n))) > self.tol
            ):
                raise ValueError("conjugation left the Heisenberg factor")
            vec = heis_log(conj.x).as_vector()
            coords, res = _lattice_coords(logs, vec)
            if res > self.tol * max(1.0, float(np.linalg.norm(vec))):
                raise ValueError("gamma_hat does not normalize Gamma_0")
            if np.max(np.abs(coords - np.round(coords))) > self.tol:
                raise ValueError(
                    "conjugate of a generator is not an integer lattice point"
                )
            conj_cols.append(np.round(coords).astype(int))
        object.__setattr__(
            self,
            "conjugation_matrix",
            np.column_stack(conj_cols) if conj_cols else np.zeros((0, 0), dtype=int),
        )

    @property
    def rank(self) -> int:
        return len(self.gamma0_basis)

    def central_intersection_probe(self, coeff_bound: int = 30) -> bool:
        """True when no small integer combination of the lattice lands in
        the center.  A bounded probe, not a proof."""
        k = self.rank
        if k == 0:
            return True
        a_parts = self.lattice_logs[: 2 * self.spec.n, :]
        rng = range(-coeff_bound, coeff_bound + 1)
        for combo in itertools.product(rng, repeat=k):
            if not any(combo):
                continue
            m = np.array(combo, dtype=float)
            if np.max(np.abs(a_parts @ m)) < 1e-9:
                if np.max(np.abs(self.lattice_logs @ m)) > 1e-9:
                    return False
        return True

    def to_json_dict(self) -> dict:
        return {
            "gamma_hat": {
                "t_H": self.gamma_hat.t_H,
                "t_L": self.gamma_hat.t_L,
                "k": self.gamma_hat.k.tolist(),
                "x": {
                    "alpha": self.gamma_hat.x.alpha.tolist(),
                    "beta": self.gamma_hat.x.beta.tolist(),
                    "z": self.gamma_hat.x.z,
                },
            },
            "gamma0": [
                {"alpha": g.alpha.tolist(), "beta": g.beta.tolist(), "z": g.z}
                for g in self.gamma0_basis
            ],
        }


def _lattice_coords(logs: np.ndarray, vec: np.ndarray):
    if logs.shape[1] == 0:
        return np.zeros(0), float(np.linalg.norm(vec))
    coords, *_ = np.linalg.lstsq(logs, vec, rcond=None)
    res = float(np.linalg.norm(logs @ coords - vec))
    return coords, res


def membership(g: ConfGroupElement, gamma: GammaSpec, tol: float = 1e-6) -> bool:
    """Decide g in <gamma_hat> |x Gamma_0.

    The cyclic exponent comes from the ratio of similarity projections;
    the remainder must be a Heisenberg element with integer coordinates
    in the lattice basis.
    """
    gh = gamma.gamma_hat
    if abs(gh.t_H) > 1e-12:
        kf = g.t_H / gh.t_H
    elif abs(gh.t_L) > 1e-12:
        kf = g.t_L / gh.t_L
    else:
        kf = 0.0
    if abs(kf - round(kf)) > tol:
        return False
    power = int(round(kf))
    h = group_mul(group_pow(gh, -power), g)
    if abs(h.t_H) > tol or abs(h.t_L) > tol:
        return False
    if np.max(np.abs(h.k - np.eye(gamma.spec.n))) > tol:
        return False
    vec = heis_log(h.x).as_vector()
    coords, res = _lattice_coords(gamma.lattice_logs, vec)
    if res > tol * max(1.0, float(np.linalg.norm(vec))):
        return False
    return bool(len(coords) == 0 or np.max(np.abs(coords - np.round(coords))) <= tol)


def orbit_separation(
    gamma: GammaSpec,
    p: BrinkmannPoint,
    word_length: int,
    max_words: int = 500_000,
) -> float:
    """Minimum chart displacement of p over nontrivial reduced words.

    An empirical properness probe, not a proof: words in the symmetric
    generating set are enumerated up to the given length, duplicates are
    collapsed, and each distinct element is realized through the chart.
    """
    deriv = gamma.gamma_hat.deriv
    gens: list[ConfGroupElement] = []
    if not gamma.gamma_hat.is_identity(1e-12):
        gens.append(gamma.gamma_hat)
    gens.extend(ConfGroupElement.from_heis(x, deriv) for x in gamma.gamma0_basis)
    if not gens:
        return math.inf
    sym = []
    for i, g in enumerate(gens):
        sym.append((i + 1, g))
        sym.append((-(i + 1), group_inv(g)))
    s = len(sym)
    total = sum(s * (s - 1) ** (l - 1) for l in range(1, word_length + 1))
    if total > max_words:
        raise ValueError(f"word budget exceeded: {total} > {max_words}")

    seen = set()
    elements = []

    def key(e: ConfGroupElement):
        parts = np.concatenate(
            [[e.t_H, e.t_L], e.k.ravel(), heis_log(e.x).as_vector()]
        )
        return tuple(np.round(parts / 1e-9).astype(np.int64).tolist())

    def walk(elem, last_label, depth):
        if depth == word_length:
            return
        for label, g in sym:
            if label == -last_label:
                continue
            nxt = group_mul(elem, g)
            k = key(nxt)
            if k not in seen:
                seen.add(k)
                if not nxt.is_identity(1e-12):
                    elements.append(nxt)
            walk(nxt, label, depth + 1)

    walk(ConfGroupElement.identity(deriv), 0, 0)
    if not elements:
        return math.inf
    best = math.inf
    c0 = p.coords()
    for e in elements:
        phi = realize_conf_element(gamma.spec, e)
        best = min(best, float(np.linalg.norm(phi.forward(p).coords() - c0)))
    return best


# ---------------------------------------------------------------------------
# Bundled examples
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BuiltExample:
    model: ModelSpec
    gamma: Optional[GammaSpec]
    diagnostics: dict


def _eigdir(Lm: np.ndarray, target: float) -> np.ndarray:
    """Real unit eigenvector for the eigenvalue nearest to target."""
    evals, vecs = np.linalg.eig(Lm)
    j = int(np.argmin(np.abs(evals - target)))
    if abs(evals[j] - target) > 1e-8:
        raise ValueError(f"no eigenvalue near {target}")
    v = np.real(vecs[:, j])
    v = v / np.linalg.norm(v)
    lead = np.argmax(np.abs(v))
    return v if v[lead] > 0 else -v


def _integer_trace_scale(trace: int) -> float:
    """t with e^{2t} + e^{-2t} = trace, the adjusted generator scale."""
    if trace < 3:
        raise ValueError("integer trace must be >= 3 for a hyperbolic pair")
    lam = (trace + math.sqrt(trace * trace - 4)) / 2.0
    return 0.5 * math.log(lam)


def build_example(
    name: str,
    variant: str = "default",
    b: float = 1.0,
    trace: int = 3,
) -> BuiltExample:
    """Construct a bundled model and, when certified, its quotient data.

    ``cw4`` builds the non-conformally-flat dimension-4 model and reports
    the derivation spectrum.  ``example1`` (dimension 4) and ``example2``
    (dimension 3, needs b > 0) build the generator exp(t_H . H + t_L . D),
    restrict it to the invariant ideal spanned by the center and the
    contracting eigendirections, and run lattice preservation on the
    restriction.  The ``default`` variant uses the unit-scale generator,
    whose restricted hyperbolic pair (e^2, e^-2) has non-integer trace;
    the ``adjusted`` variant rescales so the pair has the given integer
    trace, which certifies an invariant lattice.
    """
    if name == "cw4":
        model = ModelSpec.cw4()
        L = model.derivation()
        return BuiltExample(
            model,
            None,
            {
                "name": name,
                "L_eigenvalues": _ev_list(L),
                "spectral_type": spectral_type(L),
            },
        )
    if name not in ("example1", "example2"):
        raise ValueError(f"unknown example {name!r}")
    if variant not in ("default", "adjusted"):
        raise ValueError(f"unknown variant {variant!r}")

    if name == "example1":
        model = ModelSpec.cw4()
        L = model.derivation()
        Lm = L.matrix
        nvec = np.zeros(5)
        nvec[-1] = 1.0
        ideal_cols = np.column_stack([nvec, _eigdir(Lm, -1.0), _eigdir(Lm, -3.0)])
        if variant == "default":
            t_H = t_L = 1.0
        else:
            t_H = t_L = _integer_trace_scale(trace)
        notes = {}
    else:
        if b <= 0:
            raise ValueError("example2 needs a hyperbolic profile: b > 0")
        model = ModelSpec.dim3(b)
        L = model.derivation()
        Lm = L.matrix
        rate = math.sqrt(b)
        nvec = np.zeros(3)
        nvec[-1] = 1.0
        ideal_cols = np.column_stack([nvec, _eigdir(Lm, -rate)])
        if variant == "default":
            t_H = 1.0
            t_L = 3.0 / rate
        else:
            t_H = _integer_trace_scale(trace)
            t_L = 3.0 * t_H / rate
        notes = {
            "eigenvector_convention": (
                "computed eigenvectors for +/-sqrt(b) are proportional to "
                "sqrt(b).e+ -(+/-)- e-; the convention e+ +/- b.e- matches "
                "only at b = 1 (the eigensolver is the source of truth)"
            )
        }

    n = model.n
    gamma_hat = ConfGroupElement(
        t_H, t_L, np.eye(n), HeisElement.identity(n), L
    )
    abar = gamma_hat.automorphism.matrix
    moved = abar @ ideal_cols
    R, *_ = np.linalg.lstsq(ideal_cols, moved, rcond=None)
    invariance = float(np.max(np.abs(ideal_cols @ R - moved)))
    if invariance > 1e-9:
        raise AssertionError("ideal is not invariant under the generator")
    lattice = lattice_preservation(R)

    diagnostics = {
        "name": name,
        "variant": variant,
        "L_eigenvalues": _ev_list(L),
        "spectral_type": spectral_type(L),
        "t_H": t_H,
        "t_L": t_L,
        "ideal_basis": ideal_cols.T.tolist(),
        "restriction": R.tolist(),
        "restriction_eigenvalues": sorted(
            float(x) for x in np.linalg.eigvals(R).real
        ),
        "lattice": lattice.to_json_dict(),
        **notes,
    }
    if variant == "default":
        t_adj = _integer_trace_scale(trace)
        diagnostics["adjusted_suggestion"] = {
            "t_H": t_adj,
            "t_L": t_adj if name == "example1" else 3.0 * t_adj / math.sqrt(b),
            "trace": trace,
            "note": (
                "restricted pair (e^2, e^-2) has trace e^2 + e^-2 which is "
                "not an integer; rescale the generator so the pair trace is "
                f"{trace}"
            ),
        }

    gamma = None
    if lattice.status == "preserved":
        U = ideal_cols @ lattice.basis
        gens = tuple(
            heis_exp(HeisAlgebraElement.from_vector(U[:, j]))
            for j in range(U.shape[1])
        )
        gamma = GammaSpec(gamma_hat, gens, model)
        if not gamma.central_intersection_probe():
            raise AssertionError("lattice probe found a central intersection")
        diagnostics["lattice_generators"] = [
            {"alpha": g.alpha.tolist(), "beta": g.beta.tolist(), "z": g.z}
            for g in gens
        ]
    return BuiltExample(model, gamma, diagnostics)


def _ev_list(L: Derivation) -> list:
    return [[float(ev.real), float(ev.imag)] for ev in L.eigenvalues()]
