import math

import numpy as np
import pytest

from planewaves.geometry import (
    BrinkmannPoint,
    ConstantProfile,
    ModelSpec,
    NonConstantProfileError,
    ProfileDomainError,
    SampledProfile,
    check_parallel,
    conformal_flatness,
    curvature_at,
    inverse_metric_at,
    metric_at,
)
from planewaves.sampling import brinkmann_samples

import oracles


def sampled_model(fn=lambda u: 1.0 + 0.3 * math.cos(u), lo=-8.0, hi=8.0, m=257):
    us = np.linspace(lo, hi, m)
    vals = np.array([[[fn(u)]] for u in us])
    return ModelSpec(1, SampledProfile(us, vals))


# ---------------------------------------------------------------------------
# metric
# ---------------------------------------------------------------------------


def test_flat_metric_is_minkowski_in_brinkmann_form():
    spec = ModelSpec.flat(2)
    p = BrinkmannPoint(0.7, [1.0, -2.0], 0.3)
    g = metric_at(spec, p).g
    assert g[-1, -1] == 0.0
    assert g[0, -1] == 1.0 and g[-1, 0] == 1.0
    assert np.allclose(g[1:-1, 1:-1], np.eye(2))


def test_cw4_guu_entry():
    spec = ModelSpec.cw4()
    p = BrinkmannPoint(0.0, [1.0, 0.0], 0.0)
    assert abs(metric_at(spec, p).g[-1, -1] - 6.0) < 1e-14


def test_metric_symmetric_lorentzian_100_points():
    spec = ModelSpec.cw4()
    for p in brinkmann_samples(spec, 100, seed=2):
        m = metric_at(spec, p)
        assert np.allclose(m.g, m.g.T)
        assert m.is_lorentzian()


def test_inverse_metric_closed_form():
    spec = ModelSpec.cw4()
    for p in brinkmann_samples(spec, 20, seed=3):
        g = metric_at(spec, p).g
        ginv = inverse_metric_at(spec, p)
        assert np.max(np.abs(g @ ginv - np.eye(4))) < 1e-12
        assert ginv[0, -1] == 1.0
        assert abs(ginv[0, 0] + g[-1, -1]) < 1e-14
        assert np.allclose(np.diag(ginv)[1:-1], 1.0)


def test_profile_domain_errors():
    spec = sampled_model()
    with pytest.raises(ProfileDomainError):
        metric_at(spec, BrinkmannPoint(0.0, [0.0], 9.5))
    with pytest.raises(NonConstantProfileError):
        spec.derivation()


def test_profile_validation():
    with pytest.raises(ValueError, match="not symmetric"):
        ConstantProfile([[1.0, 2.0], [3.0, 4.0]])
    us = np.linspace(0, 1, 8)
    bad = np.array([[[1.0, 2.0], [3.0, 4.0]]] * 8)
    with pytest.raises(ValueError, match="not symmetric"):
        SampledProfile(us, bad)
    with pytest.raises(ValueError, match="antisymmetric"):
        ModelSpec(2, ConstantProfile(np.eye(2)), F=np.eye(2))
    with pytest.raises(ValueError, match="orthogonal"):
        ModelSpec(2, ConstantProfile(2 * np.eye(2)), K_generators=(2 * np.eye(2),))
    with pytest.raises(ValueError, match="preserve"):
        ModelSpec.cahen_wallach([[6.0, 0.0], [0.0, 4.0]], K_generators=([[0.0, -1.0], [1.0, 0.0]],))


# ---------------------------------------------------------------------------
# curvature
# ---------------------------------------------------------------------------


def test_flat_curvature_vanishes():
    spec = ModelSpec.flat(2)
    p = BrinkmannPoint(0.4, [0.8, -0.5], 1.1)
    t = curvature_at(spec, p)
    assert np.max(np.abs(t.riemann)) < 1e-8
    assert np.max(np.abs(t.ricci)) < 1e-8
    assert abs(t.scalar) < 1e-8


def test_cw4_ricci_against_independent_oracle():
    spec = ModelSpec.cw4()
    p = BrinkmannPoint(0.2, [0.9, -0.4], 0.6)
    t = curvature_at(spec, p)
    ric_o, scal_o = oracles.ricci_scalar(spec, p.coords())
    assert np.max(np.abs(t.ricci - ric_o)) < 1e-7
    assert abs(t.scalar) < 1e-7 and abs(scal_o) < 1e-6
    # the only independent nonzero component sits at (u, u)
    masked = t.ricci.copy()
    masked[-1, -1] = 0.0
    assert np.max(np.abs(masked)) < 1e-8
    assert abs(t.ricci[-1, -1] + np.trace(spec.profile.B)) < 1e-8


def test_riemann_against_independent_oracle():
    spec = ModelSpec.cw4()
    p = BrinkmannPoint(-0.3, [0.5, 1.2], 0.1)
    t = curvature_at(spec, p)
    low_o, _ = oracles.riemann_lower(spec, p.coords())
    assert np.max(np.abs(t.riemann - low_o)) < 1e-7


def test_riemann_closed_form_components():
    # R_{i u j u} = -S_{ij} in this sign convention
    spec = ModelSpec.cw4()
    B = spec.profile.B
    p = BrinkmannPoint(0.0, [0.3, -0.7], 0.5)
    r = curvature_at(spec, p).riemann
    for i in range(2):
        for j in range(2):
            assert abs(r[1 + i, 3, 1 + j, 3] + B[i, j]) < 1e-8


def test_riemann_symmetries_20_points():
    spec = ModelSpec.cw4()
    for p in brinkmann_samples(spec, 20, seed=4):
        r = curvature_at(spec, p).riemann
        assert np.max(np.abs(r + np.einsum("bacd->abcd", r))) < 1e-7
        assert np.max(np.abs(r + np.einsum("abdc->abcd", r))) < 1e-7
        assert np.max(np.abs(r - np.einsum("cdab->abcd", r))) < 1e-7
        bianchi = r + np.einsum("acdb->abcd", r) + np.einsum("adbc->abcd", r)
        assert np.max(np.abs(bianchi)) < 1e-7


def test_curvature_u_independence_cahen_wallach():
    spec = ModelSpec.cw4()
    p0 = BrinkmannPoint(0.3, [0.8, -0.2], 0.0)
    p1 = BrinkmannPoint(0.3, [0.8, -0.2], 1.0)
    t0 = curvature_at(spec, p0)
    t1 = curvature_at(spec, p1)
    assert np.max(np.abs(t0.riemann - t1.riemann)) < 1e-7
    assert np.max(np.abs(t0.ricci - t1.ricci)) < 1e-7


def test_second_order_convergence_without_richardson():
    # the u-derivative truncation cancels structurally in the Riemann
    # assembly for this metric family, so the Christoffel field carries
    # the visible h^2 behavior
    spec = sampled_model(lambda u: 1.0 + 0.4 * math.sin(u))
    for p in (BrinkmannPoint(0.3, [0.7], 0.4), BrinkmannPoint(-0.2, [1.1], -1.3)):
        ref = curvature_at(spec, p, fd_step=5e-3, richardson=True).christoffel
        e1 = np.max(np.abs(curvature_at(spec, p, fd_step=0.05, richardson=False).christoffel - ref))
        e2 = np.max(np.abs(curvature_at(spec, p, fd_step=0.025, richardson=False).christoffel - ref))
        assert 3.5 < e1 / e2 < 4.5


def test_fd_step_validation():
    spec = ModelSpec.cw4()
    with pytest.raises(ValueError):
        curvature_at(spec, BrinkmannPoint(0.0, [0.0, 0.0], 0.0), fd_step=0.0)


# ---------------------------------------------------------------------------
# Weyl / Cotton / flatness
# ---------------------------------------------------------------------------


def test_weyl_trace_free():
    spec = ModelSpec.cw4()
    p = BrinkmannPoint(0.1, [1.0, 0.5], -0.2)
    t = curvature_at(spec, p)
    ginv = inverse_metric_at(spec, p)
    for pattern in ("ac,abcd->bd", "ad,abcd->bc", "bc,abcd->ad", "bd,abcd->ac"):
        tr = np.einsum(pattern, ginv, t.weyl)
        assert np.max(np.abs(tr)) < 1e-7, pattern


def test_isotropic_profile_is_conformally_flat():
    spec = ModelSpec.isotropic(2.0, 2)
    rep = conformal_flatness(spec, brinkmann_samples(spec, 32, seed=0), tol=1e-7)
    assert rep.verdict == "conformally_flat"
    assert rep.max_component < 1e-7


def test_cw4_is_not_conformally_flat():
    spec = ModelSpec.cw4()
    rep = conformal_flatness(spec, brinkmann_samples(spec, 32, seed=0), tol=1e-7)
    assert rep.verdict == "not_conformally_flat"
    assert rep.max_component > 1e-2
    assert len(rep.witness_point) == 4


def test_dim3_always_conformally_flat():
    rng = np.random.default_rng(9)
    for _ in range(3):
        b = rng.uniform(-3, 3)
        spec = ModelSpec.dim3(b if abs(b) > 0.1 else 1.0)
        rep = conformal_flatness(spec, brinkmann_samples(spec, 8, seed=1), tol=1e-6)
        assert rep.verdict == "conformally_flat", b


def test_dim3_sampled_profile_conformally_flat():
    spec = sampled_model(lambda u: 1.0 + 0.5 * math.sin(0.7 * u))
    rep = conformal_flatness(spec, brinkmann_samples(spec, 6, seed=5), tol=1e-6)
    assert rep.verdict == "conformally_flat"


def test_flatness_requires_samples():
    with pytest.raises(ValueError):
        conformal_flatness(ModelSpec.cw4(), [], tol=1e-7)


# ---------------------------------------------------------------------------
# parallel fields
# ---------------------------------------------------------------------------


def test_parallel_null_field():
    for spec in (ModelSpec.cw4(), ModelSpec.dim3(1.0), ModelSpec.flat(1), sampled_model()):
        pts = brinkmann_samples(spec, 8, seed=6)
        assert check_parallel(spec, "v", pts) < 1e-7
        g = metric_at(spec, pts[0]).g
        assert g[0, 0] == 0.0  # null: g(d_v, d_v) = 0 exactly


def test_du_not_parallel_on_cw4():
    spec = ModelSpec.cw4()
    pts = brinkmann_samples(spec, 8, seed=6)
    assert check_parallel(spec, "u", pts) >= 1e-2


def test_dxi_parallel_on_flat():
    spec = ModelSpec.flat(2)
    pts = brinkmann_samples(spec, 8, seed=6)
    assert check_parallel(spec, "x1", pts) < 1e-7
    assert check_parallel(spec, "x2", pts) < 1e-7
    with pytest.raises(ValueError):
        check_parallel(spec, "x3", pts)
