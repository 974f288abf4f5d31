import math

import numpy as np
import pytest

from planewaves.chart_action import (
    compose,
    identity_map,
    realize_conf_element,
    realize_conf_flow,
    realize_flip,
    realize_heis,
    realize_K,
    realize_translation_flow,
)
from planewaves.conformal_gauge import (
    GaugeMeasurementError,
    GaugeSpec,
    build_gauge,
    measure_gauge_data,
    rescaled_metric_at,
    verify_gauge,
)
from planewaves.geometry import BrinkmannPoint, ModelSpec, metric_at
from planewaves.lie_core import HeisElement
from planewaves.quotient_lab import build_example
from planewaves.sampling import brinkmann_samples


# ---------------------------------------------------------------------------
# build_gauge
# ---------------------------------------------------------------------------


def test_linear_gauge_trivial_when_alpha_zero():
    f = build_gauge(GaugeSpec(1.0, 0.0))
    for u in np.linspace(-5, 5, 11):
        assert f(u) == 0.0


def test_linear_gauge_exact_cocycle():
    f = build_gauge(GaugeSpec(1.0, 2.0))
    for u in np.linspace(-3, 3, 13):
        assert f(u) == -2.0 * u
        assert f(u + 1.0) == f(u) - 2.0


def test_gauge_spec_validation():
    with pytest.raises(ValueError):
        GaugeSpec(0.0, 1.0)
    with pytest.raises(ValueError):
        GaugeSpec(1.0, 2.0, variant="bump", epsilon=1.5)
    with pytest.raises(ValueError):
        GaugeSpec(1.0, 2.0, variant="bump")  # epsilon missing
    with pytest.raises(ValueError):
        GaugeSpec(1.0, 2.0, variant="smooth")


def test_bump_gauge_cocycle_sampled():
    f = build_gauge(GaugeSpec(1.0, 2.0, variant="bump", epsilon=0.25))
    rng = np.random.default_rng(1)
    us = rng.uniform(-50, 50, 10_000)
    worst = max(abs(f(u + 1.0) - f(u) + 2.0) for u in us)
    assert worst < 1e-10


def test_bump_gauge_seed_function_respected():
    phi0 = lambda u: 0.1 * math.sin(3.0 * u)
    f = build_gauge(GaugeSpec(1.0, 2.0, variant="bump", phi0=phi0, epsilon=0.25))
    for u in (0.0, 0.1, 0.2):
        assert abs(f(u) - phi0(u)) < 1e-12  # untouched on [0, epsilon)
    rng = np.random.default_rng(2)
    worst = max(abs(f(u + 1.0) - f(u) + 2.0) for u in rng.uniform(-20, 20, 2000))
    assert worst < 1e-10


def test_bump_gauge_derivatives_continuous_across_period():
    # one-sided limits at the joint agree: the mollifier ramp is flat to
    # all orders at the period ends, so both sides must give ~0
    f = build_gauge(GaugeSpec(1.0, 2.0, variant="bump", epsilon=0.25))
    delta = 0.005
    for order in range(1, 6):
        left = f.derivative(1.0 - delta, order)
        right = f.derivative(1.0 + delta, order)
        assert abs(left - right) < 1e-5, (order, left, right)


def test_gauge_freedom_is_periodic():
    lin = build_gauge(GaugeSpec(1.0, 2.0))
    bump = build_gauge(GaugeSpec(1.0, 2.0, variant="bump", epsilon=0.25))
    rng = np.random.default_rng(3)
    for u in rng.uniform(-10, 10, 200):
        d1 = bump(u) - lin(u)
        d2 = bump(u + 1.0) - lin(u + 1.0)
        assert abs(d1 - d2) < 1e-10


# ---------------------------------------------------------------------------
# rescaled metric
# ---------------------------------------------------------------------------


def test_rescaling_trivial_gauge():
    spec = ModelSpec.cw4()
    f = build_gauge(GaugeSpec(1.0, 0.0))
    p = BrinkmannPoint(0.3, [0.5, -0.2], 0.9)
    assert np.allclose(rescaled_metric_at(spec, f, p).g, metric_at(spec, p).g)


def test_rescaling_fixes_zero_leaf():
    spec = ModelSpec.cw4()
    f = build_gauge(GaugeSpec(1.0, 2.0))
    p = BrinkmannPoint(0.4, [1.0, 0.0], 0.0)
    assert np.allclose(rescaled_metric_at(spec, f, p).g, metric_at(spec, p).g)


def test_rescaling_keeps_lorentzian_signature():
    spec = ModelSpec.cw4()
    f = build_gauge(GaugeSpec(1.0, 2.0))
    for p in brinkmann_samples(spec, 100, seed=4):
        assert rescaled_metric_at(spec, f, p).is_lorentzian()


def test_double_rescaling_restores_metric():
    spec = ModelSpec.cw4()
    f = build_gauge(GaugeSpec(1.0, 2.0))
    neg = build_gauge(GaugeSpec(1.0, -2.0))
    p = BrinkmannPoint(0.2, [0.3, 0.7], 1.4)
    once = rescaled_metric_at(spec, f, p).g
    assert np.allclose(math.exp(neg(p.u)) * once, metric_at(spec, p).g)


# ---------------------------------------------------------------------------
# verify_gauge / measure_gauge_data
# ---------------------------------------------------------------------------


def test_heis_isometric_for_any_leaf_gauge():
    spec = ModelSpec.cw4()
    f = build_gauge(GaugeSpec(0.7, 1.3))
    pts = brinkmann_samples(spec, 16, seed=5)
    elements = [
        ("a+", realize_heis(spec, HeisElement([1.0, 0.0], [0.0, 0.0], 0.0))),
        ("a-", realize_heis(spec, HeisElement([0.0, 0.0], [1.0, 0.0], 0.0))),
        ("z", realize_heis(spec, HeisElement.center(1.0, 2))),
    ]
    rep = verify_gauge(spec, f, elements, tol=1e-8, samples=pts)
    assert rep.all_isometries


def test_designated_similarity_becomes_isometry():
    spec = ModelSpec.cw4()
    pts = brinkmann_samples(spec, 16, seed=6)
    phi = compose(realize_conf_flow(spec, 0.4), realize_translation_flow(spec, 0.9))
    b, alpha = measure_gauge_data(spec, phi, pts)
    assert abs(b - 0.9) < 1e-12 and abs(alpha - 0.8) < 1e-10
    for variant, eps in (("linear", None), ("bump", 0.2)):
        f = build_gauge(GaugeSpec(b, alpha, variant=variant, epsilon=eps))
        rep = verify_gauge(spec, f, [("phi", phi)], tol=1e-8, samples=pts)
        assert rep.all_isometries, rep
    # without the gauge the map is not an isometry
    zero = build_gauge(GaugeSpec(b, 0.0))
    rep = verify_gauge(spec, zero, [("phi", phi)], tol=1e-8, samples=pts)
    assert not rep.all_isometries


def test_no_gauge_for_pure_homothety():
    spec = ModelSpec.cw4()
    pts = brinkmann_samples(spec, 16, seed=7)
    phi = realize_conf_flow(spec, 0.3)
    b, alpha = measure_gauge_data(spec, phi, pts)
    assert b == 0.0 and abs(alpha - 0.6) < 1e-10
    with pytest.raises(ValueError):
        build_gauge(GaugeSpec(b, alpha))


def test_measure_rejects_flip():
    spec = ModelSpec.cw4()
    pts = brinkmann_samples(spec, 16, seed=8)
    with pytest.raises(GaugeMeasurementError):
        measure_gauge_data(spec, realize_flip(spec, 0.3), pts)


def test_measure_identity():
    spec = ModelSpec.cw4()
    b, alpha = measure_gauge_data(spec, identity_map(spec), brinkmann_samples(spec, 8, seed=9))
    assert b == 0.0 and alpha == 0.0


def test_full_quotient_gauge_suite():
    be = build_example("example2", variant="adjusted")
    spec = be.model
    gamma = be.gamma
    pts = brinkmann_samples(spec, 24, seed=10)
    phi_hat = realize_conf_element(spec, gamma.gamma_hat)
    b, alpha = measure_gauge_data(spec, phi_hat, pts)
    assert abs(b - gamma.gamma_hat.t_L) < 1e-12
    assert abs(alpha - 2.0 * gamma.gamma_hat.t_H) < 1e-10
    elements = [("gamma_hat", phi_hat)]
    elements += [
        (f"gen{i}", realize_heis(spec, g)) for i, g in enumerate(gamma.gamma0_basis)
    ]
    elements.append(("rotation", realize_K(spec, [[-1.0]])))
    for variant, eps in (("linear", None), ("bump", b / 4)):
        f = build_gauge(GaugeSpec(b, alpha, variant=variant, epsilon=eps))
        rep = verify_gauge(spec, f, elements, tol=1e-8, samples=pts)
        assert rep.all_isometries, (variant, rep.per_element)
        assert rep.to_json_dict()["per_element"][0]["verdict"] == "isometry"
