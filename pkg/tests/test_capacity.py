import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchasym import capacity
from patchasym.errors import QuadratureFailure, TruncationTooSmall


@pytest.fixture(scope="module")
def caps():
    return {e: capacity.cap(e) for e in (0.1, 0.02)}


def test_cap_bounds_and_monotone(caps):
    for res in caps.values():
        assert res.lower <= res.value <= res.upper
        assert (res.upper - res.lower) / res.value < 1e-4
    assert caps[0.1].value > caps[0.02].value > 0


def test_cap_log_scaling(caps):
    # cap ~ 2 pi / |log eps| as eps -> 0; the correction is O(1/|log eps|^2)
    for e, res in caps.items():
        assert 0.7 < res.value * abs(np.log(e)) / (2 * np.pi) < 1.0


def test_cap_of_two_segments_is_subadditive():
    a, b = (-0.3, -0.2), (0.2, 0.3)
    both = capacity.cap([a, b]).value
    ca, cb = capacity.cap([a]).value, capacity.cap([b]).value
    assert max(ca, cb) < both < ca + cb
    assert ca == pytest.approx(cb, rel=1e-3)


def test_cap_edge_cases():
    assert capacity.cap(0.0).value == 0.0
    with pytest.raises(ValueError):
        capacity.cap([(k, k + 0.01) for k in np.linspace(-0.5, 0.5, 9)])
    with pytest.raises(TruncationTooSmall):
        capacity.cap(0.4, truncation_radius=0.6, radii=(0.5, 0.6))


def test_neumann_capacity_quadratic():
    # small-segment limit: unit flux on both faces gives the jump 2 sqrt(eps^2 - x^2), energy pi eps^2
    res = capacity.neumann_capacity(0.05)
    assert res.lower <= res.value <= res.upper
    assert res.value / 0.05**2 == pytest.approx(np.pi, rel=0.05)
    assert res.sign_pattern == (1,)


def test_neumann_capacity_two_components_prefers_best_pattern():
    res = capacity.neumann_capacity([(-0.1, -0.05), (0.05, 0.1)])
    assert len(res.by_pattern) == 2
    best = max(res.by_pattern.values(), key=lambda v: v["upper"])
    assert res.upper == best["upper"]


@given(st.floats(0.01, 0.5), st.floats(0.05, 0.95))
@settings(max_examples=30, deadline=None)
def test_rho_weight_closed_form(half, frac):
    arc = (1.0 - half, 1.0 + half)
    theta = arc[0] + frac * 2 * half
    assert capacity.rho_weight(theta, arc) == pytest.approx(capacity.rho_closed_form(theta, arc), rel=1e-8)


def test_rho_weight_errors():
    with pytest.raises(ValueError):
        capacity.rho_weight(3.0, (0.0, 1.0))
    with pytest.raises(QuadratureFailure):
        capacity.rho_weight(1e-12, (0.0, 1.0))


def test_d_surrogate_ratio():
    # small arcs: rho ~ L / ((t - a)(b - t)), so D ~ L^2 / 6 against int dist = L^2 / 4
    for half in (0.1, 0.01):
        arc = (1.0 - half, 1.0 + half)
        assert capacity.d_surrogate(arc) / capacity.dist_integral(arc) == pytest.approx(2 / 3, rel=1e-3)


def test_sandwich_ratio():
    assert capacity.check_cap_sandwich(2.0, 4.0) == 0.5
    with pytest.raises(ValueError):
        capacity.check_cap_sandwich(1.0, 0.0)
