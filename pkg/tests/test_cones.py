import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mpcone import cones
from mpcone.cones import ConeSpec, OrthantBlock, PsdBlock
from mpcone.errors import DimensionMismatch, NotInterior

PSD2 = ConeSpec((PsdBlock(2),))
ORTH2 = ConeSpec((OrthantBlock(2),))
MIXED = ConeSpec((OrthantBlock(2), PsdBlock(3)))


def random_psd_vec(rng, cone):
    """A random point of the cone built from squares, vectorized."""
    parts = []
    for b in cone.blocks:
        if isinstance(b, OrthantBlock):
            parts.append(rng.standard_normal(b.size) ** 2)
        else:
            a = rng.standard_normal((b.order, b.order))
            parts.append(a @ a.T)
    return cones.to_svec(parts, cone)


class TestVectorization:
    def test_identity_layout(self):
        v = cones.sym_to_vec(np.eye(2))
        assert np.allclose(v, [1.0, 0.0, 1.0])

    def test_trace_inner_product_by_hand(self):
        x = np.array([[1.0, 1.0], [1.0, 1.0]])
        y = np.array([[2.0, 0.0], [0.0, 2.0]])
        vx, vy = cones.sym_to_vec(x), cones.sym_to_vec(y)
        assert np.isclose(vx @ vy, 4.0)
        assert np.isclose(vx @ vy, np.trace(x @ y))

    def test_orthant_passthrough(self):
        v = cones.to_svec([np.array([1.5, -2.0]), np.eye(3)], MIXED)
        assert np.allclose(v[:2], [1.5, -2.0])

    def test_roundtrip(self):
        rng = np.random.default_rng(3)
        v = rng.standard_normal(MIXED.dim)
        parts = cones.from_svec(v, MIXED)
        assert np.allclose(cones.to_svec(parts, MIXED), v)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            cones.from_svec(np.zeros(4), PSD2)

    @given(st.integers(min_value=0, max_value=10_000), st.integers(min_value=1, max_value=4))
    @settings(max_examples=40, deadline=None)
    def test_inner_product_matches_trace(self, seed, n):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal((n, n))
        x = x + x.T
        y = rng.standard_normal((n, n))
        y = y + y.T
        lhs = cones.sym_to_vec(x) @ cones.sym_to_vec(y)
        rhs = np.trace(x @ y)
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, np.linalg.norm(x) * np.linalg.norm(y))


class TestInteriorMargin:
    def test_orthant(self):
        assert cones.interior_margin(np.array([1.0, 2.0]), ORTH2) == 1.0

    def test_psd_boundary(self):
        x = cones.sym_to_vec(np.array([[1.0, 1.0], [1.0, 1.0]]))
        assert abs(cones.interior_margin(x, PSD2)) <= 1e-12

    def test_psd_interior(self):
        x = cones.sym_to_vec(np.array([[2.0, 1.0], [1.0, 2.0]]))
        assert np.isclose(cones.interior_margin(x, PSD2), 1.0)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=40, deadline=None)
    def test_self_duality(self, seed):
        rng = np.random.default_rng(seed)
        x = random_psd_vec(rng, MIXED)
        y = random_psd_vec(rng, MIXED)
        assert x @ y >= -1e-10


class TestConeInterval:
    def test_orthant_hand_case(self):
        iv = cones.cone_interval(np.array([1.0, 1.0]), np.array([1.0, -1.0]), ORTH2)
        assert np.isclose(iv.lower, -1.0, atol=1e-8)
        assert np.isclose(iv.upper, 1.0, atol=1e-8)

    def test_psd_hand_case(self):
        c = cones.sym_to_vec(np.eye(2))
        a = cones.sym_to_vec(np.array([[0.0, 1.0], [1.0, 0.0]]))
        iv = cones.cone_interval(c, a, PSD2)
        assert np.isclose(iv.lower, -1.0, atol=1e-8)
        assert np.isclose(iv.upper, 1.0, atol=1e-8)

    def test_zero_zero_empty(self):
        iv = cones.cone_interval(np.zeros(2), np.zeros(2), ORTH2)
        assert iv.empty

    def test_unbounded_side(self):
        iv = cones.cone_interval(np.array([1.0, 1.0]), np.array([1.0, 0.0]), ORTH2)
        assert iv.upper == math.inf
        assert np.isclose(iv.lower, -1.0, atol=1e-8)

    def test_contains_zero_when_center_interior(self):
        rng = np.random.default_rng(11)
        c = random_psd_vec(rng, PSD2) + 0.1 * PSD2.identity()
        a = rng.standard_normal(PSD2.dim)
        iv = cones.cone_interval(c, a, PSD2)
        assert iv.contains(0.0)

    @given(st.integers(min_value=0, max_value=500))
    @settings(max_examples=25, deadline=None)
    def test_convexity_of_reported_interval(self, seed):
        rng = np.random.default_rng(seed)
        c = rng.standard_normal(PSD2.dim) + 2.0 * PSD2.identity()
        a = rng.standard_normal(PSD2.dim)
        iv = cones.cone_interval(c, a, PSD2)
        if iv.empty:
            return
        lo = iv.lower if math.isfinite(iv.lower) else -3.0
        hi = iv.upper if math.isfinite(iv.upper) else 3.0
        for theta in np.linspace(lo + 1e-6, hi - 1e-6, 7):
            assert cones.interior_margin(c + theta * a, PSD2) > 0.0

    def test_limit_membership_along_shrinking_offsets(self):
        # With c + mu*a interior for a decreasing positive sequence mu -> 0,
        # the limit point c must lie in the (closed) cone.
        c = cones.sym_to_vec(np.array([[1.0, 1.0], [1.0, 1.0]]))  # boundary point
        a = cones.sym_to_vec(np.eye(2))
        for mu in [1.0 / 2**k for k in range(20)]:
            assert cones.interior_margin(c + mu * a, PSD2) > 0.0
        assert cones.interior_margin(c, PSD2) >= -1e-9


class TestNtScaling:
    def test_orthant_closed_form(self):
        s = cones.nt_scaling(np.array([4.0, 1.0]), np.array([1.0, 4.0]), ORTH2)
        assert np.allclose(s.data[0], [2.0, 0.5])

    def test_psd_identity(self):
        e = PSD2.identity()
        s = cones.nt_scaling(e, e, PSD2)
        assert np.allclose(s.data[0], np.eye(2))

    def test_psd_commuting_case(self):
        x = cones.sym_to_vec(np.diag([4.0, 1.0]))
        s = cones.nt_scaling(x, PSD2.identity(), PSD2)
        assert np.allclose(s.data[0], np.diag([2.0, 1.0]))

    def test_rejects_boundary(self):
        x = cones.sym_to_vec(np.array([[1.0, 1.0], [1.0, 1.0]]))
        with pytest.raises(NotInterior):
            cones.nt_scaling(x, PSD2.identity(), PSD2)

    @given(st.integers(min_value=0, max_value=10_000))
    @settings(max_examples=25, deadline=None)
    def test_scaling_identity_reconstruction(self, seed):
        rng = np.random.default_rng(seed)
        x = random_psd_vec(rng, MIXED) + 0.5 * MIXED.identity()
        y = random_psd_vec(rng, MIXED) + 0.5 * MIXED.identity()
        s = cones.nt_scaling(x, y, MIXED)
        # Quadratic action of the scaling maps y back to x.
        err = np.abs(s.apply(y) - x).max()
        assert err <= 1e-8 * (1.0 + np.abs(x).max())
