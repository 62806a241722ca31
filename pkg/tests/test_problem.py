import numpy as np
import pytest

from mpcone.cones import ConeSpec, OrthantBlock, sym_to_vec
from mpcone.errors import DimensionMismatch, RankDeficient
from mpcone.problem import ProblemData, assemble_primal, assemble_primal_rhs, validate


class TestValidate:
    def test_single_sdp_passes(self, single_sdp):
        rep = validate(single_sdp)
        assert rep.rank_a == 1 and rep.rank_m == 1 and rep.rank_stacked == 2
        assert rep.primal_slater == "Strict"
        assert rep.dual_slater == "Strict"
        assert not rep.d_satisfies_rows is False or rep.warnings == ()

    def test_elliptope_passes(self, elliptope):
        rep = validate(elliptope)
        assert rep.ok
        assert rep.rank_stacked == 5
        assert rep.d_satisfies_rows  # the identity has unit diagonal

    def test_duplicated_row_rejected(self, square_lp):
        bad = ProblemData(
            A=np.vstack([square_lp.A, square_lp.A[0]]),
            b=np.concatenate([square_lp.b, [1.0]]),
            c=square_lp.c,
            M=square_lp.M,
            d=square_lp.d,
            cone=square_lp.cone,
        )
        with pytest.raises(RankDeficient) as err:
            validate(bad)
        assert err.value.which == "A"

    def test_overlapping_rowspaces_rejected(self, square_lp):
        bad = ProblemData(
            A=square_lp.A,
            b=square_lp.b,
            c=square_lp.c,
            M=np.array([[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 0.0]]),  # row 1 = A row 1
            d=square_lp.d,
            cone=square_lp.cone,
        )
        with pytest.raises(RankDeficient) as err:
            validate(bad)
        assert err.value.which == "stacked"

    def test_d_off_rows_is_warning_not_error(self, square_lp):
        shifted = ProblemData(
            A=square_lp.A,
            b=square_lp.b,
            c=square_lp.c,
            M=square_lp.M,
            d=np.array([0.5, 0.5, 0.1, 0.1]),  # A d != b
            cone=square_lp.cone,
        )
        rep = validate(shifted)
        assert not rep.d_satisfies_rows
        assert rep.warnings

    def test_validate_deterministic(self, elliptope):
        r1, r2 = validate(elliptope), validate(elliptope)
        assert r1 == r2


class TestAssembly:
    def test_zero_parameter_keeps_objective(self, elliptope):
        inst = assemble_primal(elliptope, np.zeros(2))
        assert np.array_equal(inst.g, elliptope.c)
        assert inst.provenance == "P_of_u"

    def test_single_sdp_objective_vector(self, single_sdp):
        # min x11 + u*x22 at u=4: objective picks the diagonal (1, 0, 4).
        inst = assemble_primal(single_sdp, [4.0])
        assert np.allclose(inst.g, sym_to_vec(np.diag([1.0, 4.0])))

    def test_elliptope_objective_vector(self, elliptope):
        u = np.array([2.0, 3.0])
        inst = assemble_primal(elliptope, u)
        expected = np.zeros((3, 3))
        expected[1, 2] = expected[2, 1] = -0.5  # -x23
        expected[0, 1] = expected[1, 0] = 0.5 * u[0]  # +u1 x12
        expected[0, 2] = expected[2, 0] = -0.5 * u[1]  # -u2 x13
        assert np.allclose(inst.g, sym_to_vec(expected))

    def test_rhs_instance_layout(self, elliptope):
        v = np.array([0.25, -0.5])
        inst = assemble_primal_rhs(elliptope, v)
        assert inst.G.shape == (5, 6)
        assert inst.m_rows == slice(3, 5)
        assert np.allclose(inst.h[3:], elliptope.M @ elliptope.d + v)
        # Same cone and variable space as the objective-parameterized form.
        assert inst.cone == assemble_primal(elliptope, np.zeros(2)).cone

    def test_rhs_instance_feasible_by_construction(self, elliptope):
        # v = M(xbar - d) for a feasible xbar makes the instance feasible.
        xbar = sym_to_vec(np.eye(3) * 1.0)
        v = elliptope.M @ (xbar - elliptope.d)
        inst = assemble_primal_rhs(elliptope, v)
        assert np.linalg.norm(inst.G @ xbar - inst.h) < 1e-12

    def test_dimension_checks(self, elliptope):
        with pytest.raises(DimensionMismatch):
            assemble_primal(elliptope, [1.0])
        with pytest.raises(DimensionMismatch):
            assemble_primal_rhs(elliptope, [1.0, 2.0, 3.0])
        with pytest.raises(DimensionMismatch):
            assemble_primal(elliptope, [np.inf, 0.0])

    def test_data_shape_validation(self):
        with pytest.raises(DimensionMismatch):
            ProblemData(
                A=np.ones((1, 3)),
                b=np.ones(1),
                c=np.ones(4),  # wrong length
                M=np.ones((1, 3)),
                d=np.ones(3),
                cone=ConeSpec((OrthantBlock(3),)),
            )
