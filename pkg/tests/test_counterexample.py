import numpy as np
import pytest

from pdeltaflow.counterexample import (
    FamilyError,
    RangeError,
    build_family,
    construct_u_n,
    counterexample_scan,
    evaluate_P_n,
    find_y_n,
    level_norm,
)
from pdeltaflow.discretization import norm_sym_grad_p


@pytest.fixture(scope="module")
def family3():
    return build_family(3, p=1.5, q=3.0, base_n=8, width0=0.32)


class TestBuildFamily:
    def test_ratios_strictly_increasing(self, family3):
        assert all(a < b for a, b in zip(family3.ratios[:-1], family3.ratios[1:]))

    def test_members_normalized(self, family3):
        for c in family3.members:
            assert abs(norm_sym_grad_p(family3.space.velocity_field(c), 1.5) - 1.0) < 1e-12

    def test_members_are_zero_boundary(self, family3):
        for c in family3.members:
            assert np.abs(c[family3.space.boundary_vel_dofs]).max() == 0.0

    def test_scaling_leaves_ratio_unchanged(self, family3):
        c = family3.members[1]
        f1 = family3.space.velocity_field(c)
        f2 = family3.space.velocity_field(3.7 * c)
        r1 = norm_sym_grad_p(f1, 3.0) / norm_sym_grad_p(f1, 1.5)
        r2 = norm_sym_grad_p(f2, 3.0) / norm_sym_grad_p(f2, 1.5)
        assert abs(r1 - r2) < 1e-12 * r1

    def test_degenerate_norm_pair(self):
        with pytest.raises(FamilyError):
            build_family(3, p=1.5, q=1.5)

    def test_level_floor(self):
        with pytest.raises(ValueError):
            build_family(2)


class TestFindYn:
    def test_closed_form(self):
        assert abs(find_y_n(8, 2.0, 1.0, 3.0) - 2.0) < 1e-14

    def test_root_property(self):
        for n, c2, f1, q in ((10, 2.0, 1.0, 3.0), (100, 1.5, 0.3, 4.0)):
            y = find_y_n(n, c2, f1, q)
            assert abs(c2 / n * y ** (q - 1.0) - f1) < 1e-12

    def test_vanishing_f1(self):
        assert find_y_n(10, 2.0, 0.0, 3.0) == 0.0

    def test_increasing_in_n(self):
        ys = [find_y_n(n, 2.0, 1.0, 3.0) for n in (4, 8, 16, 32)]
        assert all(a < b for a, b in zip(ys[:-1], ys[1:]))


class TestConstructUn:
    def test_low_endpoint(self, family3):
        n, R = 16.0, 1.0
        lo = family3.space.velocity_field(family3.members[0])
        y_lo = norm_sym_grad_p(lo, 3.0) * (R / level_norm(lo, 1.5, 3.0, n))
        field, theta, y = construct_u_n(family3, n, R, y_lo)
        assert theta < 1e-6
        assert abs(y - y_lo) < 1e-8 * y_lo

    def test_midpoint_target(self, family3):
        n, R = 16.0, 1.0
        lo = family3.space.velocity_field(family3.members[0])
        hi = family3.space.velocity_field(family3.members[-1])
        y_lo = norm_sym_grad_p(lo, 3.0) * (R / level_norm(lo, 1.5, 3.0, n))
        y_hi = norm_sym_grad_p(hi, 3.0) * (R / level_norm(hi, 1.5, 3.0, n))
        target = 0.5 * (y_lo + y_hi)
        field, theta, y = construct_u_n(family3, n, R, target)
        assert abs(y - target) <= 1e-8 * target
        assert abs(level_norm(field, 1.5, 3.0, n) - R) <= 1e-10 * R

    def test_out_of_range(self, family3):
        with pytest.raises(RangeError):
            construct_u_n(family3, 16.0, 1.0, 100.0)


class TestEvaluatePn:
    def test_zero_field(self, family3):
        z = family3.space.zero_velocity()
        assert evaluate_P_n(z, 10, 1.0, 1.0, 1.5, 3.0) == 0.0

    def test_affine_in_g1(self, family3):
        f = family3.space.velocity_field(family3.members[0])
        v1 = evaluate_P_n(f, 10, 1.0, 1.0, 1.5, 3.0)
        v2 = evaluate_P_n(f, 10, 3.0, 1.0, 1.5, 3.0)
        ndu = norm_sym_grad_p(f, 1.5)
        assert abs((v2 - v1) - 2.0 * ndu**1.5) < 1e-12


class TestScan:
    def test_negativity_and_margins(self, family3):
        scan = counterexample_scan(family3, [4, 12, 16, 24, 48], R=1.0, F1=1.0, G1=1.0, c2=2.0)
        assert scan["N0"] is not None
        margins = [r.margin for r in scan["records"] if r.n >= scan["N0"]]
        assert all(m > 0 for m in margins)
        assert all(a < b for a, b in zip(margins[:-1], margins[1:]))

    def test_sphere_constraint(self, family3):
        scan = counterexample_scan(family3, [12, 24], R=1.0)
        for r in scan["records"]:
            assert abs(r.level_norm - 1.0) <= 1e-8

    def test_step2_margin_formula(self, family3):
        # when the p-part of the level norm binds, the margin is exactly
        # (1 - 1/c2) F1 y_n - G1 R^p
        scan = counterexample_scan(family3, [12], R=1.0, F1=1.0, G1=1.0, c2=2.0)
        rec = scan["records"][0]
        assert rec.branch == "step2"
        assert abs(rec.norm_Du_p - 1.0) < 1e-8
        assert abs(rec.margin - (0.5 * rec.y_n - 1.0)) < 1e-6

    def test_c2_validation(self, family3):
        with pytest.raises(ValueError):
            counterexample_scan(family3, [10], c2=1.0)
