"""Tests for the calming function families.

Oracles used here:
  * central finite differences for the closed-form derivatives,
  * direct subtraction x - zeta(x) for the cancellation-free residuals,
  * log-log slopes of the residual at fixed x for the decay order gamma,
  * hand-evaluated points (peaks, plateaus, breakpoints) per family.
"""

import numpy as np
import pytest

from calmed_mhdb.calming import (
    FAMILIES,
    VERIFY_TOLERANCE,
    CalmingConstants,
    CalmingSpec,
    constants_for,
    derivative,
    evaluate,
    residual,
    verify_properties,
)

BOUNDED = [f for f in FAMILIES if f != "identity"]
EPSILONS = [1.0, 0.1, 0.01]


class TestSpecValidation:
    def test_unknown_family(self):
        with pytest.raises(ValueError):
            CalmingSpec("cubic", 0.1)

    @pytest.mark.parametrize("eps", [0.0, -0.5, np.inf, np.nan])
    def test_bad_epsilon(self, eps):
        with pytest.raises(ValueError):
            CalmingSpec("rational1", eps)

    def test_identity_requires_zero_epsilon(self):
        with pytest.raises(ValueError):
            CalmingSpec("identity", 0.1)
        assert CalmingSpec("identity").is_identity
        assert not CalmingSpec("arctan", 1.0).is_identity


class TestPointValues:
    def test_identity_is_plain_x(self):
        spec = CalmingSpec("identity")
        x = np.linspace(-5, 5, 11)
        assert np.array_equal(evaluate(spec, x), x)
        assert np.array_equal(derivative(spec, x), np.ones_like(x))
        assert np.array_equal(residual(spec, x), np.zeros_like(x))

    def test_zero_maps_to_zero(self):
        for family in BOUNDED:
            spec = CalmingSpec(family, 0.3)
            assert evaluate(spec, 0.0) == 0.0
            assert derivative(spec, 0.0) == 1.0

    def test_rational1_halfway_point(self):
        assert evaluate(CalmingSpec("rational1", 1.0), 1.0) == pytest.approx(0.5)

    def test_rational2_peak(self):
        # zeta2 peaks at |x| = 1/eps with value 1/(2 eps)
        eps = 0.25
        spec = CalmingSpec("rational2", eps)
        assert evaluate(spec, 1.0 / eps) == pytest.approx(0.5 / eps)
        assert derivative(spec, 1.0 / eps) == pytest.approx(0.0, abs=1e-14)

    def test_arctan_value(self):
        assert evaluate(CalmingSpec("arctan", 1.0), 1.0) == pytest.approx(np.pi / 4)

    def test_saturating_plateau(self):
        eps = 0.5
        spec = CalmingSpec("saturating", eps)
        assert evaluate(spec, 5.0) == pytest.approx(1.5 / eps)
        assert evaluate(spec, 4.0) == pytest.approx(1.5 / eps)
        assert derivative(spec, 5.0) == 0.0
        # midpoint of the quadratic blend: q(1.5/eps) = 1.5/eps - eps/8 * (1/eps)^2
        mid = 1.5 / eps
        assert evaluate(spec, mid) == pytest.approx(mid - 0.125 / eps)

    def test_saturating_window_is_bitwise_identity(self):
        eps = 0.2
        spec = CalmingSpec("saturating", eps)
        x = np.linspace(-1.0 / eps + 1e-9, 1.0 / eps - 1e-9, 501)
        assert np.array_equal(evaluate(spec, x), x)

    def test_supremum_levels(self):
        eps = 0.1
        far = 1e7
        assert evaluate(CalmingSpec("rational1", eps), far) == pytest.approx(
            1.0 / eps, rel=1e-5
        )
        assert evaluate(CalmingSpec("arctan", eps), far) == pytest.approx(
            0.5 * np.pi / eps, rel=1e-5
        )
        assert evaluate(CalmingSpec("saturating", eps), far) == 1.5 / eps


class TestDerivativeAndResidual:
    @pytest.mark.parametrize("family", BOUNDED)
    @pytest.mark.parametrize("eps", [1.0, 0.25])
    def test_derivative_matches_central_difference(self, family, eps):
        spec = CalmingSpec(family, eps)
        # offset dodges the saturating breakpoints at 1/eps and 2/eps
        x = np.linspace(-3.0 / eps, 3.0 / eps, 41) + 0.0137 / eps
        h = 1e-6 / eps
        fd = (evaluate(spec, x + h) - evaluate(spec, x - h)) / (2 * h)
        assert np.abs(fd - derivative(spec, x)).max() < 1e-6

    @pytest.mark.parametrize("family", BOUNDED)
    def test_residual_equals_direct_subtraction(self, family):
        spec = CalmingSpec(family, 0.5)
        x = np.linspace(-4, 4, 801)
        direct = x - evaluate(spec, x)
        assert np.abs(residual(spec, x) - direct).max() < 1e-14

    def test_saturating_derivative_continuous_at_breakpoints(self):
        eps = 0.4
        spec = CalmingSpec("saturating", eps)
        for bp in (1.0 / eps, 2.0 / eps):
            left = derivative(spec, bp - 1e-8)
            right = derivative(spec, bp + 1e-8)
            assert abs(float(left) - float(right)) < 1e-7
            gap = evaluate(spec, bp + 1e-8) - evaluate(spec, bp - 1e-8)
            assert abs(float(gap)) < 1e-7

    @pytest.mark.parametrize(
        "family,gamma", [("rational1", 1.0), ("rational2", 2.0), ("arctan", 2.0)]
    )
    def test_residual_decay_order(self, family, gamma):
        # |x - zeta(x)| at fixed x scales like eps^gamma; oracle is a
        # log-log slope over an epsilon ladder
        x = 0.7
        ladder = np.array([1e-2, 1e-3, 1e-4, 1e-5])
        vals = np.array([abs(float(residual(CalmingSpec(family, e), x))) for e in ladder])
        slope = np.polyfit(np.log(ladder), np.log(vals), 1)[0]
        assert slope == pytest.approx(gamma, abs=0.05)

    def test_saturating_residual_exactly_zero_inside_window(self):
        x = 0.7
        for eps in [1e-2, 1e-3, 1e-4]:
            assert residual(CalmingSpec("saturating", eps), x) == 0.0

    def test_oddness_is_exact(self):
        x = np.linspace(0.0, 40.0, 2001)
        for family in BOUNDED:
            spec = CalmingSpec(family, 0.3)
            assert np.array_equal(evaluate(spec, -x), -evaluate(spec, x))


class TestConstants:
    def test_identity_has_no_constants(self):
        with pytest.raises(ValueError):
            constants_for(CalmingSpec("identity"))

    def test_table(self):
        eps = 0.2
        c1 = constants_for(CalmingSpec("rational1", eps))
        assert (c1.m_eps, c1.l_eps, c1.gamma, c1.beta, c1.c_resid) == (
            1.0 / eps + 1.0,
            1.0,
            1.0,
            2.0,
            1.0,
        )
        c2 = constants_for(CalmingSpec("rational2", eps))
        assert (c2.m_eps, c2.gamma, c2.beta) == (0.5 / eps + 1.0, 2.0, 3.0)
        c3 = constants_for(CalmingSpec("arctan", eps))
        assert c3.m_eps == pytest.approx(0.5 * np.pi / eps + 1.0)
        assert (c3.gamma, c3.beta, c3.c_resid) == (2.0, 3.0, 1.0 / 3.0)
        c4 = constants_for(CalmingSpec("saturating", eps))
        assert (c4.m_eps, c4.gamma, c4.beta, c4.c_resid) == (1.5 / eps + 1.0, 1.0, 2.0, 1.0)

    @pytest.mark.parametrize("family", BOUNDED)
    @pytest.mark.parametrize("eps", EPSILONS)
    def test_derivative_within_lipschitz_constant(self, family, eps):
        spec = CalmingSpec(family, eps)
        consts = constants_for(spec)
        x = np.linspace(-20.0 / eps, 20.0 / eps, 4001)
        assert np.abs(derivative(spec, x)).max() <= consts.l_eps + 1e-15


class TestVerifyProperties:
    @pytest.mark.parametrize("family", BOUNDED)
    @pytest.mark.parametrize("eps", EPSILONS)
    def test_certified_constants_pass(self, family, eps):
        report = verify_properties(CalmingSpec(family, eps), sample_count=4096, seed=2)
        assert report.passed, f"{family} eps={eps}: worst={report.worst():.3e}"
        assert report.worst() <= VERIFY_TOLERANCE

    def test_rational2_alternative_residual_pair(self):
        # the lower-order certificate (gamma=1, beta=2, c=1/2) also holds
        spec = CalmingSpec("rational2", 0.1)
        base = constants_for(spec)
        alt = CalmingConstants(base.m_eps, base.l_eps, 1.0, 2.0, 0.5)
        report = verify_properties(spec, constants=alt, sample_count=4096)
        assert report.passed

    def test_halved_bound_fails(self):
        spec = CalmingSpec("rational1", 0.1)
        base = constants_for(spec)
        bad = CalmingConstants(0.5 * base.m_eps, base.l_eps, base.gamma, base.beta, base.c_resid)
        report = verify_properties(spec, constants=bad)
        assert not report.passed
        assert report.bound_violation > VERIFY_TOLERANCE

    def test_halved_lipschitz_fails(self):
        spec = CalmingSpec("arctan", 0.1)
        base = constants_for(spec)
        bad = CalmingConstants(base.m_eps, 0.5, base.gamma, base.beta, base.c_resid)
        assert verify_properties(spec, constants=bad).lipschitz_violation > VERIFY_TOLERANCE

    def test_shrunk_residual_prefactor_fails(self):
        spec = CalmingSpec("saturating", 0.1)
        base = constants_for(spec)
        bad = CalmingConstants(base.m_eps, base.l_eps, base.gamma, base.beta, 0.1)
        assert verify_properties(spec, constants=bad).residual_violation > VERIFY_TOLERANCE

    def test_identity_rejected(self):
        with pytest.raises(ValueError):
            verify_properties(CalmingSpec("identity"))

    def test_tiny_sample_count_rejected(self):
        with pytest.raises(ValueError):
            verify_properties(CalmingSpec("rational1", 0.1), sample_count=1)

    def test_report_fields(self):
        report = verify_properties(CalmingSpec("rational1", 0.5), sample_count=256, seed=5)
        assert report.sample_count >= 256
        assert report.x_max == pytest.approx(20.0)
        assert report.worst() == max(
            report.bound_violation,
            report.lipschitz_violation,
            report.residual_violation,
            report.oddness_violation,
        )


class TestPropertyClassBoundary:
    def test_monotone_families(self):
        # rational1, arctan and saturating are nondecreasing; rational2 is not
        x = np.linspace(-30.0, 30.0, 3001)
        for family in ("rational1", "arctan", "saturating"):
            z = evaluate(CalmingSpec(family, 0.2), x)
            assert np.all(np.diff(z) >= -1e-15)
        z2 = evaluate(CalmingSpec("rational2", 0.2), x)
        assert np.any(np.diff(z2) < 0)
        eps = 0.2
        assert evaluate(CalmingSpec("rational2", eps), 2.0 / eps) < evaluate(
            CalmingSpec("rational2", eps), 1.0 / eps
        )

    def test_root_map_is_not_lipschitz(self):
        # sign(x) |x|^(1/2) has difference quotients h^(-1/2) at the origin,
        # so it sits outside the admissible class no matter the constant
        hs = np.array([1e-2, 1e-4, 1e-6, 1e-8, 1e-10])
        quotients = np.sqrt(hs) / hs
        assert np.all(np.diff(quotients) > 0)
        assert quotients[-1] > 1e4
