import math

import numpy as np
import pytest

from switchstab.classifier import Outcome, cc_factor, classify
from switchstab.clf_synthesis import (MonomialCLF, PolyCLF, PolytopeCLF,
                                      cover_forms, decrease_margin, det_checks, from_dict,
                                      levelset_clf, marginal_zeta, poly_clf, polytope_clf,
                                      synthesize, verify_clf)
from switchstab.core2d import invariants, scale_decay
from switchstab.errors import InvalidInput, NotGUES, SubcaseUnsupported
from switchstab.normal_form import cc_pair_from_kappa
from switchstab.polynomial import unit_circle
from switchstab.sampling import disguise, sample_subcase
from switchstab.simulator import clf_decrease_test
from switchstab.value_function import solve_value
from switchstab.worst_trajectory import integrate_worst

NEG_I = -np.eye(2)
CC22 = cc_pair_from_kappa(0.3, 0.4, 1.25)


@pytest.fixture(scope="module")
def levelset():
    return levelset_clf(*CC22)


@pytest.fixture(scope="module")
def generic():
    rng = np.random.default_rng(21)
    params, a, b, v = sample_subcase("RC.2.2.B", rng, gues_only=True, margin=0.1)
    a, b, *_ = disguise(a, b, rng)
    return a, b, poly_clf(a, b), polytope_clf(a, b)


def test_scalar_decay_poly_is_quadratic():
    clf = poly_clf(NEG_I, NEG_I)
    assert clf.p == 1 and clf.power == 2
    x = unit_circle(720)
    assert np.all(clf.value(x) > 0)
    assert np.all(clf.decrease(x, NEG_I) == pytest.approx(-2.0))
    coeffs = clf.coefficients
    assert coeffs[1] == pytest.approx(0, abs=1e-12) and coeffs[0] == pytest.approx(coeffs[2])


def test_four_point_polytope_is_a_square():
    v = solve_value(NEG_I, NEG_I, 256)
    forms, points = cover_forms(v, 4)
    clf = PolytopeCLF(forms)
    # edge normals of the level polygon tilt by at most one grid step
    square = math.sqrt(0.5) * np.array([[1, 0], [0, 1], [1, 0], [0, 1]])
    assert np.allclose(np.abs(forms), square, atol=2 * math.pi / 256)
    assert np.all(clf.decrease(unit_circle(1440), NEG_I) < 0)
    assert np.allclose(np.exp(clf.log_value(points)), 1.0)


def test_zeta_self_consistency(levelset):
    inv = invariants(*CC22)
    assert 0 < levelset.zeta < 1
    assert cc_factor(levelset.zeta * inv.ra, levelset.zeta * inv.rb, inv.k) == pytest.approx(
        1.0, abs=1e-10)
    assert marginal_zeta(*CC22) == pytest.approx(levelset.zeta, abs=1e-14)


def test_det_identities(levelset):
    checks = det_checks(*CC22, levelset.zeta)
    assert checks["positive"] and checks["min_a"] > 0 and checks["min_b"] > 0
    assert checks["identity_error_a"] < 1e-12 and checks["identity_error_b"] < 1e-12


def test_rescaling_multiplies_ratio():
    a, b = CC22
    for zeta in (0.2, 0.5, 0.9):
        inv, inv_s = invariants(a, b), invariants(scale_decay(a, zeta), scale_decay(b, zeta))
        assert inv_s.ra == pytest.approx(zeta * inv.ra) and inv_s.rb == pytest.approx(zeta * inv.rb)
        assert inv_s.k == pytest.approx(inv.k)


def test_levelset_ball_is_closed_worst_trajectory(levelset):
    at, bt = levelset.pair_tilde
    curve = levelset.level_curve(64)
    for _, x1, x2 in curve[::8]:
        tr = integrate_worst(at, bt, np.array([x1, x2]), stop="full-turn")
        assert np.linalg.norm(tr.end) == pytest.approx(np.hypot(x1, x2), abs=1e-6)
        assert np.all(np.abs(levelset.log_value(np.array([x1, x2]))) < 1e-6)


def test_levelset_decreases_along_trajectories(levelset):
    assert clf_decrease_test(levelset, *CC22, seed=1).ok


def test_levelset_rejects_other_subcases():
    params, a, b, v = sample_subcase("CC.1", np.random.default_rng(2), gues_only=True)
    with pytest.raises(SubcaseUnsupported):
        levelset_clf(a, b)
    assert isinstance(synthesize(a, b, "levelset"), MonomialCLF)
    with pytest.raises(NotGUES):
        levelset_clf(*cc_pair_from_kappa(0.2, 0.2, 1.25))


def test_generic_pair(generic):
    a, b, poly, polytope = generic
    assert classify(a, b).outcome is Outcome.GUES
    for clf in (poly, polytope):
        assert verify_clf(clf, a, b)["ok"]
        assert decrease_margin(clf, a, b, 4096) < 0
        assert clf_decrease_test(clf, a, b, seed=3).ok
    assert np.min(poly.value(unit_circle(720))) > 0


@pytest.mark.parametrize("power", [2, 4, 8, 16])
def test_expanded_evaluation_identity(power, generic):
    forms = generic[2].forms
    clf = PolyCLF(forms, power)
    x = unit_circle(97, offset=0.1) * 1.7
    assert np.allclose(clf.expanded()(x), clf.value(x), rtol=1e-9)


@pytest.mark.parametrize("lam", [0.3, 1.0, 4.5])
def test_homogeneity(lam, generic, levelset):
    x = unit_circle(50, offset=0.2)
    for clf in (generic[2], generic[3], levelset):
        assert np.allclose(clf.log_value(lam * x) - clf.log_value(x),
                           clf.degree * math.log(lam), atol=1e-9)


def test_power_sum_tends_to_polytope(generic):
    forms = generic[3].forms
    x = unit_circle(720, offset=0.01)
    ref = PolytopeCLF(forms).log_value(x)
    gaps = []
    for p in (8, 32, 128):
        clf = PolyCLF(forms, 2 * p)
        gaps.append(np.max(np.abs(clf.log_value(x) / (2 * p) - ref)))
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] <= math.log(len(forms)) / 256 + 1e-12


def test_round_trip(generic, levelset):
    x = unit_circle(64, offset=0.05)
    for clf in (generic[2], generic[3], levelset, MonomialCLF(synthesize(
            *sample_subcase("CC.1", np.random.default_rng(2), gues_only=True)[1:3]).poly)):
        back = from_dict(clf.to_dict())
        assert type(back) is type(clf)
        assert np.allclose(back.log_value(x), clf.log_value(x), atol=1e-9)


def test_power_non_decreasing_towards_curve():
    powers = []
    for rho in (0.45, 0.3, 0.26):
        a, b = cc_pair_from_kappa(rho, rho, 1.25)
        powers.append(poly_clf(a, b).p)
    assert powers == sorted(powers)


def test_unknown_method_and_types():
    with pytest.raises(InvalidInput):
        synthesize(NEG_I, NEG_I, "spline")
    with pytest.raises(InvalidInput):
        from_dict({"type": "spline"})
    with pytest.raises(InvalidInput):
        cover_forms(solve_value(NEG_I, NEG_I, 64), 2)


def test_level_curves_lie_on_unit_level_set(generic, levelset):
    for clf in (generic[2], generic[3], levelset):
        pts = np.array([(x1, x2) for _, x1, x2 in clf.level_curve(90)])
        assert np.allclose(clf.log_value(pts), 0.0, atol=1e-6)
