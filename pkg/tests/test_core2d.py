import math

import numpy as np
import pytest
from scipy.linalg import expm

from oracles import taylor_expm
from switchstab.core2d import (CaseTag, Failure, as_mat2, eig2, expm2, from_params,
                               hypotheses, invariants, scale_decay)
from switchstab.errors import DegenerateOrdering, HypothesesViolated, InvalidInput
from switchstab.normal_form import cc_pair
from switchstab.sampling import disguise, random_hurwitz, random_pair

ROT = np.array([[-1.0, -1.0], [1.0, -1.0]])


def test_eig_rotation_plus_scalar():
    s = eig2(ROT)
    assert not s.is_real and s.hurwitz
    assert s.eigenvalues[0] == pytest.approx(-1 + 1j)
    assert s.eigenvalues[1] == pytest.approx(-1 - 1j)
    assert s.eigenvalues[1].imag < 0


def test_eig_diagonal_ordering():
    s = eig2(np.diag([-2.0, -3.0]))
    assert s.is_real and s.hurwitz
    assert s.eigenvalues == (-2.0, -3.0)


def test_eig_characteristic_residual(rng):
    for _ in range(200):
        m = rng.normal(size=(2, 2)) * rng.uniform(0.1, 10)
        try:
            s = eig2(m)
        except DegenerateOrdering:
            continue
        tr, det = np.trace(m), np.linalg.det(m)
        scale = max(1.0, abs(tr) ** 2, abs(det))
        for lam in s.eigenvalues:
            assert abs(lam * lam - tr * lam + det) <= 1e-10 * scale
        assert abs(sum(s.eigenvalues) - tr) <= 1e-12 * max(1.0, np.abs(m).max())


def test_eig_degenerate_ordering():
    with pytest.raises(DegenerateOrdering):
        eig2(np.diag([1.0, -1.0]))


@pytest.mark.parametrize("bad", [[[1, 2], [3]], [[1, np.nan], [0, 1]], [1, 2, 3], "abc"])
def test_as_mat2_rejects(bad):
    with pytest.raises(InvalidInput):
        as_mat2(bad)


def test_expm_matches_taylor_oracle(rng):
    for _ in range(100):
        d = rng.normal(size=(2, 2)) * rng.uniform(0.1, 3)
        t = rng.uniform(0, 2)
        ref = taylor_expm(d, t)
        assert np.max(np.abs(expm2(d, t) - ref)) <= 1e-10 * max(1.0, np.abs(ref).max())


@pytest.mark.parametrize("m", [
    [[-1.0, 1.0], [0.0, -1.0]],      # defective
    [[0.0, -1.0], [1.0, 0.0]],       # rotation
    [[-30.0, 0.0], [0.0, 40.0]],     # stiff real
    [[-2.0, 0.0], [0.0, -2.0]],      # scalar
])
def test_expm_special_cases(m):
    for t in (0.0, 0.3, 1.7):
        ref = expm(np.asarray(m) * t)
        assert np.allclose(expm2(m, t), ref, rtol=1e-12, atol=1e-14 * np.abs(ref).max())


def test_expm_vectorized_times():
    ts = np.linspace(0, 1, 5)
    out = expm2(ROT, ts)
    assert out.shape == (5, 2, 2)
    for t, m in zip(ts, out):
        assert np.allclose(m, expm(ROT * t), atol=1e-14)


def test_hypotheses_commuting():
    rep = hypotheses(-np.eye(2), ROT)
    assert not rep.h2 and rep.failure_detail is Failure.COMMUTING


def test_hypotheses_normal_form_all_hold():
    a, b = cc_pair(1.0, 1.0, 2.0)
    rep = hypotheses(a, b)
    assert rep.h1 and rep.h2 and rep.h3 and rep.h4 and rep.ok


def test_hypotheses_shared_eigenvector():
    a = np.array([[-1.0, 1.0], [0.0, -2.0]])
    b = np.array([[-3.0, 2.0], [0.0, -1.0]])
    rep = hypotheses(a, b)
    assert rep.h1 and rep.h2 and not rep.h4
    assert rep.failure_detail is Failure.SHARED_EIGENVECTOR


def test_hypotheses_non_hurwitz_and_defective():
    assert hypotheses(np.diag([1.0, -1.5]), ROT).failure_detail is Failure.NON_HURWITZ
    rep = hypotheses(np.array([[-1.0, 1.0], [0.0, -1.0]]), ROT)
    assert not rep.h3 and rep.failure_detail is Failure.NON_DIAGONALIZABLE


def test_commutation_tolerance_is_relative():
    a = np.diag([-1.0, -2.0]) * 1e6
    b = np.diag([-3.0, -1.0]) * 1e6 + np.array([[0, 1e-6], [0, 0]])
    assert not hypotheses(a, b).h2


def test_invariants_rho_of_rotation():
    a, b = cc_pair(1.0, 0.5, 2.0)
    inv = invariants(a, b)
    assert inv.case_tag is CaseTag.CC
    assert inv.ra == pytest.approx(1.0, abs=1e-14)


def test_invariants_normal_form_kappa_and_dd():
    inv = invariants(*cc_pair(1.0, 1.0, 2.0))
    assert inv.k == pytest.approx(1.25, abs=1e-14)
    assert inv.dd == pytest.approx(1.25 ** 2 + 2 * 1.25 - 3, abs=1e-13)
    assert inv.dd == pytest.approx(1.0625, abs=1e-13)


def test_invariants_reject_violations():
    with pytest.raises(HypothesesViolated) as info:
        invariants(-np.eye(2), ROT)
    assert info.value.report.failure_detail is Failure.COMMUTING


def _tuple(inv):
    return np.array([inv.ra, inv.rb, inv.k, inv.dd])


def test_invariants_similarity_and_scaling(rng):
    checked = 0
    while checked < 200:
        a, b = random_pair(rng)
        try:
            ref = invariants(a, b)
        except (HypothesesViolated, DegenerateOrdering):
            continue
        a2, b2, *_ = disguise(a, b, rng)
        got = invariants(a2, b2)
        assert got.case_tag is ref.case_tag
        assert np.allclose(_tuple(got), _tuple(ref), rtol=1e-9, atol=1e-9)
        checked += 1


def test_invariant_trichotomy(rng):
    counts = {tag: 0 for tag in CaseTag}
    n = 0
    while n < 1000:
        a, b = random_pair(rng)
        try:
            inv = invariants(a, b)
        except (HypothesesViolated, DegenerateOrdering):
            continue
        n += 1
        counts[inv.case_tag] += 1
        if inv.case_tag is CaseTag.CC:
            assert not inv.kappa.imaginary and abs(inv.k) > 1
        elif inv.case_tag is CaseTag.RR:
            assert not inv.kappa.imaginary and abs(abs(inv.k) - 1) > 1e-9
        else:
            assert inv.kappa.imaginary and inv.chi is not None
        if inv.case_tag is not CaseTag.CC:
            assert inv.rho_a.imaginary and inv.ra > 1
    assert all(c > 0 for c in counts.values())


def test_mixed_case_puts_real_matrix_first():
    a, b = cc_pair(0.5, 0.5, 2.0)
    real = np.diag([-1.0, -3.0])
    inv = invariants(a, real)
    assert inv.case_tag is CaseTag.RC and inv.swapped
    assert inv.ra == pytest.approx(2.0)


def test_from_params_dd_formulas():
    rc = from_params("RC", 2.0, 0.5, 0.7)
    assert rc.dd == pytest.approx(-0.7 ** 2 - 2 * 2.0 * 0.5 * 0.7 - 1 + 4 - 0.25)
    assert rc.chi == pytest.approx(-2.0 * 0.7 - 0.5)
    rr = from_params("RR", 2.0, 1.5, -3.0)
    assert rr.dd == pytest.approx(9 - 2 * 3.0 * (-3.0) - 1 + 4 + 2.25)


def test_scale_decay_moves_real_parts_only(rng):
    for _ in range(20):
        d = random_hurwitz(rng)
        z = rng.uniform(0.1, 0.9)
        e0 = np.sort_complex(np.linalg.eigvals(d))
        e1 = np.sort_complex(np.linalg.eigvals(scale_decay(d, z)))
        tau = e0.real.mean()
        assert np.allclose(e1 - z * tau, e0 - tau, atol=1e-10)
    assert math.isclose(np.trace(scale_decay(ROT, 0.5)), -1.0)
