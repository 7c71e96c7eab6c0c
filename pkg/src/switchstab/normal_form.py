"""Change of coordinates and positive time scalings to a canonical pair.

Three templates, one per eigenvalue case (see :func:`cc_pair`,
:func:`rc_pair`, :func:`rr_pair`). In the mixed case the matrix with real
eigenvalues always plays the role of ``A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core2d import CaseTag, as_mat2, eig2, hypotheses, invariants
from .errors import HypothesesViolated

def cc_pair(rho_a: float, rho_b: float, e: float):
    """Both eigenvalue pairs complex: ``-rho_a +- i`` and ``-rho_b +- i``."""
    a = np.array([[-rho_a, -1.0 / e], [e, -rho_a]])
    b = np.array([[-rho_b, -1.0], [1.0, -rho_b]])
    return a, b


def cc_pair_from_kappa(rho_a: float, rho_b: float, kappa: float):
    """CC template with ``E`` chosen so that (E + 1/E)/2 = kappa, |E| > 1."""
    e = kappa + math.copysign(math.sqrt(kappa * kappa - 1.0), kappa)
    return cc_pair(rho_a, rho_b, e)


def rc_pair(a: float, b: float, k: float):
    """``A`` real with eigenvalues ``-a +- 1`` (a > 1), ``B`` complex with
    eigenvalues ``-b +- i``; ``k`` is the imaginary part of the cross invariant."""
    s = math.sqrt(1.0 + k * k)
    return np.diag([-a + 1.0, -a - 1.0]), np.array([[-b - k, -s], [s, -b + k]])


def rr_pair(a: float, b: float, k: float):
    """Both real: eigenvalues ``-a +- 1`` and ``-b +- 1``, cross invariant ``k``."""
    return (np.diag([-a + 1.0, -a - 1.0]),
            np.array([[k - b, 1.0 - k], [1.0 + k, -k - b]]))


def template(case, p1: float, p2: float, p3: float):
    case = CaseTag(case)
    if case is CaseTag.CC:
        return cc_pair(p1, p2, p3)
    if case is CaseTag.RC:
        return rc_pair(p1, p2, p3)
    return rr_pair(p1, p2, p3)


@dataclass(frozen=True)
class NormalForm:
    t: np.ndarray
    alpha_a: float
    alpha_b: float
    a_nf: np.ndarray
    b_nf: np.ndarray
    case_tag: CaseTag
    params: dict
    swapped: bool = False

    def as_dict(self):
        return {
            "case": self.case_tag.value,
            "t": self.t.tolist(),
            "alpha_a": self.alpha_a,
            "alpha_b": self.alpha_b,
            "a_nf": self.a_nf.tolist(),
            "b_nf": self.b_nf.tolist(),
            "params": dict(self.params),
            "swapped": self.swapped,
        }


def _normalize(t):
    t = t / math.sqrt(abs(np.linalg.det(t)))
    lead = t[0, 0] if abs(t[0, 0]) > 1e-12 else t[1, 0]
    return -t if lead < 0 else t


def _conj(t, m):
    return np.linalg.solve(t, m @ t)


def _rotation(phi):
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


def _cc(a, b):
    sb = eig2(b)
    beta = -sb.eigenvalues[0].real
    omega_b = abs(sb.eigenvalues[0].imag)
    omega_a = abs(eig2(a).eigenvalues[0].imag)
    n_b = (b + beta * np.eye(2)) / omega_b
    # n_b squares to -I, so n_b[1, 0] != 0 and this basis is never singular
    t0 = np.column_stack([[1.0, 0.0], n_b[:, 0]])
    # in this basis B is -rho_B I + J exactly; A's traceless part is c J + p P + q K
    ap = _conj(t0, a) / omega_a
    n = ap - 0.5 * np.trace(ap) * np.eye(2)
    c = 0.5 * (n[1, 0] - n[0, 1])
    p = 0.5 * (n[0, 0] - n[1, 1])
    q = 0.5 * (n[0, 1] + n[1, 0])
    psi = math.atan2(q, p)
    phi = 0.5 * (psi - math.copysign(0.5 * math.pi, c))
    t = _normalize(t0 @ _rotation(phi))
    a_nf = _conj(t, a) / omega_a
    b_nf = _conj(t, b) / omega_b
    params = {"rho_a": float(-a_nf[0, 0]), "rho_b": float(-b_nf[0, 0]),
              "E": float(a_nf[1, 0])}
    return NormalForm(t, omega_a, omega_b, a_nf, b_nf, CaseTag.CC, params)


def _real_basis(a):
    sa = eig2(a)
    l1, l2 = (z.real for z in sa.eigenvalues)
    v1, v2 = (np.real(v) for v in sa.eigenvectors)
    return np.column_stack([v1, v2]), 0.5 * abs(l1 - l2)


def _rc(a, b, swapped):
    v, alpha_a = _real_basis(a)
    alpha_b = abs(eig2(b).eigenvalues[0].imag)
    bp = _conj(v, b) / alpha_b
    k = 0.5 * (bp[1, 1] - bp[0, 0])
    s = math.sqrt(1.0 + k * k)
    r = -s / bp[0, 1]
    t = _normalize(v @ np.diag([1.0, r]))
    a_nf = _conj(t, a) / alpha_a
    b_nf = _conj(t, b) / alpha_b
    params = {"rho_a_over_i": float(-0.5 * (a_nf[0, 0] + a_nf[1, 1])),
              "rho_b": float(-0.5 * (b_nf[0, 0] + b_nf[1, 1])),
              "kappa_over_i": float(0.5 * (b_nf[1, 1] - b_nf[0, 0]))}
    return NormalForm(t, alpha_a, alpha_b, a_nf, b_nf, CaseTag.RC, params, swapped)


def _rr(a, b):
    v, alpha_a = _real_basis(a)
    sb = eig2(b)
    alpha_b = 0.5 * abs(sb.eigenvalues[0].real - sb.eigenvalues[1].real)
    bp = _conj(v, b) / alpha_b
    k = 0.5 * (bp[0, 0] - bp[1, 1])
    r = (1.0 - k) / bp[0, 1]
    t = _normalize(v @ np.diag([1.0, r]))
    a_nf = _conj(t, a) / alpha_a
    b_nf = _conj(t, b) / alpha_b
    params = {"rho_a_over_i": float(-0.5 * (a_nf[0, 0] + a_nf[1, 1])),
              "rho_b_over_i": float(-0.5 * (b_nf[0, 0] + b_nf[1, 1])),
              "kappa": float(0.5 * (b_nf[0, 0] - b_nf[1, 1]))}
    return NormalForm(t, alpha_a, alpha_b, a_nf, b_nf, CaseTag.RR, params)


def to_normal_form(a, b) -> NormalForm:
    """Find T, alpha_A, alpha_B with T^-1 A T / alpha_A and T^-1 B T / alpha_B
    equal to the template of the pair's case.

    In the mixed case with ``B`` real the roles are exchanged and ``swapped``
    is set; ``t``/``alpha_a``/``a_nf`` then refer to the original ``B``.
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    report = hypotheses(a, b)
    if not report.ok:
        raise HypothesesViolated(report)
    inv = invariants(a, b, report)
    if inv.case_tag is CaseTag.CC:
        return _cc(a, b)
    if inv.case_tag is CaseTag.RC:
        if inv.swapped:
            return _rc(b, a, True)
        return _rc(a, b, False)
    return _rr(a, b)
