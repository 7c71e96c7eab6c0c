"""Exact spectral algebra for 2x2 real matrices and the pair invariants.

All complex arithmetic of the package is confined to this module. The
invariants of a pair are exported as tagged real numbers: ``Rho(value,
imaginary=True)`` stands for the purely imaginary quantity ``1j * value``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .config import settings
from .errors import DegenerateOrdering, HypothesesViolated, InvalidInput

I2 = np.eye(2)


def as_mat2(m, name="matrix") -> np.ndarray:
    """Validate and copy a 2x2 real matrix (nested lists, flat 4-list or array)."""
    try:
        arr = np.array(m, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"{name}: not numeric") from exc
    if arr.shape == (4,):
        arr = arr.reshape(2, 2)
    if arr.shape != (2, 2):
        raise InvalidInput(f"{name}: expected a 2x2 matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput(f"{name}: entries must be finite")
    return arr


def max_norm(m) -> float:
    return float(np.max(np.abs(m)))


def det2(u, v):
    """det of the 2x2 matrix with columns u and v (broadcasts over leading axes)."""
    u = np.asarray(u)
    v = np.asarray(v)
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def expm2(m, t):
    """Closed-form ``exp(m t)`` for scalar or array ``t``.

    Writes ``m = tau I + N`` with ``N`` traceless, so ``N @ N = delta2 I`` and
    ``exp(m t) = exp(tau t) (C(t) I + S(t) N)`` with hyperbolic (real
    eigenvalues), trigonometric (complex) or polynomial (defective) ``C, S``.
    """
    m = np.asarray(m, dtype=float)
    t = np.asarray(t, dtype=float)
    tau = 0.5 * (m[0, 0] + m[1, 1])
    n = m - tau * I2
    delta2 = -(n[0, 0] * n[1, 1] - n[0, 1] * n[1, 0])
    if delta2 > 0.0:
        d = math.sqrt(delta2)
        # exp(tau t) cosh(d t) written as a sum of exponentials so that large
        # d t does not overflow before the decaying factor is applied
        with np.errstate(over="ignore"):
            hi = 0.5 * np.exp((tau + d) * t)
            lo = 0.5 * np.exp((tau - d) * t)
            small = np.abs(d * t) < 1.0
            g = np.exp(tau * t)
            gc = np.where(small, g * np.cosh(np.where(small, d * t, 0.0)), hi + lo)
            gs = np.where(small, g * np.sinh(np.where(small, d * t, 0.0)) / d, (hi - lo) / d)
    else:
        if delta2 < 0.0:
            w = math.sqrt(-delta2)
            c = np.cos(w * t)
            s = np.sin(w * t) / w
        else:
            c = np.ones_like(t)
            s = t.copy()
        g = np.exp(tau * t)
        gc, gs = g * c, g * s
    return gc[..., None, None] * I2 + gs[..., None, None] * n


class Failure(str, enum.Enum):
    NON_HURWITZ = "non-Hurwitz"
    COMMUTING = "commuting"
    NON_DIAGONALIZABLE = "non-diagonalizable"
    SHARED_EIGENVECTOR = "shared-eigenvector"
    EIGENVALUE_MULTIPLICITY = "eigenvalue-multiplicity"


class CaseTag(str, enum.Enum):
    CC = "CC"
    RC = "RC"
    RR = "RR"


@dataclass(frozen=True)
class Spectrum2:
    eigenvalues: tuple[complex, complex]
    eigenvectors: tuple[np.ndarray, ...]
    is_real: bool
    is_diagonalizable: bool
    hurwitz: bool
    repeated: bool = False


def _eigvec(m, lam):
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    v1 = np.array([b, lam - a], dtype=complex)
    v2 = np.array([lam - d, c], dtype=complex)
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    nv = np.linalg.norm(v)
    if nv == 0.0:
        return np.array([1.0, 0.0], dtype=complex)
    v = v / nv
    # fix the complex phase: largest component real positive
    k = int(np.argmax(np.abs(v)))
    v = v * (abs(v[k]) / v[k])
    return v


def eig2(m) -> Spectrum2:
    """Eigen-decomposition by the quadratic formula with the invariant labeling.

    Real eigenvalues are ordered so that ``|l2| > |l1|``; complex ones so that
    ``Im(l2) < 0``.
    """
    m = as_mat2(m)
    tr = m[0, 0] + m[1, 1]
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    half = 0.5 * tr
    disc = half * half - det
    scale = max(abs(half), math.sqrt(abs(det)), max_norm(m), 1e-300)
    gap = 2.0 * math.sqrt(abs(disc))
    repeated = gap <= settings.tol_eig * scale

    if repeated:
        lam = half
        l1 = l2 = complex(lam)
        scalar = max_norm(m - lam * I2) <= settings.tol_eig * scale
        vecs = (np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)) if scalar \
            else (_eigvec(m, lam),)
        return Spectrum2((l1, l2), vecs, True, scalar, lam < 0.0, repeated=True)

    if disc > 0.0:
        sq = math.sqrt(disc)
        r1 = half + math.copysign(sq, half) if half != 0.0 else sq
        r2 = det / r1 if r1 != 0.0 else half - sq
        small, large = (r1, r2) if abs(r1) < abs(r2) else (r2, r1)
        if abs(abs(small) - abs(large)) <= 1e-12 * abs(large):
            raise DegenerateOrdering(
                f"real eigenvalues {r1!r}, {r2!r} have equal modulus")
        l1, l2 = complex(small), complex(large)
        is_real = True
    else:
        w = math.sqrt(-disc)
        l1, l2 = complex(half, w), complex(half, -w)
        is_real = False
    vecs = (_eigvec(m, l1), _eigvec(m, l2))
    hurwitz = l1.real < 0.0 and l2.real < 0.0
    return Spectrum2((l1, l2), vecs, is_real, True, hurwitz)


@dataclass(frozen=True)
class HypothesisReport:
    h1: bool
    h2: bool
    h3: bool
    h4: bool
    failure_detail: Failure | None = None

    @property
    def ok(self) -> bool:
        return self.h1 and self.h2 and self.h3 and self.h4

    def as_dict(self):
        return {"h1": self.h1, "h2": self.h2, "h3": self.h3, "h4": self.h4,
                "failure_detail": None if self.failure_detail is None
                else self.failure_detail.value}


def commutes(a, b) -> bool:
    a = as_mat2(a)
    b = as_mat2(b)
    scale = max(max_norm(a), max_norm(b)) ** 2
    return max_norm(a @ b - b @ a) <= settings.tol_commute * scale


def _same_direction(u, v) -> bool:
    return abs(u[0] * v[1] - u[1] * v[0]) <= settings.tol_eigvec


def hypotheses(a, b) -> HypothesisReport:
    """Decide H1 (Hurwitz), H2 (non-commuting), H3 (diagonalizable), H4 (no
    shared eigenvector). Never raises on mathematical grounds."""
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    sa, sb = eig2(a), eig2(b)
    h1 = sa.hurwitz and sb.hurwitz
    h2 = not commutes(a, b)
    h3 = sa.is_diagonalizable and sb.is_diagonalizable
    h4 = not any(_same_direction(u, v) for u in sa.eigenvectors for v in sb.eigenvectors)
    detail = None
    if not h1:
        detail = Failure.NON_HURWITZ
    elif not h2:
        detail = Failure.COMMUTING
    elif not h3:
        detail = Failure.NON_DIAGONALIZABLE
    elif sa.repeated or sb.repeated:
        # scalar matrix that escaped the commutation tolerance
        detail = Failure.EIGENVALUE_MULTIPLICITY
        h3 = False
    elif not h4:
        detail = Failure.SHARED_EIGENVECTOR
    return HypothesisReport(h1, h2, h3, h4, detail)


@dataclass(frozen=True)
class Rho:
    """``rho`` itself (complex eigenvalues) or ``rho/i`` (real eigenvalues)."""
    value: float
    imaginary: bool

    def as_complex(self) -> complex:
        return 1j * self.value if self.imaginary else complex(self.value)


@dataclass(frozen=True)
class Kappa:
    value: float
    imaginary: bool

    def as_complex(self) -> complex:
        return 1j * self.value if self.imaginary else complex(self.value)


@dataclass(frozen=True)
class Invariants:
    rho_a: Rho
    rho_b: Rho
    kappa: Kappa
    dd: float
    chi: float | None
    case_tag: CaseTag
    swapped: bool = False
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def ra(self) -> float:
        return self.rho_a.value

    @property
    def rb(self) -> float:
        return self.rho_b.value

    @property
    def k(self) -> float:
        return self.kappa.value

    def as_dict(self):
        return {
            "case": self.case_tag.value,
            "rho_a": self.ra, "rho_a_imaginary": self.rho_a.imaginary,
            "rho_b": self.rb, "rho_b_imaginary": self.rho_b.imaginary,
            "kappa": self.k, "kappa_imaginary": self.kappa.imaginary,
            "D": self.dd, "chi": self.chi, "swapped": self.swapped,
        }


def dd_value(ra: complex, rb: complex, k: complex) -> complex:
    return k * k + 2 * ra * rb * k - (1 + ra * ra + rb * rb)


def from_params(case, ra: float, rb: float, k: float) -> Invariants:
    """Build invariants directly from the real parameters of a case.

    CC: (rho_a, rho_b, K); RC: (rho_a/i, rho_b, K/i); RR: (rho_a/i, rho_b/i, K).
    """
    case = CaseTag(case)
    rho_a = Rho(float(ra), case is not CaseTag.CC)
    rho_b = Rho(float(rb), case is CaseTag.RR)
    kap = Kappa(float(k), case is CaseTag.RC)
    d = dd_value(rho_a.as_complex(), rho_b.as_complex(), kap.as_complex())
    chi = None
    if case is CaseTag.RC:
        chi = (rho_a.as_complex() * kap.as_complex() - rho_b.as_complex()).real
    return Invariants(rho_a, rho_b, kap, d.real, chi, case)


def invariants(a, b, report: HypothesisReport | None = None) -> Invariants:
    """rho_A, rho_B, K, D (and chi in the mixed case) of an H1-H4 pair.

    In the mixed case the labels are swapped if needed so that ``rho_a`` belongs
    to the matrix with real eigenvalues (``swapped`` records it).
    """
    a = as_mat2(a, "A")
    b = as_mat2(b, "B")
    report = report or hypotheses(a, b)
    if not report.ok:
        raise HypothesesViolated(report)
    sa, sb = eig2(a), eig2(b)
    swapped = False
    if sb.is_real and not sa.is_real:
        a, b, sa, sb = b, a, sb, sa
        swapped = True
    l1, l2 = sa.eigenvalues
    l3, l4 = sb.eigenvalues
    ra = -1j * (l1 + l2) / (l1 - l2)
    rb = -1j * (l3 + l4) / (l3 - l4)
    k = 2 * (np.trace(a @ b) - 0.5 * np.trace(a) * np.trace(b)) / ((l1 - l2) * (l3 - l4))
    d = dd_value(ra, rb, k)

    def tagged(z, cls):
        if abs(z.imag) > abs(z.real):
            return cls(z.imag, True)
        return cls(z.real, False)

    rho_a, rho_b, kap = tagged(ra, Rho), tagged(rb, Rho), tagged(complex(k), Kappa)
    if sa.is_real and sb.is_real:
        tag = CaseTag.RR
    elif not sa.is_real and not sb.is_real:
        tag = CaseTag.CC
    else:
        tag = CaseTag.RC
    if tag is CaseTag.RC:
        # K is purely imaginary here even when its magnitude is tiny
        kap = Kappa(complex(k).imag, True)
    elif kap.imaginary:
        kap = Kappa(complex(k).real, False)
    chi = None
    if tag is CaseTag.RC:
        chi = (rho_a.as_complex() * kap.as_complex() - rho_b.as_complex()).real
    return Invariants(rho_a, rho_b, kap, float(d.real), chi, tag, swapped,
                      extra={"eig_a": (l1, l2), "eig_b": (l3, l4)})


def scale_decay(d, zeta: float):
    """Shift D by a multiple of I so that its decay rate -tr(D)/2 is multiplied by ``zeta``.

    The eigenvalues move from ``tau +- delta`` to ``zeta tau +- delta``; the
    rotation part, and hence every collinearity direction, is unchanged.
    """
    d = as_mat2(d)
    return d - (1.0 - zeta) * 0.5 * np.trace(d) * np.eye(2)
