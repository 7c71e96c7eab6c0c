"""Homogeneous bivariate polynomials ``V(x) = sum_j c_j x1^(d-j) x2^j``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def unit_circle(n: int, offset: float = 0.0):
    theta = offset + 2.0 * math.pi * np.arange(n) / n
    return np.stack([np.cos(theta), np.sin(theta)], axis=1)


def binomial_scale(d: int):
    """sqrt(binom(d, j)); with it the monomial basis has unit sum of squares on the circle."""
    return np.sqrt(np.array([math.comb(d, j) for j in range(d + 1)], dtype=float))


def monomials(x, d: int):
    """Rows x1^(d-j) x2^j for j = 0..d; ``x`` has shape (n, 2)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    j = np.arange(d + 1)
    return x[:, :1] ** (d - j) * x[:, 1:2] ** j


def monomial_gradients(x, d: int):
    """Partial derivatives of every monomial, each of shape (n, d + 1)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    j = np.arange(d + 1)
    x1, x2 = x[:, :1], x[:, 1:2]
    d1 = (d - j) * x1 ** np.maximum(d - j - 1, 0) * x2 ** j
    d2 = j * x1 ** (d - j) * x2 ** np.maximum(j - 1, 0)
    return d1, d2


def decrease_rows(x, d: int, field):
    """Rows r with r . c = grad V(x) . D x for the coefficient vector c."""
    d1, d2 = monomial_gradients(x, d)
    v = np.atleast_2d(x) @ np.asarray(field, dtype=float).T
    return d1 * v[:, :1] + d2 * v[:, 1:2]


@dataclass(frozen=True)
class HomogeneousPolynomial:
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float).ravel())

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_2d(x)
        out = monomials(flat, self.degree) @ self.coeffs
        return out if x.ndim > 1 else float(out[0])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        flat = np.atleast_2d(x)
        d1, d2 = monomial_gradients(flat, self.degree)
        g = np.stack([d1 @ self.coeffs, d2 @ self.coeffs], axis=1)
        return g if x.ndim > 1 else g[0]

    def decrease(self, x, field):
        """grad V(x) . D x."""
        return decrease_rows(x, self.degree, field) @ self.coeffs
