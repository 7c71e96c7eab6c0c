import math

import numpy as np
import pytest

from switchstab.errors import InvalidInput, NotGUES
from switchstab.io import csv_text
from switchstab.sampling import sample_subcase
from switchstab.value_function import (AngularFunction, decrease_rates, is_strictly_convex,
                                       decrease_constants, level_gradient, level_point,
                                       lyapunov_form, smooth_gradient, solve_value,
                                       turning_ratio, value_iterates)

SPIRAL = np.array([[-1.0, -1.0], [1.0, -1.0]])
GUES_SUBCASES = ["CC.1", "CC.2.2", "RC.1", "RC.2.2.A", "RC.2.2.B", "RR.1", "RR.2.2.A",
                 "RR.2.2.B"]


def _unit(theta):
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


@pytest.fixture(scope="module")
def gues_values():
    rng = np.random.default_rng(11)
    out = {}
    for subcase in GUES_SUBCASES:
        params, a, b, v = sample_subcase(subcase, rng, gues_only=True)
        out[subcase] = (a, b, solve_value(a, b, 1024))
    return out


def test_scalar_decay_gives_half():
    v = solve_value(-np.eye(2), -np.eye(2), 256)
    assert np.allclose(v.values, 0.5, atol=1e-12)


@pytest.mark.parametrize("d", [SPIRAL, np.array([[-1.0, 3.0], [0.0, -2.0]]),
                               np.array([[-0.2, -4.0], [1.0, -0.3]])])
def test_single_field_matches_lyapunov(d):
    v = solve_value(d, d, 2048)
    p = lyapunov_form(d)
    e = _unit(v.grid)
    assert np.allclose(v.values, np.einsum("ni,ij,nj->n", e, p, e), atol=1e-4)


def test_single_field_gradient_matches_quadratic_gauge():
    d = np.array([[-1.0, 3.0], [0.0, -2.0]])
    v = solve_value(d, d, 2048)
    p = lyapunov_form(d)
    theta = np.linspace(0, 2 * math.pi, 97)[:-1] + 0.01
    y = _unit(theta) / np.sqrt(np.einsum("ni,ij,nj->n", _unit(theta), p, _unit(theta)))[:, None]
    exact = y @ p  # gradient of sqrt(x^T P x) at a point with x^T P x = 1
    assert np.max(np.abs(smooth_gradient(v, theta) - exact)) < 1e-6


def test_circle_gradient_is_radial():
    v = AngularFunction.from_function(lambda t: 0.5, 720)
    theta = np.linspace(0, 2 * math.pi, 50, endpoint=False) + 0.003
    y = level_point(v, theta)
    g = level_gradient(v, theta)
    assert np.allclose(np.linalg.norm(y, axis=1), math.sqrt(2), rtol=1e-4)
    assert np.allclose(g / np.linalg.norm(g, axis=1)[:, None], y / np.linalg.norm(y, axis=1)[:, None],
                       atol=1e-2)


@pytest.mark.parametrize("subcase", GUES_SUBCASES)
def test_value_invariants(subcase, gues_values):
    a, b, v = gues_values[subcase]
    assert np.all(v.values > 0)
    half = len(v.grid) // 2
    assert np.allclose(v.values, np.roll(v.values, half), rtol=1e-9)
    assert v(v.grid[0]) == pytest.approx(v(v.grid[0] + 2 * math.pi), rel=1e-12)
    # a constant signal is one admissible choice, so v dominates both Lyapunov costs
    e = _unit(v.grid)
    for d in (a, b):
        assert np.all(v.values >= np.einsum("ni,ij,nj->n", e, lyapunov_form(d), e) * (1 - 1e-9))


@pytest.mark.parametrize("subcase", GUES_SUBCASES)
def test_euler_identity(subcase, gues_values):
    a, b, v = gues_values[subcase]
    theta = 2 * math.pi * np.arange(720) / 720 + 1e-4
    y = level_point(v, theta)
    g = level_gradient(v, theta)
    assert np.max(np.abs(np.einsum("ni,ni->n", g, y) - 1)) <= 1e-8


@pytest.mark.parametrize("subcase", GUES_SUBCASES)
def test_decrease_and_convexity(subcase, gues_values):
    a, b, v = gues_values[subcase]
    assert np.all(decrease_rates(v, a, b) < 0)
    m, k = decrease_constants(v, a, b)
    assert 0 < m <= k
    assert is_strictly_convex(v)
    assert np.all(turning_ratio(v) > 0)


def test_iterates_are_monotone_and_bounded(gues_values):
    a, b, _ = gues_values["CC.2.2"]
    v = solve_value(a, b, 256)
    iterates = value_iterates(a, b, 200, 256)
    for lo, hi in zip(iterates, iterates[1:]):
        assert np.all(hi >= lo - 1e-15)
    assert np.all(iterates[-1] <= v.values * (1 + 1e-9))


@pytest.mark.parametrize("subcase", ["CC.2.2", "RC.2.2.B", "RR.2.2.B"])
def test_grid_refinement(subcase, gues_values):
    a, b, _ = gues_values[subcase]
    vs = [solve_value(a, b, n).values for n in (256, 512, 1024, 2048)]
    gaps = []
    for coarse, fine in zip(vs, vs[1:]):
        shared = fine[::2]
        # a finer grid admits every coarse switching signal
        assert np.all(shared >= coarse * (1 - 1e-10))
        gaps.append(np.max(shared - coarse) / np.max(fine))
    assert gaps[-1] < 1e-3
    assert gaps[-1] <= max(gaps[0] * 1.01, 1e-12)


def test_rejects_non_gues_and_tiny_grid():
    params, a, b, v = sample_subcase("CC.2.1", np.random.default_rng(0))
    with pytest.raises(NotGUES):
        solve_value(a, b, 256)
    with pytest.raises(InvalidInput):
        solve_value(SPIRAL, SPIRAL, 4)


def test_csv_rows(gues_values):
    _, _, v = gues_values["CC.1"]
    text = csv_text(["theta", "v", "r"], v.rows())
    lines = text.splitlines()
    assert lines[0] == "theta,v,r" and len(lines) == len(v.grid) + 1
    t, val, r = map(float, lines[5].split(","))
    assert r == pytest.approx(1 / math.sqrt(val)) and t == v.grid[4]
