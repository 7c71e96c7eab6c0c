"""Numerical tolerances and defaults shared across modules.

The values live in a single mutable :data:`settings` object so that the CLI can
apply a JSON config file once at start-up. Library code reads the attributes at
call time; nothing writes to them except :func:`override`.
"""

from __future__ import annotations

import contextlib
import dataclasses
import json
from pathlib import Path

from .errors import InvalidInput


@dataclasses.dataclass
class Settings:
    # core2d
    tol_commute: float = 1e-10
    tol_eig: float = 1e-9
    tol_eigvec: float = 1e-9
    # classifier
    boundary_tol: float = 1e-9
    # worst_trajectory
    angle_step: float = 3.141592653589793 / 720
    event_tol: float = 1e-12
    # value_function
    n_theta: int = 2048
    fixed_point_tol: float = 1e-10
    max_iters: int = 200
    curvature_tol: float = 1e-8
    # clf_synthesis
    n_points: int = 64
    check_samples: int = 1440
    fine_samples: int = 4096
    p_cap: int = 2**14
    margin_rel: float = 1e-8
    det_directions: int = 720
    # degree_scan
    n_samples: int = 720
    epsilon: float = 1e-6
    verify_factor: int = 4
    lp_tol: float = 1e-9
    lp_max_iter: int = 50_000
    # simulator
    mean_dwell: float = 0.2


settings = Settings()


def _coerce(name, value):
    field_type = type(getattr(Settings(), name))
    try:
        return field_type(value)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(f"config key {name!r}: cannot use {value!r}") from exc


def apply(overrides: dict) -> None:
    known = {f.name for f in dataclasses.fields(Settings)}
    for key, value in overrides.items():
        if key not in known:
            raise InvalidInput(f"unknown config key {key!r}")
        setattr(settings, key, _coerce(key, value))


@contextlib.contextmanager
def override(**overrides):
    """Temporarily change settings (tests and CLI)."""
    saved = dataclasses.asdict(settings)
    try:
        apply(overrides)
        yield settings
    finally:
        apply(saved)


def load_file(path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInput("config file must hold a JSON object")
    return data
