"""Synthetic point clouds concentrated around simple curves."""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError
from .rng import stream

KINDS = ("circle", "spiral", "cross", "banana", "segment")


def _uniform_on_polyline(P: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    seg = np.linalg.norm(np.diff(P, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    t = rng.uniform(0.0, s[-1], n)
    return np.column_stack([np.interp(t, s, P[:, k]) for k in range(P.shape[1])])


def _curve_points(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "circle":
        th = rng.uniform(0.0, 2 * np.pi, n)
        return np.column_stack([np.cos(th), np.sin(th)])
    if kind == "spiral":
        th = np.linspace(np.pi / 2, 4 * np.pi, 4000)
        r = 0.25 * th / np.pi
        return _uniform_on_polyline(np.column_stack([r * np.cos(th), r * np.sin(th)]), n, rng)
    if kind == "cross":
        arm = rng.integers(0, 2, n)
        t = rng.uniform(-1.0, 1.0, n)
        return np.where(arm[:, None] == 0, np.column_stack([t, np.zeros(n)]), np.column_stack([np.zeros(n), t]))
    if kind == "banana":
        x = np.linspace(-1.0, 1.0, 4001)
        return _uniform_on_polyline(np.column_stack([x, x * x]), n, rng)
    if kind == "segment":
        return np.column_stack([rng.uniform(-1.0, 1.0, n), np.zeros(n)])
    raise InvalidInputError(f"unknown synthetic kind {kind!r}; choose from {', '.join(KINDS)}")


def make_points(kind: str, n: int, noise: float = 0.1, seed: int = 0) -> np.ndarray:
    """n points near the named curve plus isotropic Gaussian noise of sd ``noise``."""
    if kind not in KINDS:
        raise InvalidInputError(f"unknown synthetic kind {kind!r}; choose from {', '.join(KINDS)}")
    if n < 10:
        raise InvalidInputError("synthetic samples need n >= 10")
    if noise < 0:
        raise InvalidInputError("noise must be non-negative")
    rng = stream(seed, "synth")
    P = _curve_points(kind, int(n), rng)
    return P + noise * rng.standard_normal(P.shape)
