"""Closed-form potentials, looked up by kind name.

Periodic potentials act on points of the unit torus (shape ``(..., d)``),
macroscopic ones on points of R^d. Every potential maps an array of points
to an array of values (one per point) and provides its gradient.
"""

import logging
from typing import Tuple

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from hydrolab.BaseObject import InvalidModelError

logger = logging.getLogger(__name__)


def _norm(x):
    return np.sqrt(np.sum(np.square(x), axis=-1))


class ZeroPotential:
    def __init__(self, **params):
        pass

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1])

    def gradient(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    bound = 0.0
    minimum = 0.0

    def envelope(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))


class Sin2Potential:
    """a · mean_i sin²(π q_i); in one dimension this is a·sin²(πq)."""

    def __init__(self, amplitude=1.0, **params):
        self.amplitude = float(amplitude)
        self.bound = abs(self.amplitude)
        self.minimum = min(0.0, self.amplitude)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return self.amplitude * np.mean(np.sin(np.pi * q) ** 2, axis=-1)

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        d = q.shape[-1]
        return self.amplitude * np.pi * np.sin(2 * np.pi * q) / d


class CosinePotential:
    """a · mean_i (1 − cos 2π(q_i − φ)) / 2."""

    def __init__(self, amplitude=1.0, phase=0.0, **params):
        self.amplitude = float(amplitude)
        self.phase = float(phase)
        self.bound = abs(self.amplitude)
        self.minimum = min(0.0, self.amplitude)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return self.amplitude * np.mean(
            0.5 * (1.0 - np.cos(2 * np.pi * (q - self.phase))), axis=-1
        )

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        d = q.shape[-1]
        return self.amplitude * np.pi * np.sin(2 * np.pi * (q - self.phase)) / d


class GridPotential:
    """Uniform samples over one period, linearly interpolated with wrap-around.

    ``values`` has one axis per dimension; sample ``j`` sits at ``j / n``.
    """

    def __init__(self, values=None, **params):
        if values is None:
            raise InvalidModelError("grid potential needs 'values'")
        values = np.asarray(values, dtype=float)
        if values.ndim == 0 or not np.all(np.isfinite(values)):
            raise InvalidModelError("grid potential values must be a finite array")
        self.values = values
        axes = []
        padded = values
        for axis, n in enumerate(values.shape):
            axes.append(np.arange(n + 1) / n)
            first = np.take(padded, [0], axis=axis)
            padded = np.concatenate([padded, first], axis=axis)
        self._interp = RegularGridInterpolator(tuple(axes), padded, method="linear")
        self._spacing = np.array([1.0 / n for n in values.shape])
        self.bound = float(np.max(np.abs(values)))
        self.minimum = float(np.min(values))

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return self._interp(np.mod(q, 1.0))

    def gradient(self, q):
        q = np.asarray(q, dtype=float)
        grad = np.empty_like(q)
        for i, h in enumerate(self._spacing):
            step = np.zeros(q.shape[-1])
            step[i] = 0.5 * h
            grad[..., i] = (self(q + step) - self(q - step)) / h
        return grad


class LogConfinement:
    """U(x) = u₀ · log(1 + |x|), with sub-linear envelope β(r) = u₀ · log(1 + r)."""

    def __init__(self, u0=1.0, **params):
        self.u0 = float(u0)
        if self.u0 < 0:
            raise InvalidModelError("log confinement needs u0 >= 0")
        self.minimum = 0.0
        self.bound = np.inf

    def __call__(self, x):
        return self.u0 * np.log1p(_norm(np.asarray(x, dtype=float)))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = _norm(x)[..., None]
        with np.errstate(invalid="ignore", divide="ignore"):
            g = np.where(r > 0, x / (r * (1.0 + r)), 0.0)
        return self.u0 * g

    def envelope(self, r):
        return self.u0 * np.log1p(np.asarray(r, dtype=float))


class GaussianInteraction:
    """V(x) = v₀ · exp(−|x|²); even and bounded by |v₀|."""

    def __init__(self, v0=1.0, **params):
        self.v0 = float(v0)
        self.bound = abs(self.v0)
        self.minimum = min(0.0, self.v0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.v0 * np.exp(-np.sum(np.square(x), axis=-1))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return -2.0 * x * self(x)[..., None]


PERIODIC_POTENTIALS = {
    "zero": ZeroPotential,
    "sin2": Sin2Potential,
    "cosine": CosinePotential,
    "grid": GridPotential,
}

CONFINEMENTS = {
    "zero": ZeroPotential,
    "log": LogConfinement,
}

INTERACTIONS = {
    "zero": ZeroPotential,
    "gaussian": GaussianInteraction,
}


def parse_potential(given, registry=PERIODIC_POTENTIALS) -> Tuple[str, object]:
    """Build a potential from ``{"kind": name, **params}`` (or a bare name)."""
    if given is None:
        given = {"kind": "zero"}
    if isinstance(given, str):
        given = {"kind": given}
    params = dict(given)
    kind = params.pop("kind", "zero")
    if kind not in registry:
        raise InvalidModelError(
            f"Unknown potential kind {kind!r}, expected one of {sorted(registry)}"
        )
    return kind, registry[kind](**params)
