import logging

import numpy as np

from .BaseObject import BaseObject, InvalidModelError
from .potentials import CONFINEMENTS, INTERACTIONS, parse_potential

logger = logging.getLogger(__name__)


class MacroPotentials(BaseObject):
    """Confinement U and pair interaction V acting on the macroscopic scale."""

    _field_types = {
        "U": {"data_type": (dict, str)},
        "V": {"data_type": (dict, str)},
    }

    def __init__(self, U=None, V=None, _data=None, _validate=True):
        if _data is None:
            _data = {"U": U or {"kind": "zero"}, "V": V or {"kind": "zero"}}
        super().__init__(_data=_data, _validate=_validate)
        u_kind, confinement = parse_potential(self._data.get("U"), CONFINEMENTS)
        v_kind, interaction = parse_potential(self._data.get("V"), INTERACTIONS)
        object.__setattr__(self, "_U", confinement)
        object.__setattr__(self, "_V", interaction)
        object.__setattr__(self, "_kinds", (u_kind, v_kind))
        if _validate:
            self.check_invariants()

    @property
    def is_free(self):
        return self._kinds == ("zero", "zero")

    @property
    def has_interaction(self):
        return self._kinds[1] != "zero"

    def U(self, x):
        return self._U(x)

    def grad_U(self, x):
        return self._U.gradient(x)

    def V(self, z):
        return self._V(z)

    def grad_V(self, z):
        return self._V.gradient(z)

    @property
    def inf_U(self):
        return float(self._U.minimum)

    @property
    def inf_V(self):
        return float(self._V.minimum)

    @property
    def sup_V(self):
        return float(self._V.bound)

    def envelope(self, r):
        """The sub-linear growth envelope β with 0 ≤ U(x) ≤ β(|x|)."""
        return self._U.envelope(r)

    def interaction(self, x, sources=None):
        """(V * ρ)(x_i) = (1/N) Σ_j V(x_i − y_j) for the empirical ρ of ``sources``.

        ``sources`` defaults to ``x`` itself (self term included). Row sums
        are taken over sorted terms so that the result does not depend on
        the order of the sources.
        """
        x = np.asarray(x, dtype=float)
        y = x if sources is None else np.asarray(sources, dtype=float)
        if not self.has_interaction:
            return np.zeros(x.shape[:-1])
        terms = self.V(x[..., :, None, :] - y[..., None, :, :])
        return np.sort(terms, axis=-1).sum(axis=-1) / y.shape[-2]

    def interaction_gradient(self, x):
        """(1/N) Σ_j ∇V(x_i − x_j) per particle, for configurations (..., N, d)."""
        x = np.asarray(x, dtype=float)
        if not self.has_interaction:
            return np.zeros_like(x)
        terms = self.grad_V(x[..., :, None, :] - x[..., None, :, :])
        return np.sort(terms, axis=-2).sum(axis=-2) / x.shape[-2]

    def potential_energy(self, x):
        """⟨U + V*ρ, ρ⟩ for the empirical measure of ``x``."""
        x = np.asarray(x, dtype=float)
        per_atom = self.U(x) + self.interaction(x)
        return float(np.sort(per_atom).sum() / len(x))

    def check_invariants(self, dimension=1, tol=1e-12):
        """Sampled checks: U ≥ 0 below its envelope, V even and bounded."""
        rng = np.random.default_rng(1)
        for d in sorted({1, dimension}):
            x = rng.normal(scale=3.0, size=(200, d))
            u = self.U(x)
            if np.any(u < -tol):
                raise InvalidModelError("confinement U must be nonnegative")
            if np.any(u > self.envelope(np.linalg.norm(x, axis=-1)) + tol):
                raise InvalidModelError("confinement U exceeds its growth envelope")
            v = self.V(x)
            if np.any(np.abs(v - self.V(-x)) > tol):
                raise InvalidModelError("interaction V must be even")
            if np.any(np.abs(v) > self.sup_V + tol):
                raise InvalidModelError("interaction V exceeds its bound")
