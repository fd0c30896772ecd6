import numpy as np

from .BaseObject import BaseObject
from .ParticleState import ParticleState


class Trajectory(BaseObject):
    """Recorded states of an integration run.

    ``x`` and ``P`` have shape (K, N, d) for K recorded times; ``energy``
    holds H_N at each of them. ``symplectic`` is False when the run used
    the explicit fourth-order fallback.
    """

    _field_types = {
        "times": {"data_type": np.ndarray, "required": True},
        "x": {"data_type": np.ndarray, "required": True},
        "P": {"data_type": np.ndarray, "required": True},
        "energy": {"data_type": np.ndarray, "required": True},
        "eps": {"data_type": float, "required": True},
        "symplectic": {"data_type": bool, "required": True},
    }
    _array_fields = ("times", "x", "P", "energy")

    @property
    def times(self):
        return self._data["times"]

    @property
    def x(self):
        return self._data["x"]

    @property
    def P(self):
        return self._data["P"]

    @property
    def energy(self):
        return self._data["energy"]

    @property
    def eps(self):
        return self._data["eps"]

    @property
    def symplectic(self):
        return self._data["symplectic"]

    def __len__(self):
        return len(self.times)

    def __getitem__(self, k):
        return ParticleState(t=float(self.times[k]), x=self.x[k], P=self.P[k], eps=self.eps)

    @property
    def final(self):
        return self[len(self) - 1]

    def relative_drift(self):
        """max_k |H_N(k) − H_N(0)| / max(|H_N(0)|, 1e-300)."""
        e0 = self.energy[0]
        return float(np.max(np.abs(self.energy - e0)) / max(abs(e0), 1e-300))
