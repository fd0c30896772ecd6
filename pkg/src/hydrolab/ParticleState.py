import numpy as np

from .BaseObject import BaseObject


class ParticleState(BaseObject):
    """Positions and momenta of N particles at time ``t`` for scale ``eps``."""

    _field_types = {
        "t": {"data_type": float, "required": True},
        "x": {"data_type": np.ndarray, "required": True},
        "P": {"data_type": np.ndarray, "required": True},
        "eps": {"data_type": float, "required": True},
    }
    _array_fields = ("x", "P")

    def __init__(self, t=0.0, x=None, P=None, eps=1.0, _data=None, _validate=True):
        if _data is None:
            _data = {"t": float(t), "x": x, "P": P, "eps": float(eps)}
        super().__init__(_data=_data, _validate=_validate)
        if _validate:
            if self.x.shape != self.P.shape or self.x.ndim != 2:
                raise ValueError(
                    f"ParticleState.x and P must be N×d arrays of one shape, "
                    f"got {self.x.shape} and {self.P.shape}"
                )
            if not self.eps > 0:
                raise ValueError("ParticleState.eps must be positive")
            if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.P))):
                raise ValueError("ParticleState arrays must be finite")

    @property
    def t(self):
        return self._data["t"]

    @property
    def x(self):
        return self._data["x"]

    @property
    def P(self):
        return self._data["P"]

    @property
    def eps(self):
        return self._data["eps"]

    @property
    def N(self):
        return self.x.shape[0]

    def permuted(self, order):
        order = np.asarray(order)
        return ParticleState(t=self.t, x=self.x[order], P=self.P[order], eps=self.eps)
