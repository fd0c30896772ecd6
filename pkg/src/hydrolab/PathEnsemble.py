import numpy as np

from .BaseObject import BaseObject


class PathEnsemble(BaseObject):
    """Piecewise-linear paths of N particles through knots t_0 < … < t_M.

    ``positions`` has shape (M+1, N, d); the velocity on interval k is
    constant. ``action`` and ``payoff`` are filled in by the solvers that
    produced the path.
    """

    _field_types = {
        "knots": {"data_type": np.ndarray, "required": True},
        "positions": {"data_type": np.ndarray, "required": True},
        "action": {"data_type": float},
        "payoff": {"data_type": float},
    }
    _array_fields = ("knots", "positions")

    def __init__(self, knots=None, positions=None, action=None, payoff=None, _data=None, _validate=True):
        if _data is None:
            _data = {
                "knots": knots,
                "positions": positions,
                "action": None if action is None else float(action),
                "payoff": None if payoff is None else float(payoff),
            }
        super().__init__(_data=_data, _validate=_validate)
        if _validate:
            if self.knots.ndim != 1 or len(self.knots) < 2:
                raise ValueError("PathEnsemble needs at least two knots")
            if not np.all(np.diff(self.knots) > 0):
                raise ValueError("PathEnsemble.knots must be strictly increasing")
            if self.positions.ndim != 3 or self.positions.shape[0] != len(self.knots):
                raise ValueError(
                    f"PathEnsemble.positions must have shape ({len(self.knots)}, N, d), "
                    f"got {self.positions.shape}"
                )

    @classmethod
    def straight(cls, x0, x1, knots):
        """The straight-line path from x0 to x1 through ``knots``."""
        knots = np.asarray(knots, dtype=float)
        s = (knots - knots[0]) / (knots[-1] - knots[0])
        x0 = np.asarray(x0, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        positions = (1.0 - s)[:, None, None] * x0[None] + s[:, None, None] * x1[None]
        return cls(knots=knots, positions=positions)

    @classmethod
    def resting(cls, x, knots):
        knots = np.asarray(knots, dtype=float)
        x = np.asarray(x, dtype=float)
        return cls(knots=knots, positions=np.broadcast_to(x, (len(knots),) + x.shape))

    @property
    def knots(self):
        return self._data["knots"]

    @property
    def positions(self):
        return self._data["positions"]

    @property
    def action(self):
        return self._data.get("action")

    @property
    def payoff(self):
        return self._data.get("payoff")

    @property
    def M(self):
        return len(self.knots) - 1

    @property
    def duration(self):
        return float(self.knots[-1] - self.knots[0])

    def velocities(self):
        """Per-interval velocities, shape (M, N, d)."""
        dt = np.diff(self.knots)
        return np.diff(self.positions, axis=0) / dt[:, None, None]

    def at(self, t):
        """Positions at time ``t`` by linear interpolation (clamped to the ends)."""
        t = float(np.clip(t, self.knots[0], self.knots[-1]))
        k = int(np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, self.M - 1))
        s = (t - self.knots[k]) / (self.knots[k + 1] - self.knots[k])
        return (1.0 - s) * self.positions[k] + s * self.positions[k + 1]

    def resample(self, knots):
        """The same path evaluated at new knots (exact where knots are nested)."""
        knots = np.asarray(knots, dtype=float)
        return PathEnsemble(knots=knots, positions=np.array([self.at(t) for t in knots]))

    def with_positions(self, positions, **results):
        return PathEnsemble(knots=self.knots, positions=positions, **results)

    def permuted(self, order):
        return PathEnsemble(knots=self.knots, positions=self.positions[:, np.asarray(order)])
