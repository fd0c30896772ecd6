import numpy as np

from .BaseObject import BaseObject


class Plan(BaseObject):
    """A transport plan between two N-atom measures.

    In ``matching`` mode atom i is sent to atom ``permutation[i]``; in
    ``matrix`` mode ``matrix`` is a doubly-stochastic coupling with rows and
    columns summing to 1/N. ``cost`` is the averaged cost Σ|x_i − y_j|^p π_ij.
    """

    _field_types = {
        "mode": {"data_type": str, "allowed_values": ["matching", "matrix"], "required": True},
        "permutation": {"data_type": list},
        "matrix": {"data_type": np.ndarray},
        "cost": {"data_type": float, "required": True},
        "p": {"data_type": float, "required": True},
    }
    _array_fields = ("matrix",)

    def __init__(
        self, mode="matching", permutation=None, matrix=None, cost=0.0, p=2.0, _data=None, _validate=True
    ):
        if _data is None:
            _data = {
                "mode": mode,
                "permutation": None if permutation is None else [int(j) for j in permutation],
                "matrix": matrix,
                "cost": float(cost),
                "p": float(p),
            }
        super().__init__(_data=_data, _validate=_validate)
        if _validate:
            if self.mode == "matching" and self.permutation is None:
                raise ValueError("Plan.permutation is required in matching mode")
            if self.mode == "matrix":
                if self.matrix is None:
                    raise ValueError("Plan.matrix is required in matrix mode")
                n = self.matrix.shape[0]
                if not (
                    np.allclose(self.matrix.sum(axis=0), 1.0 / n, atol=1e-9)
                    and np.allclose(self.matrix.sum(axis=1), 1.0 / n, atol=1e-9)
                ):
                    raise ValueError("Plan.matrix rows and columns must sum to 1/N")

    @property
    def mode(self):
        return self._data["mode"]

    @property
    def permutation(self):
        perm = self._data.get("permutation")
        return None if perm is None else np.array(perm, dtype=np.int64)

    @property
    def matrix(self):
        return self._data.get("matrix")

    @property
    def cost(self):
        return self._data["cost"]

    @property
    def p(self):
        return self._data["p"]

    @property
    def distance(self):
        return max(self.cost, 0.0) ** (1.0 / self.p)
