from .BaseObject import BaseObject


class OperatorValue(BaseObject):
    """One Hamiltonian-operator value and the matchings that realize it.

    ``plans`` lists, per anchor, the optimal permutation chosen by the
    extremum; ``candidates`` counts the combinations of optimal matchings
    that were compared. ``unique`` is set when every anchor has a single
    optimal matching.
    """

    _field_types = {
        "operator": {"data_type": str, "required": True},
        "value": {"data_type": float, "required": True},
        "plans": {"data_type": list},
        "candidates": {"data_type": int},
        "unique": {"data_type": bool, "required": True},
    }

    @property
    def operator(self):
        return self._data["operator"]

    @property
    def value(self):
        return self._data["value"]

    @property
    def plans(self):
        return self._data.get("plans")

    @property
    def candidates(self):
        return self._data.get("candidates", 1)

    @property
    def unique(self):
        return self._data["unique"]

    def __float__(self):
        return float(self.value)
