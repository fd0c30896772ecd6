from .BaseObject import BaseObject
from .PathEnsemble import PathEnsemble


class ValueEstimate(BaseObject):
    """A resolvent or semigroup value with the optimizer's diagnostics.

    ``value`` is the best payoff found; the truncated tail contributes at
    most ``tail_bound`` on top of it. Continuum values are lower bounds on
    the supremum over all measure paths (``lower_bound`` is set).
    """

    _field_types = {
        "value": {"data_type": float, "required": True},
        "T_max": {"data_type": float, "required": True},
        "tail_bound": {"data_type": float, "required": True},
        "knots": {"data_type": int},
        "restarts": {"data_type": int},
        "refinements": {"data_type": int},
        "iterations": {"data_type": int},
        "converged": {"data_type": bool, "required": True},
        "level": {"data_type": str, "allowed_values": ["particle", "continuum"]},
        "lower_bound": {"data_type": bool},
        "path": {"data_type": PathEnsemble},
    }

    def __init__(self, _data=None, _validate=True, **kwargs):
        super().__init__(_data=_data, _validate=_validate, **kwargs)
        if _validate and self.tail_bound < 0:
            raise ValueError("ValueEstimate.tail_bound must be non-negative")

    @classmethod
    def from_dict(cls, data, _copy=True, _validate=True):
        data = dict(data)
        if isinstance(data.get("path"), dict):
            data["path"] = PathEnsemble.from_dict(data["path"], _copy=_copy, _validate=_validate)
        return super().from_dict(data, _copy=_copy, _validate=_validate)

    @property
    def value(self):
        return self._data["value"]

    @property
    def T_max(self):
        return self._data["T_max"]

    @property
    def tail_bound(self):
        return self._data["tail_bound"]

    @property
    def knots(self):
        return self._data.get("knots")

    @property
    def restarts(self):
        return self._data.get("restarts")

    @property
    def refinements(self):
        return self._data.get("refinements", 0)

    @property
    def iterations(self):
        return self._data.get("iterations")

    @property
    def converged(self):
        return self._data["converged"]

    @property
    def level(self):
        return self._data.get("level", "particle")

    @property
    def lower_bound(self):
        return bool(self._data.get("lower_bound", False))

    @property
    def path(self):
        return self._data.get("path")

    def __float__(self):
        return float(self.value)
