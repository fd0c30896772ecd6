import numpy as np

from .BaseObject import BaseObject


class EmpiricalMeasure(BaseObject):
    """N equally weighted atoms in R^d."""

    _field_types = {
        "atoms": {"data_type": np.ndarray, "required": True},
    }
    _array_fields = ("atoms",)

    def __init__(self, atoms=None, _data=None, _validate=True):
        if _data is None:
            _data = {"atoms": atoms}
        else:
            _data = dict(_data)
        atoms = np.asarray(_data["atoms"], dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        _data["atoms"] = atoms
        super().__init__(_data=_data, _validate=_validate)
        if _validate:
            if self.atoms.ndim != 2 or len(self.atoms) < 1:
                raise ValueError(
                    f"EmpiricalMeasure.atoms must be a non-empty N×d array, got shape {self.atoms.shape}"
                )
            if not np.all(np.isfinite(self.atoms)):
                raise ValueError("EmpiricalMeasure.atoms must be finite")

    @property
    def atoms(self):
        return self._data["atoms"]

    @property
    def N(self):
        return self.atoms.shape[0]

    @property
    def dimension(self):
        return self.atoms.shape[1]

    def permuted(self, order):
        """The same measure with atoms listed in ``order``."""
        return EmpiricalMeasure(self.atoms[np.asarray(order)])

    def mean(self):
        return np.mean(self.atoms, axis=0)

    def second_moment(self):
        """∫|x|² dρ."""
        return float(np.mean(np.sum(np.square(self.atoms), axis=-1)))

    def __len__(self):
        return self.N
