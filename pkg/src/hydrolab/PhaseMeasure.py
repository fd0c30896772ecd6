import numpy as np

from .BaseObject import BaseObject, InvalidInputError


class PhaseMeasure(BaseObject):
    """Atoms with one velocity each: ν(dx, dv) = (1/N) Σ δ_{x_i} ⊗ δ_{v_i}."""

    _field_types = {
        "atoms": {"data_type": np.ndarray, "required": True},
        "velocities": {"data_type": np.ndarray, "required": True},
    }
    _array_fields = ("atoms", "velocities")

    def __init__(self, atoms=None, velocities=None, _data=None, _validate=True):
        if _data is None:
            _data = {"atoms": atoms, "velocities": velocities}
        super().__init__(_data=_data, _validate=_validate)
        if _validate and self.atoms.shape != self.velocities.shape:
            raise ValueError(
                f"PhaseMeasure atoms {self.atoms.shape} and velocities "
                f"{self.velocities.shape} must have the same shape"
            )

    @property
    def atoms(self):
        return self._data["atoms"]

    @property
    def velocities(self):
        return self._data["velocities"]

    @property
    def N(self):
        return self.atoms.shape[0]

    def norm2(self):
        """‖ν‖²_ρ = (1/N) Σ |v_i|²."""
        return float(np.mean(np.sum(np.square(self.velocities), axis=-1)))


class MultiPhaseMeasure(BaseObject):
    """Atoms carrying a weighted list of velocities each.

    ``velocities[i]`` is a (k_i, d) array and ``weights[i]`` its k_i
    nonnegative weights; weights are relative to the atom's mass 1/N.
    """

    _field_types = {
        "atoms": {"data_type": np.ndarray, "required": True},
        "velocities": {"data_type": list, "required": True},
        "weights": {"data_type": list},
    }
    _array_fields = ("atoms",)

    def __init__(self, atoms=None, velocities=None, weights=None, _data=None, _validate=True):
        if _data is None:
            _data = {"atoms": atoms, "velocities": velocities, "weights": weights}
        _data = dict(_data)
        atoms = np.asarray(_data["atoms"], dtype=float)
        n, d = atoms.shape
        velocities = [np.asarray(v, dtype=float).reshape(-1, d) for v in _data["velocities"]]
        if len(velocities) != n:
            raise InvalidInputError(f"need one velocity list per atom, got {len(velocities)} for {n}")
        weights = _data.get("weights")
        if weights is None:
            weights = [np.full(len(v), 1.0 / max(len(v), 1)) for v in velocities]
        weights = [np.asarray(w, dtype=float) for w in weights]
        for i, (v, w) in enumerate(zip(velocities, weights)):
            if len(v) == 0:
                raise InvalidInputError(f"atom {i} has an empty velocity list")
            if w.shape != (len(v),) or np.any(w < 0) or not w.sum() > 0:
                raise InvalidInputError(f"atom {i} needs {len(v)} nonnegative weights with positive sum")
        _data.update(atoms=atoms, velocities=velocities, weights=weights)
        super().__init__(_data=_data, _validate=_validate)

    @property
    def atoms(self):
        return self._data["atoms"]

    @property
    def velocities(self):
        return self._data["velocities"]

    @property
    def weights(self):
        return self._data["weights"]

    def kinetic_energy(self):
        """(1/N) Σ_i Σ_k w_ik |v_ik|² with weights normalized per atom."""
        per_atom = [
            float(w @ np.sum(np.square(v), axis=-1) / w.sum())
            for v, w in zip(self.velocities, self.weights)
        ]
        return float(np.mean(per_atom))
