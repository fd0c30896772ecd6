import itertools

import numpy as np

from .BaseObject import BaseObject, UnsupportedError


def wavevectors(dimension, modes):
    """Integer wave vectors k with max|k_i| ≤ modes, one from each ±k pair.

    The zero vector is excluded, so correctors built on them have zero mean.
    """
    if dimension == 1:
        return np.arange(1, modes + 1, dtype=float)[:, None]
    if dimension == 2:
        ks = [
            k
            for k in itertools.product(range(-modes, modes + 1), repeat=2)
            if k > (0, 0)
        ]
        return np.array(ks, dtype=float).reshape(-1, 2)
    raise UnsupportedError(f"correctors are supported for d <= 2, got d={dimension}")


def gradient_basis(q, kvecs):
    """∂∇φ/∂coefficients at points q: an array of shape (n, 2m, d).

    ``∇φ(q) = basis @ coefficients`` along the middle axis.
    """
    q = np.asarray(q, dtype=float).reshape(-1, kvecs.shape[1])
    phase = 2 * np.pi * q @ kvecs.T
    cos_part = -np.sin(phase)[:, :, None] * kvecs[None, :, :]
    sin_part = np.cos(phase)[:, :, None] * kvecs[None, :, :]
    return 2 * np.pi * np.concatenate([cos_part, sin_part], axis=1)


class Corrector(BaseObject):
    """A trigonometric corrector φ(q) = Σ_k a_k cos(2πk·q) + b_k sin(2πk·q).

    ``coefficients`` stores all cosine amplitudes followed by all sine
    amplitudes, in the order of :func:`wavevectors`.
    """

    _field_types = {
        "P": {"data_type": list, "required": True},
        "modes": {"data_type": int, "required": True},
        "coefficients": {"data_type": np.ndarray, "required": True},
        "sup_value": {"data_type": float},
        "inf_value": {"data_type": float},
        "converged": {"data_type": bool},
    }
    _array_fields = ("coefficients",)

    def __init__(
        self,
        P=None,
        modes=0,
        coefficients=None,
        sup_value=None,
        inf_value=None,
        converged=True,
        _data=None,
        _validate=True,
    ):
        if _data is None:
            P = [float(p) for p in np.atleast_1d(P)]
            if coefficients is None:
                coefficients = np.zeros(2 * len(wavevectors(len(P), modes)))
            _data = {
                "P": P,
                "modes": int(modes),
                "coefficients": coefficients,
                "sup_value": None if sup_value is None else float(sup_value),
                "inf_value": None if inf_value is None else float(inf_value),
                "converged": bool(converged),
            }
        super().__init__(_data=_data, _validate=_validate)
        expected = 2 * len(self.wavevectors)
        if len(self.coefficients) != expected:
            raise ValueError(
                f"Corrector.coefficients must have {expected} entries, "
                f"got {len(self.coefficients)}"
            )

    @property
    def P(self):
        return np.array(self._data["P"])

    @property
    def modes(self):
        return self._data["modes"]

    @property
    def coefficients(self):
        return self._data["coefficients"]

    @property
    def sup_value(self):
        return self._data.get("sup_value")

    @property
    def inf_value(self):
        return self._data.get("inf_value")

    @property
    def converged(self):
        return bool(self._data.get("converged", True))

    @property
    def dimension(self):
        return len(self._data["P"])

    @property
    def wavevectors(self):
        return self._cached("_k", lambda: wavevectors(self.dimension, self.modes))

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        m = len(self.wavevectors)
        if m == 0:
            return np.zeros(q.shape[:-1])
        phase = 2 * np.pi * q @ self.wavevectors.T
        a, b = self.coefficients[:m], self.coefficients[m:]
        return np.cos(phase) @ a + np.sin(phase) @ b

    def gradient(self, q):
        """∇φ(q) for points of shape (..., d)."""
        q = np.asarray(q, dtype=float)
        m = len(self.wavevectors)
        if m == 0:
            return np.zeros_like(q)
        k = self.wavevectors
        phase = 2 * np.pi * q @ k.T
        a, b = self.coefficients[:m], self.coefficients[m:]
        amplitude = -np.sin(phase) * a + np.cos(phase) * b
        return 2 * np.pi * amplitude @ k
