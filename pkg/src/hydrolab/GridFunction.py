import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .BaseObject import BaseObject, ExtrapolationError


class GridFunction(BaseObject):
    """Values sampled on a tensor grid of uniform axes.

    ``domain`` is ``"box"`` for functions on a rectangle and ``"torus"`` for
    one period of a periodic function. Results of discrete transforms keep
    their bookkeeping alongside the values: ``saturated`` flags a supremum
    attained on the grid boundary, ``arg`` holds the flat index of the
    extremizing grid point for every output point.
    """

    _field_types = {
        "axes": {"data_type": list, "required": True},
        "values": {"data_type": np.ndarray, "required": True},
        "domain": {"data_type": str, "allowed_values": ["box", "torus"]},
        "saturated": {"data_type": bool},
        "arg": {"data_type": np.ndarray},
    }
    _array_fields = ("values",)

    def __init__(
        self,
        axes=None,
        values=None,
        domain="box",
        saturated=False,
        arg=None,
        _data=None,
        _validate=True,
    ):
        if _data is None:
            _data = {
                "axes": [np.asarray(a, dtype=float) for a in axes],
                "values": values,
                "domain": domain,
                "saturated": bool(saturated),
                "arg": None if arg is None else np.asarray(arg, dtype=np.int64),
            }
        else:
            _data = dict(_data)
            _data["axes"] = [np.asarray(a, dtype=float) for a in _data["axes"]]
            if _data.get("arg") is not None:
                _data["arg"] = np.asarray(_data["arg"], dtype=np.int64)
        super().__init__(_data=_data, _validate=_validate)
        if _validate:
            self._check_grid()

    def _check_grid(self):
        shape = tuple(len(a) for a in self.axes)
        if self.values.shape != shape:
            raise ValueError(
                f"GridFunction.values has shape {self.values.shape}, axes give {shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridFunction.values must be finite")
        for a in self.axes:
            if len(a) > 1 and not np.all(np.diff(a) > 0):
                raise ValueError("GridFunction axes must be strictly increasing")

    @property
    def axes(self):
        return self._data["axes"]

    @property
    def values(self):
        return self._data["values"]

    @property
    def domain(self):
        return self._data.get("domain", "box")

    @property
    def saturated(self):
        return bool(self._data.get("saturated", False))

    @property
    def arg(self):
        return self._data.get("arg")

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def spacing(self):
        return np.array([a[1] - a[0] if len(a) > 1 else 0.0 for a in self.axes])

    def points(self):
        """All grid points as an (n, d) array in C order of ``values``."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.ndim)

    def flat_values(self):
        return self.values.reshape(-1)

    def __call__(self, x):
        """Multilinear interpolation at points of shape (..., d).

        Raises:
            ExtrapolationError: for points outside a box domain
        """
        x = np.asarray(x, dtype=float)
        if self.domain == "torus":
            x = np.mod(x, 1.0)
        interp = self._cached("_interp", self._interpolator)
        values = interp(x)
        if np.any(np.isnan(values)):
            bad = x.reshape(-1, self.ndim)[np.isnan(values.reshape(-1))][0]
            raise ExtrapolationError(
                f"point {bad.tolist()} outside the grid", velocity=bad
            )
        return values

    def _interpolator(self):
        axes = list(self.axes)
        values = self.values
        if self.domain == "torus":
            for i in range(self.ndim):
                axes[i] = np.append(axes[i], 1.0)
                values = np.concatenate([values, np.take(values, [0], axis=i)], axis=i)
        return RegularGridInterpolator(
            tuple(axes), values, method="linear", bounds_error=False
        )

    def to_dict(self):
        data = super().to_dict()
        data["axes"] = [a.tolist() for a in self.axes]
        return data

    @classmethod
    def uniform(cls, lo, hi, n, func=None, domain="box"):
        """A grid with ``n`` points per axis on [lo, hi]^d (lo, hi sequences)."""
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if domain == "torus":
            axes = [np.arange(n) / n for _ in lo]
        else:
            axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
        grid = cls(axes=axes, values=np.zeros((n,) * len(axes)), domain=domain)
        if func is not None:
            values = np.asarray(func(grid.points()), dtype=float)
            grid = cls(axes=axes, values=values.reshape((n,) * len(axes)), domain=domain)
        return grid
