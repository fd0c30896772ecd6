import numpy as np

from .BaseObject import BaseObject


class FieldSnapshot(BaseObject):
    """Binned hydrodynamic fields at one time.

    Bins form a uniform grid over the box ``lower``..``upper`` with
    ``shape`` cells per axis. Per bin (arrays indexed by the bin grid,
    vector and tensor components last):

    - ``density`` ρ: mass fraction / bin volume
    - ``momentum`` m = ρu and ``velocity`` u (zero in empty bins)
    - ``temperature`` T: trace of the velocity covariance about u over d
    - ``flux`` M: second velocity moments, so M = ρ u⊗u + ``stress``
    - ``pressure`` p = ρT
    - ``source``: ρ∇(U + 2V*ρ) binned from the particle forces

    ``non_smooth`` is set when the momentum-to-velocity map crossed a kink
    of H̄; ``velocity_map`` records whether that map was the identity.
    """

    _field_types = {
        "t": {"data_type": float, "required": True},
        "lower": {"data_type": np.ndarray, "required": True},
        "upper": {"data_type": np.ndarray, "required": True},
        "shape": {"data_type": list, "required": True},
        "counts": {"data_type": np.ndarray, "required": True},
        "density": {"data_type": np.ndarray, "required": True},
        "momentum": {"data_type": np.ndarray, "required": True},
        "velocity": {"data_type": np.ndarray, "required": True},
        "temperature": {"data_type": np.ndarray, "required": True},
        "flux": {"data_type": np.ndarray, "required": True},
        "stress": {"data_type": np.ndarray, "required": True},
        "pressure": {"data_type": np.ndarray, "required": True},
        "source": {"data_type": np.ndarray},
        "non_smooth": {"data_type": bool},
        "velocity_map": {"data_type": str, "allowed_values": ["identity", "table", "analytic"]},
    }
    _array_fields = (
        "lower",
        "upper",
        "counts",
        "density",
        "momentum",
        "velocity",
        "temperature",
        "flux",
        "stress",
        "pressure",
        "source",
    )

    @classmethod
    def from_fields(cls, t, lower, upper, shape, density, velocity, temperature=None):
        """A snapshot from analytic fields evaluated at the bin centers.

        ``density``, ``velocity`` and ``temperature`` are callables on
        points of shape (..., d); ``velocity`` returns (..., d).
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        shape = [int(n) for n in np.atleast_1d(shape)]
        centers = bin_centers(lower, upper, shape)
        d = len(shape)
        rho = np.asarray(density(centers), dtype=float)
        u = np.asarray(velocity(centers), dtype=float).reshape(rho.shape + (d,))
        T = np.zeros_like(rho) if temperature is None else np.asarray(temperature(centers), dtype=float)
        stress = (rho * T)[..., None, None] * np.eye(d)
        flux = rho[..., None, None] * u[..., :, None] * u[..., None, :] + stress
        return cls(
            t=float(t),
            lower=lower,
            upper=upper,
            shape=shape,
            counts=np.zeros_like(rho),
            density=rho,
            momentum=rho[..., None] * u,
            velocity=u,
            temperature=T,
            flux=flux,
            stress=stress,
            pressure=rho * T,
            non_smooth=False,
            velocity_map="analytic",
        )

    @property
    def t(self):
        return self._data["t"]

    @property
    def lower(self):
        return self._data["lower"]

    @property
    def upper(self):
        return self._data["upper"]

    @property
    def shape(self):
        return tuple(self._data["shape"])

    @property
    def dimension(self):
        return len(self.shape)

    @property
    def counts(self):
        return self._data["counts"]

    @property
    def density(self):
        return self._data["density"]

    @property
    def momentum(self):
        return self._data["momentum"]

    @property
    def velocity(self):
        return self._data["velocity"]

    @property
    def temperature(self):
        return self._data["temperature"]

    @property
    def flux(self):
        return self._data["flux"]

    @property
    def stress(self):
        return self._data["stress"]

    @property
    def pressure(self):
        return self._data["pressure"]

    @property
    def source(self):
        return self._data.get("source")

    @property
    def non_smooth(self):
        return bool(self._data.get("non_smooth", False))

    @property
    def velocity_map(self):
        return self._data.get("velocity_map", "identity")

    @property
    def spacing(self):
        return (self.upper - self.lower) / np.array(self.shape)

    @property
    def bin_volume(self):
        return float(np.prod(self.spacing))

    def centers(self):
        """Bin centers, shape (*shape, d)."""
        return bin_centers(self.lower, self.upper, self.shape)

    @property
    def occupied(self):
        return self.counts > 0

    def total_mass(self):
        return float(np.sum(self.density) * self.bin_volume)


def bin_centers(lower, upper, shape):
    axes = [
        lo + (np.arange(n) + 0.5) * (hi - lo) / n for lo, hi, n in zip(lower, upper, shape)
    ]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
