import logging

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .BaseObject import BaseObject, ExtrapolationError, InvalidModelError

logger = logging.getLogger(__name__)


def _mesh(axes):
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


class EffectiveTable(BaseObject):
    """Sampled effective Hamiltonian H̄(P) with its bracket, and 𝖫̄(v).

    ``lower`` and ``upper`` hold the sup-inf and inf-sup estimates on the P
    grid, ``explicit`` the integrable 1D value when available, and
    ``lagrangian`` the dual 𝖫̄ on the v grid. With ``closed_form ==
    "quadratic"`` the table represents H̄(P) = ½|P|² exactly and lookups are
    not limited to the grids.
    """

    _field_types = {
        "P_axes": {"data_type": list, "required": True},
        "v_axes": {"data_type": list, "required": True},
        "lower": {"data_type": np.ndarray, "required": True},
        "upper": {"data_type": np.ndarray, "required": True},
        "explicit": {"data_type": np.ndarray},
        "lagrangian": {"data_type": np.ndarray, "required": True},
        "closed_form": {"data_type": str, "allowed_values": ["quadratic"]},
        "converged": {"data_type": bool},
    }
    _array_fields = ("lower", "upper", "explicit", "lagrangian")

    def __init__(self, _data=None, _validate=True, **kwargs):
        data = dict(_data if _data is not None else kwargs)
        data["P_axes"] = [np.asarray(a, dtype=float) for a in data["P_axes"]]
        data["v_axes"] = [np.asarray(a, dtype=float) for a in data["v_axes"]]
        super().__init__(_data=data, _validate=_validate)
        if _validate:
            shape = tuple(len(a) for a in self.P_axes)
            for name in ("lower", "upper", "explicit"):
                arr = self._data.get(name)
                if arr is not None and arr.shape != shape:
                    raise ValueError(
                        f"EffectiveTable.{name} has shape {arr.shape}, expected {shape}"
                    )
            if np.any(self.lower > self.upper + 1e-12):
                raise InvalidModelError("EffectiveTable needs lower <= upper at every P")

    @classmethod
    def quadratic(cls, P_axes, v_axes=None):
        """The closed-form table of the free gas: H̄(P) = ½|P|², 𝖫̄(v) = ½|v|²."""
        P_axes = [np.asarray(a, dtype=float) for a in P_axes]
        v_axes = P_axes if v_axes is None else [np.asarray(a, dtype=float) for a in v_axes]
        shape = tuple(len(a) for a in P_axes)
        hbar = 0.5 * np.sum(np.square(_mesh(P_axes)), axis=-1).reshape(shape)
        lag = 0.5 * np.sum(np.square(_mesh(v_axes)), axis=-1)
        return cls(
            P_axes=P_axes,
            v_axes=v_axes,
            lower=hbar,
            upper=hbar.copy(),
            lagrangian=lag.reshape(tuple(len(a) for a in v_axes)),
            closed_form="quadratic",
            converged=True,
        )

    # -- fields -----------------------------------------------------------
    @property
    def P_axes(self):
        return self._data["P_axes"]

    @property
    def v_axes(self):
        return self._data["v_axes"]

    @property
    def lower(self):
        return self._data["lower"]

    @property
    def upper(self):
        return self._data["upper"]

    @property
    def explicit(self):
        return self._data.get("explicit")

    @property
    def lagrangian(self):
        return self._data["lagrangian"]

    @property
    def closed_form(self):
        return self._data.get("closed_form")

    @property
    def converged(self):
        return bool(self._data.get("converged", True))

    @property
    def dimension(self):
        return len(self.P_axes)

    @property
    def midpoint(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def width(self):
        return self.upper - self.lower

    def P_points(self):
        return _mesh(self.P_axes)

    def v_points(self):
        return _mesh(self.v_axes)

    def to_dict(self):
        data = super().to_dict()
        data["P_axes"] = [a.tolist() for a in self.P_axes]
        data["v_axes"] = [a.tolist() for a in self.v_axes]
        return data

    # -- lookups ----------------------------------------------------------
    def _lookup(self, name, axes, values, x):
        interp = self._cached(
            name,
            lambda: RegularGridInterpolator(
                tuple(axes), values, method="linear", bounds_error=False
            ),
        )
        x = np.asarray(x, dtype=float)
        out = interp(x.reshape(-1, self.dimension))
        bad = np.isnan(out)
        if np.any(bad):
            offending = x.reshape(-1, self.dimension)[bad][0]
            raise ExtrapolationError(
                f"{offending.tolist()} is outside the table range", velocity=offending
            )
        return out.reshape(x.shape[:-1])

    def hbar(self, P):
        """H̄ at points of shape (..., d), bracket midpoints interpolated.

        Raises:
            ExtrapolationError: outside the P grid (tabulated tables only)
        """
        P = np.asarray(P, dtype=float)
        if self.closed_form == "quadratic":
            return 0.5 * np.sum(np.square(P), axis=-1)
        return self._lookup("_hbar_interp", self.P_axes, self.midpoint, P)

    def lbar(self, v):
        """𝖫̄ at points of shape (..., d), interpolated from the v grid.

        Raises:
            ExtrapolationError: outside the v grid (tabulated tables only)
        """
        v = np.asarray(v, dtype=float)
        if self.closed_form == "quadratic":
            return 0.5 * np.sum(np.square(v), axis=-1)
        return self._lookup("_lbar_interp", self.v_axes, self.lagrangian, v)

    def in_v_range(self, v):
        v = np.asarray(v, dtype=float)
        if self.closed_form == "quadratic":
            return np.ones(v.shape[:-1], dtype=bool)
        lo = np.array([a[0] for a in self.v_axes])
        hi = np.array([a[-1] for a in self.v_axes])
        return np.all((v >= lo) & (v <= hi), axis=-1)

    def clip_v(self, v):
        if self.closed_form == "quadratic":
            return np.asarray(v, dtype=float)
        lo = np.array([a[0] for a in self.v_axes])
        hi = np.array([a[-1] for a in self.v_axes])
        return np.clip(v, lo, hi)

    def grad_lbar(self, v, step=1e-7):
        """∇𝖫̄ by central differences (exact slopes inside grid cells)."""
        v = np.asarray(v, dtype=float)
        if self.closed_form == "quadratic":
            return v.copy()
        grad = np.empty_like(v)
        for i in range(self.dimension):
            e = np.zeros(self.dimension)
            e[i] = step
            grad[..., i] = (self.lbar(self.clip_v(v + e)) - self.lbar(self.clip_v(v - e))) / (
                2 * step
            )
        return grad

    def grad_hbar(self, P):
        """∇H̄ by centered differences, with a flag where H̄ is not smooth.

        Returns:
            (gradient, non_smooth) where ``non_smooth`` marks points whose
            one-sided differences disagree by more than the bracket width
            allows.
        """
        P = np.asarray(P, dtype=float)
        if self.closed_form == "quadratic":
            return P.copy(), np.zeros(P.shape[:-1], dtype=bool)
        h = np.array([a[1] - a[0] for a in self.P_axes])
        lo = np.array([a[0] for a in self.P_axes])
        hi = np.array([a[-1] for a in self.P_axes])
        center = self.hbar(P)
        grad = np.empty_like(P)
        non_smooth = np.zeros(P.shape[:-1], dtype=bool)
        tolerance = 4.0 * float(np.max(self.width)) + 1e-9
        for i in range(self.dimension):
            up = P.copy()
            down = P.copy()
            up[..., i] = np.minimum(P[..., i] + h[i], hi[i])
            down[..., i] = np.maximum(P[..., i] - h[i], lo[i])
            f_up = self.hbar(up)
            f_down = self.hbar(down)
            right = (f_up - center) / np.maximum(up[..., i] - P[..., i], 1e-300)
            left = (center - f_down) / np.maximum(P[..., i] - down[..., i], 1e-300)
            grad[..., i] = (f_up - f_down) / (up[..., i] - down[..., i])
            kink = np.abs(right - left) * h[i] > tolerance
            non_smooth |= kink
        return grad, non_smooth

    def hbar_hat(self, P):
        """max over the v grid of (P·v − 𝖫̄(v)): the conjugate of the dual table.

        It never exceeds :meth:`hbar` and is the Hamiltonian realized by
        velocities restricted to the v grid.
        """
        P = np.asarray(P, dtype=float)
        v = self.v_points()
        lag = self.lagrangian.reshape(-1)
        flat = P.reshape(-1, self.dimension)
        return np.max(flat @ v.T - lag[None, :], axis=1).reshape(P.shape[:-1])

    # -- invariants -------------------------------------------------------
    def invariant_report(self, c=None, C=None):
        """Check the bracket, convexity and growth properties on the P grid.

        Returns:
            dict with boolean entries ``ordered``, ``convex`` and ``growth``
            (``growth`` is None when c, C are not given).
        """
        mid = self.midpoint
        width = self.width
        ordered = bool(np.all(self.lower <= self.upper + 1e-12))
        convex = True
        for axis in range(self.dimension):
            n = mid.shape[axis]
            if n < 3:
                continue
            left = np.take(mid, range(0, n - 2), axis=axis)
            center = np.take(mid, range(1, n - 1), axis=axis)
            right = np.take(mid, range(2, n), axis=axis)
            slack = (
                np.take(width, range(0, n - 2), axis=axis)
                + np.take(width, range(1, n - 1), axis=axis)
                + np.take(width, range(2, n), axis=axis)
            )
            if np.any(center > 0.5 * (left + right) + slack + 1e-9):
                convex = False
        growth = None
        if c is not None and C is not None:
            r2 = np.sum(np.square(self.P_points()), axis=-1).reshape(mid.shape)
            growth = bool(
                np.all(self.lower >= -c + r2 / C - 1e-9)
                and np.all(self.upper <= c + C * r2 + 1e-9)
            )
        return {"ordered": ordered, "convex": convex, "growth": growth}
