import itertools
import logging

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .BaseObject import BaseObject, InvalidModelError, OutOfRangeError
from .potentials import PERIODIC_POTENTIALS, parse_potential

logger = logging.getLogger(__name__)


class MicroModel(BaseObject):
    """The microscopic Hamiltonian H(q, p) on the unit torus.

    Two kinds are supported:

    * ``quadratic``: H(q, p) = ½|p|² − U_per(q) with U_per given by a
      registered periodic potential description (see :mod:`hydrolab.potentials`).
    * ``tabulated``: H sampled on a grid of q over one period (``table.nq``
      points per axis at j/nq) times a momentum grid ``table.p`` per axis,
      interpolated multilinearly. Build one with :meth:`tabulate`.

    ``c`` and ``C`` are the constants of the almost-quadratic growth bound
    −c + |p|²/C ≤ H(q, p) ≤ c + C|p|².
    """

    _field_types = {
        "dimension": {"data_type": int, "required": True},
        "kind": {
            "data_type": str,
            "allowed_values": ["quadratic", "tabulated"],
            "required": True,
        },
        "potential": {"data_type": (dict, str)},
        "c": {"data_type": (int, float)},
        "C": {"data_type": (int, float)},
        "table": {"data_type": dict},
    }

    def __init__(
        self,
        dimension=1,
        kind="quadratic",
        potential=None,
        c=1.0,
        C=2.0,
        table=None,
        _data=None,
        _validate=True,
    ):
        if _data is None:
            _data = {
                "dimension": dimension,
                "kind": kind,
                "potential": potential or {"kind": "zero"},
                "c": c,
                "C": C,
                "table": table,
            }
        _data.setdefault("c", 1.0)
        _data.setdefault("C", 2.0)
        super().__init__(_data=_data, _validate=_validate)
        if self.dimension < 1:
            raise InvalidModelError("MicroModel.dimension must be positive")
        if self.kind == "quadratic":
            _, pot = parse_potential(self._data.get("potential"), PERIODIC_POTENTIALS)
            object.__setattr__(self, "_potential", pot)
        else:
            self._build_table()
        if _validate:
            self.check_invariants()

    # -- fields -----------------------------------------------------------
    @property
    def dimension(self):
        return self._data["dimension"]

    @property
    def kind(self):
        return self._data["kind"]

    @property
    def c(self):
        return float(self._data["c"])

    @property
    def C(self):
        return float(self._data["C"])

    @property
    def periodic_potential(self):
        """The U_per callable of the quadratic kind (None when tabulated)."""
        return getattr(self, "_potential", None)

    @property
    def momentum_axis(self):
        """The tabulated momentum grid (one axis, shared by all dimensions)."""
        if self.kind != "tabulated":
            return None
        return self._p_axis

    @classmethod
    def tabulate(cls, func, nq, p_axis, dimension=1, c=1.0, C=2.0, _validate=True):
        """Sample ``func(q, p)`` into a tabulated model.

        Args:
            func: Vectorized H(q, p) taking arrays of shape (..., d).
            nq: Samples per period along each q axis.
            p_axis: Momentum samples used along each p axis.
            dimension: d.
        """
        d = dimension
        q_axis = np.arange(nq) / nq
        p_axis = np.asarray(p_axis, dtype=float)
        grids = np.meshgrid(*([q_axis] * d + [p_axis] * d), indexing="ij")
        points = np.stack(grids, axis=-1)
        values = np.asarray(func(points[..., :d], points[..., d:]), dtype=float)
        table = {"nq": int(nq), "p": p_axis.tolist(), "values": values.tolist()}
        return cls(
            dimension=d, kind="tabulated", table=table, c=c, C=C, _validate=_validate
        )

    def _build_table(self):
        table = self._data.get("table")
        if not table:
            raise InvalidModelError("tabulated MicroModel needs a 'table'")
        d = self.dimension
        nq = int(table["nq"])
        p_axis = np.asarray(table["p"], dtype=float)
        values = np.asarray(table["values"], dtype=float)
        if values.shape != (nq,) * d + (len(p_axis),) * d:
            raise InvalidModelError(
                f"tabulated values have shape {values.shape}, expected "
                f"{(nq,) * d + (len(p_axis),) * d}"
            )
        if not np.all(np.isfinite(values)):
            raise InvalidModelError("tabulated values must be finite")
        # wrap q so that interpolation is periodic
        for axis in range(d):
            values = np.concatenate([values, np.take(values, [0], axis=axis)], axis=axis)
        q_axis = np.arange(nq + 1) / nq
        interp = RegularGridInterpolator(
            tuple([q_axis] * d + [p_axis] * d), values, method="linear"
        )
        object.__setattr__(self, "_interp", interp)
        object.__setattr__(self, "_p_axis", p_axis)

    # -- evaluation -------------------------------------------------------
    def hamiltonian(self, q, p):
        """H(q, p) for arrays of points of shape (..., d)."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * np.sum(np.square(p), axis=-1) - self._potential(q)
        lo, hi = self._p_axis[0], self._p_axis[-1]
        if np.any(p < lo) or np.any(p > hi):
            raise OutOfRangeError(
                f"momentum outside the tabulated range [{lo}, {hi}]"
            )
        q, p = np.broadcast_arrays(np.mod(q, 1.0), p)
        return self._interp(np.concatenate([q, p], axis=-1))

    def grad_p(self, q, p):
        """∇_p H(q, p)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "quadratic":
            return p.copy()
        h = 0.5 * (self._p_axis[1] - self._p_axis[0])
        lo, hi = self._p_axis[0], self._p_axis[-1]
        grad = np.empty(np.broadcast_shapes(np.shape(q), p.shape))
        for i in range(self.dimension):
            up = p.copy()
            down = p.copy()
            up[..., i] = np.minimum(p[..., i] + h, hi)
            down[..., i] = np.maximum(p[..., i] - h, lo)
            width = up[..., i] - down[..., i]
            grad[..., i] = (self.hamiltonian(q, up) - self.hamiltonian(q, down)) / width
        return grad

    def grad_q(self, q, p):
        """∇_q H(q, p)."""
        q = np.asarray(q, dtype=float)
        if self.kind == "quadratic":
            return -self._potential.gradient(q)
        nq = int(self._data["table"]["nq"])
        h = 0.5 / nq
        grad = np.empty(np.broadcast_shapes(q.shape, np.shape(p)))
        for i in range(self.dimension):
            step = np.zeros(self.dimension)
            step[i] = h
            grad[..., i] = (self.hamiltonian(q + step, p) - self.hamiltonian(q - step, p)) / (
                2 * h
            )
        return grad

    def lagrangian(self, q, xi):
        """𝖫(q, ξ) = sup_p (ξ·p − H(q, p)) and a boundary-saturation flag.

        Closed form ½|ξ|² + U_per(q) for the quadratic kind; a brute-force
        maximization over the tabulated momentum grid otherwise.

        Returns:
            (values, saturated) arrays of shape q.shape[:-1]
        """
        q = np.asarray(q, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.kind == "quadratic":
            values = 0.5 * np.sum(np.square(xi), axis=-1) + self._potential(q)
            return values, np.zeros(values.shape, dtype=bool)
        d = self.dimension
        grid = np.stack(
            np.meshgrid(*([self._p_axis] * d), indexing="ij"), axis=-1
        ).reshape(-1, d)
        q, xi = np.broadcast_arrays(q, xi)
        flat_q = q.reshape(-1, d)
        flat_xi = xi.reshape(-1, d)
        values = np.empty(len(flat_q))
        saturated = np.empty(len(flat_q), dtype=bool)
        n = len(self._p_axis)
        for i, (qi, xii) in enumerate(zip(flat_q, flat_xi)):
            h = self.hamiltonian(np.broadcast_to(qi, grid.shape), grid)
            objective = grid @ xii - h
            j = int(np.argmax(objective))
            values[i] = objective[j]
            index = np.unravel_index(j, (n,) * d)
            saturated[i] = any(k in (0, n - 1) for k in index)
        shape = q.shape[:-1]
        return values.reshape(shape), saturated.reshape(shape)

    def potential_minimum(self):
        """min_q U_per(q) for the quadratic kind (sampled)."""
        if self.kind != "quadratic":
            return None
        grid = self._sample_q(64)
        return float(np.min(self._potential(grid)))

    # -- invariants -------------------------------------------------------
    def _sample_q(self, per_axis):
        d = self.dimension
        axis = np.arange(per_axis) / per_axis
        return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)

    def _sample_p(self, per_axis):
        d = self.dimension
        if self.kind == "tabulated":
            axis = np.linspace(self._p_axis[0], self._p_axis[-1], per_axis)
        else:
            axis = np.linspace(-4.0, 4.0, per_axis)
        return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)

    def check_invariants(self, tol=1e-9):
        """Sampled checks of periodicity, growth and convexity in p.

        Raises:
            InvalidModelError: naming the first violated invariant
        """
        d = self.dimension
        per_axis = 16 if d == 1 else 6
        q = self._sample_q(per_axis)
        p = self._sample_p(9 if d == 1 else 5)
        qq = np.repeat(q, len(p), axis=0)
        pp = np.tile(p, (len(q), 1))
        h = self.hamiltonian(qq, pp)

        for shift in itertools.product([-1, 0, 1], repeat=d):
            if not any(shift):
                continue
            shifted = self.hamiltonian(qq + np.array(shift, dtype=float), pp)
            if np.max(np.abs(shifted - h)) > 1e-8 * (1.0 + np.max(np.abs(h))):
                raise InvalidModelError(f"H is not periodic under the shift {shift}")

        r2 = np.sum(np.square(pp), axis=-1)
        if np.any(h < -self.c + r2 / self.C - tol) or np.any(h > self.c + self.C * r2 + tol):
            raise InvalidModelError(
                f"H violates the growth bound with c={self.c}, C={self.C}"
            )

        rng = np.random.default_rng(0)
        a = pp[rng.permutation(len(pp))]
        mid = self.hamiltonian(qq, 0.5 * (pp + a))
        chord = 0.5 * (h + self.hamiltonian(qq, a))
        if np.any(mid > chord + tol + 1e-9 * np.abs(chord)):
            raise InvalidModelError("p -> H(q, p) is not midpoint convex")
        logger.debug("MicroModel invariants hold on %i samples", len(qq))
