import math

import numpy as np

from .BaseObject import BaseObject, PreconditionError, UnsupportedError
from .EmpiricalMeasure import EmpiricalMeasure
from .transport import wasserstein

KINDS = ["constant", "neg_dist_squared", "neg_dist", "custom"]


def _quantile_cells(n, m):
    """Mass cells of the monotone coupling between n and m equal atoms:
    (index into the sorted x, index into the sorted y, cell mass)."""
    breaks = np.union1d(np.arange(n + 1) / n, np.arange(m + 1) / m)
    mids = 0.5 * (breaks[1:] + breaks[:-1])
    i = np.minimum((mids * n).astype(int), n - 1)
    j = np.minimum((mids * m).astype(int), m - 1)
    return i, j, np.diff(breaks)


def squared_distance(x, y, gradient=False):
    """d²(emp(x), emp(y)) for configurations x of shape (..., N, d).

    One-dimensional measures of any sizes use the monotone coupling and are
    evaluated for the whole batch at once; in higher dimensions the atom
    counts must agree and every configuration is matched separately.

    Returns:
        (values of shape (...), gradient in x or None)
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape[-2:]
    if d == 1:
        i, j, widths = _quantile_cells(n, len(y))
        order = np.argsort(x[..., 0], axis=-1, kind="stable")
        xs = np.take_along_axis(x[..., 0], order, axis=-1)
        gap = xs[..., i] - np.sort(y[:, 0])[j]
        d2 = np.sort(widths * np.square(gap), axis=-1).sum(axis=-1)
        if not gradient:
            return d2, None
        cells = np.zeros((len(widths), n))
        cells[np.arange(len(widths)), i] = 1.0
        sorted_grad = (2.0 * widths * gap) @ cells
        grad = np.empty_like(xs)
        np.put_along_axis(grad, order, sorted_grad, axis=-1)
        return d2, grad[..., None]
    if len(y) != n:
        raise UnsupportedError(f"distance terminal data in d={d} needs {len(y)} atoms, got {n}")
    flat = x.reshape((-1, n, d))
    values = np.empty(len(flat))
    grads = np.empty_like(flat) if gradient else None
    for k, config in enumerate(flat):
        _, plan = wasserstein(config, y, 2.0)
        values[k] = plan.cost
        if gradient:
            grads[k] = 2.0 * (config - y[plan.permutation]) / n
    values = values.reshape(x.shape[:-2])
    return values, (None if grads is None else grads.reshape(x.shape))


class TerminalData(BaseObject):
    """Terminal data h(ρ) evaluated at atom configurations x ↦ h(emp(x)).

    Kinds:

    - ``constant``: h ≡ c.
    - ``neg_dist_squared``: h(ρ) = −(a/2)·d²(ρ, γ_ref).
    - ``neg_dist``: h(ρ) = −a·d(ρ, γ_ref).
    - ``custom``: a caller-supplied closure on (N, d) configurations with a
      declared upper bound ``sup_bound``. Whether it belongs to class 𝒞 is
      the caller's assertion (``class_c``).

    All kinds are symmetric under relabelling of the atoms.
    """

    _field_types = {
        "kind": {"data_type": str, "allowed_values": KINDS, "required": True},
        "a": {"data_type": float},
        "c": {"data_type": float},
        "reference": {"data_type": np.ndarray},
        "sup_bound": {"data_type": float},
        "class_c": {"data_type": bool},
    }
    _array_fields = ("reference",)

    def __init__(
        self,
        kind="constant",
        c=0.0,
        a=1.0,
        reference=None,
        sup_bound=None,
        class_c=None,
        func=None,
        grad=None,
        _data=None,
        _validate=True,
    ):
        if _data is None:
            if isinstance(reference, EmpiricalMeasure):
                reference = reference.atoms
            elif reference is not None:
                reference = np.asarray(reference, dtype=float)
                if reference.ndim == 1:
                    reference = reference[:, None]
            _data = {
                "kind": kind,
                "a": float(a),
                "c": float(c),
                "reference": reference,
                "sup_bound": None if sup_bound is None else float(sup_bound),
                "class_c": class_c,
            }
        super().__init__(_data=_data, _validate=_validate)
        object.__setattr__(self, "_func", func)
        object.__setattr__(self, "_grad", grad)
        if _validate:
            if self.kind in ("neg_dist_squared", "neg_dist") and self.reference is None:
                raise ValueError(f"TerminalData of kind {self.kind!r} needs a reference measure")
            if self.kind in ("neg_dist_squared", "neg_dist") and not self.a > 0:
                raise ValueError("TerminalData.a must be positive")
            if self.kind == "custom":
                if func is None:
                    raise ValueError("custom TerminalData needs a closure")
                if self._data.get("sup_bound") is None or not math.isfinite(self._data["sup_bound"]):
                    raise PreconditionError("custom terminal data must declare a finite upper bound")

    @classmethod
    def constant(cls, c):
        return cls(kind="constant", c=c)

    @classmethod
    def neg_dist_squared(cls, reference, a=1.0):
        return cls(kind="neg_dist_squared", reference=reference, a=a)

    @classmethod
    def neg_dist(cls, reference, a=1.0):
        return cls(kind="neg_dist", reference=reference, a=a)

    @classmethod
    def custom(cls, func, sup_bound, grad=None, class_c=False):
        return cls(kind="custom", func=func, grad=grad, sup_bound=sup_bound, class_c=bool(class_c))

    @property
    def kind(self):
        return self._data["kind"]

    @property
    def a(self):
        return self._data.get("a", 1.0)

    @property
    def c(self):
        return self._data.get("c", 0.0)

    @property
    def reference(self):
        return self._data.get("reference")

    @property
    def is_class_c(self):
        if self.kind == "custom":
            return bool(self._data.get("class_c"))
        return True

    @property
    def has_gradient(self):
        return self.kind != "custom" or self._grad is not None

    def sup(self):
        """An upper bound for h."""
        if self.kind == "constant":
            return self.c
        if self.kind == "custom":
            return self._data["sup_bound"]
        return 0.0

    def growth_envelope(self, r):
        """β with h(ρ) ≥ −β(d(ρ, δ₀))."""
        r = np.asarray(r, dtype=float)
        if self.kind == "constant":
            return np.full_like(r, max(-self.c, 0.0))
        if self.kind == "custom":
            return np.full_like(r, np.inf)
        radius = math.sqrt(float(np.mean(np.sum(np.square(self.reference), axis=-1))))
        if self.kind == "neg_dist_squared":
            return 0.5 * self.a * np.square(r + radius)
        return self.a * (r + radius)

    def _evaluate(self, x, gradient):
        if self.kind == "custom":
            flat = x.reshape((-1,) + x.shape[-2:])
            if gradient:
                out = np.array([np.asarray(self._grad(config), dtype=float) for config in flat])
                return out.reshape(x.shape)
            return np.array([float(self._func(config)) for config in flat]).reshape(x.shape[:-2])
        d2, g = squared_distance(x, self.reference, gradient)
        if self.kind == "neg_dist_squared":
            return -0.5 * self.a * (g if gradient else d2)
        dist = np.sqrt(np.maximum(d2, 0.0))
        if not gradient:
            return -self.a * dist
        with np.errstate(divide="ignore", invalid="ignore"):
            coef = np.where(dist > 0, -self.a / (2.0 * dist), 0.0)
        return coef[..., None, None] * g

    def value(self, x):
        """h on configurations of shape (..., N, d); returns shape (...)."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full(x.shape[:-2], self.c)
        return self._evaluate(x, False)

    def gradient(self, x):
        """∂h/∂x_i on configurations of shape (..., N, d).

        At ρ = γ_ref the distance kind uses the zero subgradient.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(x)
        return self._evaluate(x, True)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        return float(self.value(x))
