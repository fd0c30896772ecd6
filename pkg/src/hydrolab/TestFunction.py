import numpy as np

from .BaseObject import BaseObject
from .EmpiricalMeasure import EmpiricalMeasure
from .transport import distance

PSI_KINDS = ["linear", "capped"]


class TestFunction(BaseObject):
    """f(ρ) = ±ψ(d²(ρ, γ₁), …, d²(ρ, γ_K)) for finitely many anchors γ_k.

    ``sign="plus"`` is f₀ = ψ(…), ``sign="minus"`` is f₁ = −ψ(d²(ρ₁, ·), …)
    with the anchors in the first slot. ψ is componentwise increasing:

    - ``linear``: ψ(r) = Σ a_k r_k
    - ``capped``: ψ(r) = Σ a_k c (1 − e^{−r_k/c}) with cap ``cap`` = c
    """

    __test__ = False

    _field_types = {
        "sign": {"data_type": str, "allowed_values": ["plus", "minus"], "required": True},
        "anchors": {"data_type": list, "required": True},
        "psi": {"data_type": str, "allowed_values": PSI_KINDS, "required": True},
        "a": {"data_type": list, "required": True},
        "cap": {"data_type": float},
    }

    def __init__(self, sign="plus", anchors=None, psi="linear", a=None, cap=1.0, _data=None, _validate=True):
        if _data is None:
            _data = {"sign": sign, "anchors": anchors, "psi": psi, "a": a, "cap": float(cap)}
        _data = dict(_data)
        anchors = []
        for anchor in _data.get("anchors") or []:
            atoms = anchor.atoms if isinstance(anchor, EmpiricalMeasure) else np.asarray(anchor, dtype=float)
            atoms = atoms[:, None] if atoms.ndim == 1 else atoms
            atoms = np.array(atoms, dtype=float)
            atoms.setflags(write=False)
            anchors.append(atoms)
        _data["anchors"] = anchors
        if _data.get("a") is None:
            _data["a"] = [1.0] * len(anchors)
        _data["a"] = [float(v) for v in np.atleast_1d(_data["a"])]
        super().__init__(_data=_data, _validate=_validate)
        if _validate:
            if len(self.anchors) < 1:
                raise ValueError("TestFunction needs at least one anchor")
            if len(self.a) != len(self.anchors):
                raise ValueError(
                    f"TestFunction.a has {len(self.a)} coefficients for {len(self.anchors)} anchors"
                )
            if not all(v > 0 for v in self.a):
                raise ValueError("TestFunction.a must be positive")
            if len({atoms.shape[1] for atoms in self.anchors}) != 1:
                raise ValueError("TestFunction anchors must share one dimension")
            if self.psi == "capped" and not self.cap > 0:
                raise ValueError("TestFunction.cap must be positive")

    @property
    def sign(self):
        return self._data["sign"]

    @property
    def anchors(self):
        return self._data["anchors"]

    @property
    def psi(self):
        return self._data["psi"]

    @property
    def a(self):
        return self._data["a"]

    @property
    def cap(self):
        return self._data.get("cap", 1.0)

    @property
    def K(self):
        return len(self.anchors)

    @property
    def dimension(self):
        return self.anchors[0].shape[1]

    def mirrored(self):
        """The same anchors and ψ with the other sign."""
        return TestFunction(
            sign="minus" if self.sign == "plus" else "plus",
            anchors=list(self.anchors),
            psi=self.psi,
            a=list(self.a),
            cap=self.cap,
        )

    def radii(self, rho):
        """r_k = d²(ρ, γ_k)."""
        return np.array([distance(rho, anchor, 2.0) ** 2 for anchor in self.anchors])

    def outer(self, r):
        a = np.asarray(self.a)
        r = np.asarray(r, dtype=float)
        if self.psi == "linear":
            return float(np.sum(a * r))
        return float(np.sum(a * self.cap * (1.0 - np.exp(-r / self.cap))))

    def partials(self, r):
        """∂ψ/∂r_k at r: the α_k (plus) or β_k (minus) coefficients."""
        a = np.asarray(self.a)
        if self.psi == "linear":
            return a.copy()
        return a * np.exp(-np.asarray(r, dtype=float) / self.cap)

    def __call__(self, rho):
        value = self.outer(self.radii(rho))
        return value if self.sign == "plus" else -value

    def to_dict(self):
        data = super().to_dict()
        data["anchors"] = [atoms.tolist() for atoms in self.anchors]
        return data
