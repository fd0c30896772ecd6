"""Microscopic Hamiltonians, Legendre duality and the rescaled N-particle Hamiltonian."""

import logging

import numpy as np

from hydrolab.BaseObject import OutOfRangeError
from hydrolab.GridFunction import GridFunction
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.MicroModel import MicroModel

logger = logging.getLogger(__name__)

# Keeps the brute-force conjugate's temporary (chunk × grid) matrix bounded.
LEGENDRE_CHUNK_ELEMENTS = 4_000_000


def sorted_sum(values, axis=None):
    """Sum after sorting, so the result is independent of element order."""
    values = np.asarray(values, dtype=float)
    if axis is None:
        return float(np.sort(values, axis=None).sum())
    return np.sort(values, axis=axis).sum(axis=axis)


def eval_h(model: MicroModel, q, p) -> float:
    """H(q, p) at a single phase point.

    Raises:
        OutOfRangeError: for tabulated models queried outside their table
    """
    d = model.dimension
    q = np.asarray(q, dtype=float).reshape(d)
    p = np.asarray(p, dtype=float).reshape(d)
    return float(model.hamiltonian(q, p))


def legendre(f: GridFunction, slope_grid) -> GridFunction:
    """Discrete convex conjugate g(ξ) = max over grid p of (ξ·p − f(p)).

    Args:
        f: Function sampled on its (momentum) grid.
        slope_grid: A GridFunction (only its axes are used) or a list of
            axes for the slopes ξ.

    Returns:
        GridFunction on the slope grid. ``arg`` holds the flat index of the
        maximizing p for every ξ; ``saturated`` is set when any maximizer
        lies on the boundary of the p grid.
    """
    axes = slope_grid.axes if isinstance(slope_grid, GridFunction) else slope_grid
    axes = [np.atleast_1d(np.asarray(a, dtype=float)) for a in axes]
    p = f.points()
    fp = f.flat_values()
    mesh = np.meshgrid(*axes, indexing="ij")
    xi = np.stack(mesh, axis=-1).reshape(-1, len(axes))

    values = np.empty(len(xi))
    arg = np.empty(len(xi), dtype=np.int64)
    chunk = max(1, LEGENDRE_CHUNK_ELEMENTS // max(1, len(p)))
    for start in range(0, len(xi), chunk):
        block = xi[start : start + chunk] @ p.T - fp[None, :]
        idx = np.argmax(block, axis=1)
        arg[start : start + chunk] = idx
        values[start : start + chunk] = block[np.arange(len(idx)), idx]

    shape = tuple(len(a) for a in f.axes)
    index = np.stack(np.unravel_index(arg, shape), axis=-1)
    on_edge = np.any((index == 0) | (index == np.array(shape) - 1), axis=-1)
    saturated = bool(np.any(on_edge))
    if saturated:
        logger.warning(
            "Legendre transform: supremum attained on the grid boundary at %i of %i slopes",
            int(on_edge.sum()),
            len(xi),
        )
    return GridFunction(
        axes=axes,
        values=values.reshape(tuple(len(a) for a in axes)),
        domain="box",
        saturated=saturated,
        arg=arg,
    )


def micro_lagrangian(model: MicroModel, q, xi, with_saturation=False):
    """𝖫(q, ξ) = sup_p (ξ·p − H(q, p)).

    Closed form for the quadratic kind; grid conjugate over the tabulated
    momentum grid otherwise, with a logged warning on boundary saturation.
    With ``with_saturation`` the result is a (value, saturated) pair.
    """
    d = model.dimension
    q = np.asarray(q, dtype=float).reshape(d)
    xi = np.asarray(xi, dtype=float).reshape(d)
    value, saturated = model.lagrangian(q, xi)
    if bool(saturated):
        logger.warning("micro_lagrangian: supremum at the momentum grid boundary for xi=%s", xi)
    if with_saturation:
        return float(value), bool(saturated)
    return float(value)


def rescaled_hn(model: MicroModel, macro: MacroPotentials, eps: float, x, P) -> float:
    """H_N(x, P) = (1/N) Σ_i [H(x_i/ε, P_i) − U(x_i) − (1/N) Σ_j V(x_i − x_j)].

    The average is taken over sorted per-particle terms, so relabelling the
    particles leaves the value bit-for-bit unchanged.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    P = np.asarray(P, dtype=float)
    if x.shape != P.shape:
        raise ValueError(f"x and P must have the same shape, got {x.shape} and {P.shape}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(P))):
        raise ValueError("rescaled_hn needs finite inputs")
    per_particle = model.hamiltonian(x / eps, P) - macro.U(x) - macro.interaction(x)
    return sorted_sum(per_particle) / len(x)


def hn_force(model: MicroModel, macro: MacroPotentials, eps: float, x, P):
    """Ṗ_i = −(1/ε) ∇_q H(x_i/ε, P_i) + ∇U(x_i) + (2/N) Σ_j ∇V(x_i − x_j)."""
    x = np.asarray(x, dtype=float)
    force = -model.grad_q(x / eps, P) / eps + macro.grad_U(x)
    if macro.has_interaction:
        force = force + 2.0 * macro.interaction_gradient(x)
    return force


class ParticleLagrangian:
    """The N-particle running cost

        L_N(x, v) = (1/N) Σ_i [𝖫(x_i/ε, v_i) + U(x_i) + (1/N) Σ_j V(x_i − x_j)]

    evaluated on batches of configurations of shape (..., N, d). Gradients
    are analytic for the quadratic kind; the tabulated kind has none and
    optimizers fall back to finite differences.
    """

    def __init__(self, model: MicroModel, macro: MacroPotentials, eps: float):
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.model = model
        self.macro = macro
        self.eps = float(eps)
        self.has_gradient = model.kind == "quadratic"

    def per_particle(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        kinetic, saturated = self.model.lagrangian(x / self.eps, v)
        if np.any(saturated):
            logger.warning("L_N: velocity outside the resolvable range of the momentum grid")
        return kinetic + self.macro.U(x) + self.macro.interaction(x)

    def value(self, x, v):
        """L_N for configurations (..., N, d); returns shape (...)."""
        terms = self.per_particle(x, v)
        return np.sort(terms, axis=-1).sum(axis=-1) / terms.shape[-1]

    def grad_x(self, x, v):
        x = np.asarray(x, dtype=float)
        n = x.shape[-2]
        grad = self.model.periodic_potential.gradient(x / self.eps) / self.eps
        grad = grad + self.macro.grad_U(x)
        grad = grad + 2.0 * self.macro.interaction_gradient(x)
        return grad / n

    def grad_v(self, x, v):
        v = np.asarray(v, dtype=float)
        return v / v.shape[-2]

    def resting_value(self, x):
        """L_N(x, 0)."""
        x = np.asarray(x, dtype=float)
        return float(self.value(x, np.zeros_like(x)))

    def infimum(self):
        """A lower bound for inf L_N: inf 𝖫 + inf U + inf V."""
        if self.model.kind == "quadratic":
            inf_l = self.model.potential_minimum()
        else:
            q = self._q_samples()
            # 𝖫(q, ξ) ≥ −H(q, 0) for every ξ
            inf_l = float(np.min(-self.model.hamiltonian(q, np.zeros_like(q))))
        return inf_l + self.macro.inf_U + self.macro.inf_V

    def sup_h_at_rest(self):
        """sup_q H(q, 0), used by the growth bound of resolvent values."""
        q = self._q_samples()
        try:
            return float(np.max(self.model.hamiltonian(q, np.zeros_like(q))))
        except OutOfRangeError:
            return np.inf

    def _q_samples(self):
        d = self.model.dimension
        n = 64 if d == 1 else 16
        axis = np.arange(n) / n
        return np.stack(np.meshgrid(*([axis] * d), indexing="ij"), -1).reshape(-1, d)
