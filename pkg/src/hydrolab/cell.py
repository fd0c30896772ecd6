"""Effective Hamiltonians from the cell problem, effective Lagrangians and
Moreau–Yosida regularization on grids."""

import logging

import numpy as np
from scipy.integrate import quad
from scipy.optimize import minimize, minimize_scalar
from scipy.special import logsumexp, softmax

from hydrolab.BaseObject import (
    ExtrapolationError,
    InvalidModelError,
    IterationLimitError,
    ParameterError,
    UnsupportedError,
)
from hydrolab.Corrector import Corrector, gradient_basis, wavevectors
from hydrolab.EffectiveTable import EffectiveTable
from hydrolab.GridFunction import GridFunction
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.MicroModel import MicroModel
from hydrolab.model import legendre
from hydrolab.parallel import map_tasks, task_rng

logger = logging.getLogger(__name__)

# Soft-max temperatures, solved in order with warm starts.
SOFTMAX_TEMPERATURES = (1e-1, 1e-2, 1e-3, 1e-4)
DENSE_FACTOR = {1: 8, 2: 4}
QUAD_OPTIONS = {"epsabs": 1e-13, "epsrel": 1e-13, "limit": 200}
MOREAU_CHUNK_ELEMENTS = 4_000_000


# -- explicit one-dimensional formula -------------------------------------


def _scalar_potential(U_per):
    """A float -> float view of a 1D periodic potential."""
    if isinstance(U_per, MicroModel):
        if U_per.kind != "quadratic" or U_per.dimension != 1:
            raise InvalidModelError(
                "the explicit formula needs a one-dimensional quadratic-kinetic model"
            )
        U_per = U_per.periodic_potential
    if hasattr(U_per, "gradient"):
        potential = U_per
        return lambda q: float(potential(np.array([[q]]))[0])
    return lambda q: float(U_per(q))


def _potential_minimum(u, samples=2048):
    q = np.arange(samples) / samples
    values = np.array([u(x) for x in q])
    j = int(np.argmin(values))
    h = 1.0 / samples
    res = minimize_scalar(
        u, bounds=(q[j] - h, q[j] + h), method="bounded", options={"xatol": 1e-12}
    )
    if res.fun < values[j]:
        return float(res.fun), float(np.mod(res.x, 1.0))
    return float(values[j]), float(q[j])


def _period_action(u, m, q_min, lam):
    """∫₀¹ √(2(λ + U_per(q) − min U_per)) dq."""
    points = [q_min] if 0.0 < q_min < 1.0 else None
    value, _ = quad(
        lambda q: np.sqrt(2.0 * max(lam + u(q) - m, 0.0)), 0.0, 1.0, points=points, **QUAD_OPTIONS
    )
    return value


def flat_piece_edge(U_per):
    """|P| up to which H̄ stays at its minimum for H = ½p² − U_per(q).

    This is ∫₀¹ √(2(U_per − min U_per)) dq.
    """
    u = _scalar_potential(U_per)
    m, q_min = _potential_minimum(u)
    return _period_action(u, m, q_min, 0.0)


def effective_h_1d(U_per, P, tol=1e-10, max_iter=200):
    """H̄(P) for H(q, p) = ½p² − U_per(q) on the circle.

    With U_per shifted to have minimum 0, H̄(P) = 0 on the flat piece
    |P| ≤ ∫√(2U_per), and beyond it the λ > 0 solving
    |P| = ∫₀¹ √(2(λ + U_per(q))) dq, found by bisection on [0, ½P²].

    Args:
        U_per: a 1D quadratic-kinetic MicroModel, a registered potential
            or a plain callable q -> U_per(q).
        P: Momentum.
        tol: Absolute tolerance on λ.

    Raises:
        InvalidModelError: if U_per takes negative values
        IterationLimitError: if bisection does not reach ``tol``
    """
    if not tol > 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    u = _scalar_potential(U_per)
    m, q_min = _potential_minimum(u)
    if m < -1e-12:
        raise InvalidModelError(f"U_per must be nonnegative, its minimum is {m:.6g}")
    P = abs(float(P))
    if P <= _period_action(u, m, q_min, 0.0):
        return 0.0 - m
    lo, hi = 0.0, 0.5 * P * P
    for _ in range(max_iter):
        if hi - lo <= tol:
            return 0.5 * (lo + hi) - m
        mid = 0.5 * (lo + hi)
        if _period_action(u, m, q_min, mid) < P:
            lo = mid
        else:
            hi = mid
    raise IterationLimitError(
        f"bisection for H̄({P}) did not reach tol={tol} in {max_iter} steps"
    )


# -- minimax over trigonometric correctors --------------------------------


def _cell_samples(dimension, per_axis=None):
    if per_axis is None:
        per_axis = 64 if dimension == 1 else 16
    axis = np.arange(per_axis) / per_axis
    return np.stack(np.meshgrid(*([axis] * dimension), indexing="ij"), -1).reshape(
        -1, dimension
    )


def closed_measure_bound(model: MicroModel, P):
    """A lower bound for H̄(P) from two families of closed measures.

    Rest points give max_q inf_p H(q, p); uniform rotation with constant
    velocity v gives P·v − mean_q 𝖫(q, v). Both are at most H̄(P).
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    q = _cell_samples(model.dimension)
    if model.kind == "quadratic":
        u = model.periodic_potential(q)
        return max(-float(np.min(u)), 0.5 * float(P @ P) - float(np.mean(u)))

    rest, saturated = model.lagrangian(q, np.zeros_like(q))
    candidates = []
    if not np.all(saturated):
        candidates.append(float(np.max(-rest[~saturated])))
    axis = model.momentum_axis
    per_axis = 17 if model.dimension == 1 else 9
    v_axis = np.linspace(axis[0], axis[-1], per_axis)
    for v in np.stack(np.meshgrid(*([v_axis] * model.dimension), indexing="ij"), -1).reshape(
        -1, model.dimension
    ):
        values, saturated = model.lagrangian(q, np.broadcast_to(v, q.shape))
        if not np.any(saturated):
            candidates.append(float(P @ v - np.mean(values)))
    if not candidates:
        logger.warning("closed_measure_bound: every candidate saturated the momentum grid")
        return -np.inf
    return max(candidates)


def _qgrid_axes(qgrid, dimension, modes):
    if qgrid is None:
        n = max(128, 16 * modes) if dimension == 1 else max(32, 4 * modes)
        return [np.arange(n) / n for _ in range(dimension)]
    if isinstance(qgrid, GridFunction):
        return list(qgrid.axes)
    if np.isscalar(qgrid):
        n = int(qgrid)
        return [np.arange(n) / n for _ in range(dimension)]
    return [np.asarray(a, dtype=float) for a in qgrid]


def _mesh(axes):
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(axes))


class _CellObjective:
    """q ↦ H(q, P + ∇φ(q)) on a fixed set of cell points, as a function of
    the corrector coefficients."""

    def __init__(self, model, P, points, kvecs):
        self.model = model
        self.P = P
        self.points = points
        self.basis = gradient_basis(points, kvecs)
        if model.kind == "tabulated":
            axis = model.momentum_axis
            self.bounds = (axis[0], axis[-1])
        else:
            self.bounds = None

    def values(self, c):
        p = self.P + np.einsum("nmd,m->nd", self.basis, c)
        if self.bounds is None:
            return self.model.hamiltonian(self.points, p), self.model.grad_p(self.points, p)
        # quadratic continuation outside the tabulated momentum range
        clipped = np.clip(p, *self.bounds)
        excess = p - clipped
        h = self.model.hamiltonian(self.points, clipped)
        h = h + self.model.C * np.sum(np.square(excess), axis=-1)
        g = self.model.grad_p(self.points, clipped) + 2.0 * self.model.C * excess
        return h, g

    def soft(self, c, tau, sign):
        """τ·log Σ exp(sign·H/τ) and its gradient."""
        h, g = self.values(c)
        z = sign * h / tau
        weights = softmax(z)
        grad = sign * np.einsum("n,nd,nmd->m", weights, g, self.basis)
        return tau * logsumexp(z), grad


def _descend(objective, c0, sign, budget):
    c = c0
    converged = True
    for tau in SOFTMAX_TEMPERATURES:
        res = minimize(
            objective.soft,
            c,
            args=(tau, sign),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": budget},
        )
        c = res.x
        converged = res.status != 1
    return c, converged


def _dense_extremes(model, P, corrector, axes):
    """(min, max) of q ↦ H(q, P + ∇φ(q)) over the torus, from a dense grid
    widened by a curvature correction."""
    d = len(axes)
    factor = DENSE_FACTOR.get(d, 2)
    dense = [np.arange(len(a) * factor) / (len(a) * factor) for a in axes]
    points = _mesh(dense)
    p = P + corrector.gradient(points)
    if model.kind == "tabulated":
        axis = model.momentum_axis
        clipped = np.clip(p, axis[0], axis[-1])
        values = model.hamiltonian(points, clipped) + model.C * np.sum(
            np.square(p - clipped), axis=-1
        )
    else:
        values = model.hamiltonian(points, p)
    values = values.reshape(tuple(len(a) for a in dense))
    correction = 0.0
    for axis in range(d):
        second = np.roll(values, -1, axis) - 2 * values + np.roll(values, 1, axis)
        correction += float(np.max(np.abs(second))) / 8.0
    return float(np.min(values)) - correction, float(np.max(values)) + correction


def effective_h_minimax(
    model: MicroModel,
    P,
    modes=8,
    qgrid=None,
    budget=200,
    restarts=8,
    seed=0,
    key=(),
):
    """Bracket H̄(P) between a sup-inf and an inf-sup over trigonometric correctors.

    upper = min over φ of max_q H(q, P + ∇φ(q)) and the trigonometric lower
    estimate is max over φ of min_q H(q, P + ∇φ(q)). Both are found by
    L-BFGS-B on a soft-max (soft-min) relaxation over ``qgrid`` with a
    decreasing temperature, from φ = 0 and ``restarts − 1`` random starts,
    then evaluated exactly on a refined grid. The lower end is raised to
    :func:`closed_measure_bound` where that is larger, and capped at upper.

    Args:
        model: The microscopic Hamiltonian.
        P: Momentum vector of length d.
        modes: K, modes per axis of the corrector.
        qgrid: Points per axis, a list of axes, or a GridFunction over the
            cell. Defaults to at least 16 points per mode in 1D.
        budget: L-BFGS-B iterations per temperature.
        restarts: Number of starts.
        seed, key: Root seed and task key of the random starts.

    Returns:
        (lower, upper, corrector) where the corrector is the best one for
        the upper problem and carries ``converged``.
    """
    d = model.dimension
    if d >= 3:
        raise UnsupportedError(f"minimax cell solves support d <= 2, got d={d}")
    P = np.atleast_1d(np.asarray(P, dtype=float))
    if P.shape != (d,):
        raise ValueError(f"P must have {d} components, got shape {P.shape}")
    if modes < 0:
        raise ParameterError(f"modes must be nonnegative, got {modes}")
    axes = _qgrid_axes(qgrid, d, modes)
    if any(len(a) < 8 * modes for a in axes):
        logger.warning("qgrid has fewer than 8 points per corrector mode")

    kvecs = wavevectors(d, modes)
    size = 2 * len(kvecs)
    objective = _CellObjective(model, P, _mesh(axes), kvecs)

    starts = [np.zeros(size)]
    scale = np.sqrt(0.1 / max(modes, 1))
    for r in range(1, max(restarts, 1)):
        starts.append(task_rng(seed, *key, r).normal(scale=scale, size=size))
    if size == 0:
        starts = starts[:1]

    best_upper = None
    best_lower = -np.inf
    converged_low = True
    for c0 in starts:
        if size:
            c_up, ok_up = _descend(objective, c0, +1.0, budget)
            c_low, ok_low = _descend(objective, c0, -1.0, budget)
        else:
            c_up = c_low = c0
            ok_up = ok_low = True
        up = Corrector(P=P, modes=modes, coefficients=c_up)
        low, high = _dense_extremes(model, P, up, axes)
        if best_upper is None or high < best_upper[1]:
            best_upper = (low, high, c_up, ok_up)
        lower_candidate, _ = _dense_extremes(
            model, P, Corrector(P=P, modes=modes, coefficients=c_low), axes
        )
        if lower_candidate > best_lower:
            best_lower = lower_candidate
            converged_low = ok_low
    inf_value, upper, coefficients, converged_up = best_upper
    converged = bool(converged_up and converged_low)
    if not converged:
        logger.warning("effective_h_minimax: iteration budget exhausted at P=%s", P.tolist())

    lower = min(upper, max(best_lower, closed_measure_bound(model, P)))
    corrector = Corrector(
        P=P,
        modes=modes,
        coefficients=coefficients,
        sup_value=upper,
        inf_value=inf_value,
        converged=converged,
    )
    logger.debug("H̄(%s) in [%.6g, %.6g]", P.tolist(), lower, upper)
    return lower, upper, corrector


# -- tables ---------------------------------------------------------------


def build_table(
    model: MicroModel,
    P_axes,
    v_axes=None,
    modes=8,
    qgrid=None,
    budget=200,
    restarts=8,
    seed=0,
    threads=None,
    explicit=True,
):
    """Sample H̄ on a P grid and its dual 𝖫̄ on a v grid.

    Every P is an independent minimax task. In one dimension with the
    quadratic kind the explicit value is added when U_per is nonnegative.
    The v axes default to ±0.8·max|P| with as many points as the P axes.
    """
    d = model.dimension
    P_axes = [np.asarray(a, dtype=float) for a in P_axes]
    if len(P_axes) != d:
        raise ValueError(f"need {d} P axes, got {len(P_axes)}")
    if v_axes is None:
        v_axes = [np.linspace(-0.8 * np.max(np.abs(a)), 0.8 * np.max(np.abs(a)), len(a)) for a in P_axes]
    v_axes = [np.asarray(a, dtype=float) for a in v_axes]
    points = _mesh(P_axes)
    shape = tuple(len(a) for a in P_axes)
    logger.info("Building effective table on %i momenta", len(points))

    def solve(i):
        lower, upper, corrector = effective_h_minimax(
            model, points[i], modes, qgrid, budget, restarts, seed, key=(i,)
        )
        return lower, upper, corrector.converged

    results = map_tasks(solve, range(len(points)), threads)
    lower = np.array([r[0] for r in results]).reshape(shape)
    upper = np.array([r[1] for r in results]).reshape(shape)
    converged = all(r[2] for r in results)

    explicit_values = None
    if explicit and d == 1 and model.kind == "quadratic":
        try:
            explicit_values = np.array([effective_h_1d(model, P[0]) for P in points])
        except InvalidModelError as e:
            logger.info("No explicit values: %s", e)

    midpoint = GridFunction(axes=P_axes, values=0.5 * (lower + upper))
    lagrangian = legendre(midpoint, v_axes).values
    return EffectiveTable(
        P_axes=P_axes,
        v_axes=v_axes,
        lower=lower,
        upper=upper,
        explicit=explicit_values,
        lagrangian=lagrangian,
        converged=converged,
    )


def effective_lagrangian(table: EffectiveTable, v, with_saturation=False):
    """𝖫̄(v) = max over the P grid of (v·P − H̄(P)) with bracket midpoints.

    A maximizer on the edge of the P grid is logged as saturation; with
    ``with_saturation`` the result is a (value, saturated) pair.
    """
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if table.closed_form == "quadratic":
        value, saturated = 0.5 * float(v @ v), False
    else:
        f = GridFunction(axes=table.P_axes, values=table.midpoint)
        g = legendre(f, [[vi] for vi in v])
        value, saturated = float(g.values.reshape(-1)[0]), g.saturated
        if saturated:
            logger.warning("effective_lagrangian: supremum at the P grid boundary for v=%s", v)
    if with_saturation:
        return value, saturated
    return value


def legendre_slack(table: EffectiveTable, P):
    """H̄(P) − max over the v grid of (P·v − 𝖫̄(v)); nonnegative."""
    return table.hbar(P) - table.hbar_hat(P)


class EffectiveCost:
    """The continuum running cost

        (1/N) Σ_i [𝖫̄(v_i) + U(x_i) + (V * ρ)(x_i)]

    on configurations of shape (..., N, d). Velocities outside the v grid
    are clipped with a quadratic penalty so optimizers can pass through;
    :meth:`check_range` rejects final paths that still leave the grid.
    """

    has_gradient = True

    def __init__(self, table: EffectiveTable, macro: MacroPotentials, penalty=10.0):
        self.table = table
        self.macro = macro
        self.penalty = float(penalty)

    def _kinetic(self, v):
        clipped = self.table.clip_v(v)
        excess = v - clipped
        return self.table.lbar(clipped) + self.penalty * np.sum(np.square(excess), axis=-1)

    def per_particle(self, x, v):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        return self._kinetic(v) + self.macro.U(x) + self.macro.interaction(x)

    def value(self, x, v):
        terms = self.per_particle(x, v)
        return np.sort(terms, axis=-1).sum(axis=-1) / terms.shape[-1]

    def grad_x(self, x, v):
        x = np.asarray(x, dtype=float)
        grad = self.macro.grad_U(x) + 2.0 * self.macro.interaction_gradient(x)
        return grad / x.shape[-2]

    def grad_v(self, x, v):
        v = np.asarray(v, dtype=float)
        clipped = self.table.clip_v(v)
        grad = self.table.grad_lbar(clipped) + 2.0 * self.penalty * (v - clipped)
        return grad / v.shape[-2]

    def check_range(self, v):
        """Raise ExtrapolationError for the first velocity outside the v grid."""
        v = np.asarray(v, dtype=float)
        inside = self.table.in_v_range(v)
        if not np.all(inside):
            offending = v[~inside][0]
            raise ExtrapolationError(
                f"velocity {offending.tolist()} outside the effective Lagrangian table",
                velocity=offending,
            )

    def resting_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(self.value(x, np.zeros_like(x)))

    def infimum(self):
        if self.table.closed_form == "quadratic":
            inf_l = 0.0
        else:
            inf_l = float(np.min(self.table.lagrangian))
        return inf_l + self.macro.inf_U + self.macro.inf_V

    def sup_h_at_rest(self):
        """H̄(0)."""
        return float(self.table.hbar(np.zeros(self.table.dimension)))


# -- Moreau–Yosida regularization -----------------------------------------


def _quadratic_growth(w: GridFunction):
    q = w.points()
    return float(np.max(np.abs(w.flat_values()) / (1.0 + np.sum(np.square(q), axis=-1))))


def _check_eps(w, eps):
    if not eps > 0:
        raise ParameterError(f"eps must be positive, got {eps}")
    growth = _quadratic_growth(w)
    if growth > 0 and eps >= 1.0 / (2.0 * growth):
        raise ParameterError(
            f"eps={eps} outside the admissible range (0, {1.0 / (2.0 * growth):.6g}) "
            f"for growth constant {growth:.6g}"
        )


def _convolve(w: GridFunction, scale, sign):
    """Grid inf-convolution (sign < 0) or sup-convolution (sign > 0) with
    |q − q'|² / scale, keeping the extremizing indices."""
    q = w.points()
    values = w.flat_values()
    out = np.empty(len(q))
    arg = np.empty(len(q), dtype=np.int64)
    chunk = max(1, MOREAU_CHUNK_ELEMENTS // max(1, len(q)))
    for start in range(0, len(q), chunk):
        block = q[start : start + chunk]
        dist2 = np.sum(np.square(block[:, None, :] - q[None, :, :]), axis=-1)
        if sign < 0:
            candidates = values[None, :] + dist2 / scale
            idx = np.argmin(candidates, axis=1)
        else:
            candidates = values[None, :] - dist2 / scale
            idx = np.argmax(candidates, axis=1)
        arg[start : start + chunk] = idx
        out[start : start + chunk] = candidates[np.arange(len(idx)), idx]
    return GridFunction(axes=w.axes, values=out.reshape(w.values.shape), domain="box", arg=arg)


def moreau_inf(w: GridFunction, eps) -> GridFunction:
    """w_ε(q') = min over grid q'' of (w(q'') + |q' − q''|² / (2ε)).

    Raises:
        ParameterError: unless 0 < ε < 1/(2 C_w), C_w = max |w(q)| / (1 + |q|²)
    """
    _check_eps(w, eps)
    return _convolve(w, 2.0 * eps, -1)


def moreau_sup(w_eps: GridFunction, eps) -> GridFunction:
    """v_ε(q) = max over grid q' of (w_ε(q') − |q − q'|² / ε)."""
    _check_eps(w_eps, eps)
    return _convolve(w_eps, eps, +1)


def moreau_gradient_check(w: GridFunction, eps):
    """Check the gradient and argmax bounds of the double regularization on a 1D grid.

    With q' the maximizer defining v_ε(q) and q̃ the minimizer defining
    w_ε(q'), the centered difference of v_ε at q must not exceed four
    times the local Lipschitz slope of w at q̃, plus a grid slack 4h/ε.
    Also |q' − q|² ≤ 2ε (w(q) − w(q̂)) with q̂ the minimizer at q.

    Returns:
        dict with ``gradient_violation`` and ``argmax_violation`` (both 0
        when the bounds hold), the ``slack`` used and the number of
        ``checked`` interior points.
    """
    if w.ndim != 1:
        raise UnsupportedError("moreau_gradient_check works on one-dimensional grids")
    w_eps = moreau_inf(w, eps)
    v_eps = moreau_sup(w_eps, eps)
    q = w.axes[0]
    n = len(q)
    h = float(q[1] - q[0])
    values = w.values

    slopes = np.abs(np.diff(values)) / h
    local = np.zeros(n)
    local[:-1] = slopes
    local[1:] = np.maximum(local[1:], slopes)

    q_prime = v_eps.arg
    q_tilde = w_eps.arg[q_prime]
    index = np.arange(n)
    interior = (
        (index > 0)
        & (index < n - 1)
        & (q_prime > 0)
        & (q_prime < n - 1)
        & (q_tilde > 0)
        & (q_tilde < n - 1)
    )
    v = v_eps.values
    slack = 4.0 * h / eps
    gradient_violation = 0.0
    if np.any(interior):
        i = index[interior]
        grad = (v[i + 1] - v[i - 1]) / (2.0 * h)
        bound = 4.0 * local[q_tilde[interior]] + slack
        gradient_violation = float(max(0.0, np.max(np.abs(grad) - bound)))

    lhs = np.square(q[q_prime] - q)
    rhs = 2.0 * eps * (values - values[w_eps.arg])
    argmax_violation = float(max(0.0, np.max(lhs - rhs - 1e-12)))
    return {
        "gradient_violation": gradient_violation,
        "argmax_violation": argmax_violation,
        "slack": slack,
        "checked": int(np.count_nonzero(interior)),
    }
