"""Rescaled N-particle flow, path actions and minimal actions."""

import logging
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from hydrolab.BaseObject import ParameterError, UnsupportedIntegratorError
from hydrolab.model import ParticleLagrangian, hn_force, rescaled_hn
from hydrolab.parallel import map_tasks, task_rng
from hydrolab.ParticleState import ParticleState
from hydrolab.PathEnsemble import PathEnsemble
from hydrolab.Trajectory import Trajectory

logger = logging.getLogger(__name__)

GAUSS_NODES = 0.5 + 0.5 * np.array([-np.sqrt(0.6), 0.0, np.sqrt(0.6)])
GAUSS_WEIGHTS = np.array([5.0, 8.0, 5.0]) / 18.0


class ActionResult(NamedTuple):
    value: float
    path: PathEnsemble
    converged: bool


# -- integrators ----------------------------------------------------------


def _record(times, xs, Ps, energies, t, x, P, model, macro, eps):
    times.append(t)
    xs.append(x.copy())
    Ps.append(P.copy())
    energies.append(rescaled_hn(model, macro, eps, x, P))


def integrate(state: ParticleState, model, macro, dt, steps, allow_fallback=False, record_every=1):
    """Störmer–Verlet (kick-drift-kick) integration of the rescaled flow

        ẋ_i = ∇_p H(x_i/ε, P_i),
        Ṗ_i = −(1/ε) ∇_q H(x_i/ε, P_i) + ∇U(x_i) + (2/N) Σ_j ∇V(x_i − x_j).

    Args:
        state: Initial state; its ``eps`` sets the scale.
        dt: Time step. Steps above ε/10 are allowed with a warning.
        steps: Number of steps.
        allow_fallback: Integrate tabulated models with :func:`integrate_rk4`
            instead of raising.
        record_every: Keep every k-th state (the last one is always kept).

    Raises:
        UnsupportedIntegratorError: for tabulated models without fallback
    """
    if model.kind != "quadratic":
        if not allow_fallback:
            raise UnsupportedIntegratorError(
                "leapfrog needs a separable quadratic-kinetic model; "
                "pass allow_fallback=True for the fourth-order explicit integrator"
            )
        logger.warning("Tabulated model: using the non-symplectic fourth-order integrator")
        return integrate_rk4(state, model, macro, dt, steps, record_every)
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    eps = state.eps
    if dt > eps / 10:
        logger.warning("dt=%g exceeds eps/10=%g; the fast scale is under-resolved", dt, eps / 10)

    x = state.x.copy()
    P = state.P.copy()
    times, xs, Ps, energies = [], [], [], []
    _record(times, xs, Ps, energies, state.t, x, P, model, macro, eps)
    force = hn_force(model, macro, eps, x, P)
    for step in range(1, steps + 1):
        P = P + 0.5 * dt * force
        x = x + dt * P
        force = hn_force(model, macro, eps, x, P)
        P = P + 0.5 * dt * force
        if step % record_every == 0 or step == steps:
            _record(times, xs, Ps, energies, state.t + step * dt, x, P, model, macro, eps)
    return Trajectory(
        times=np.array(times),
        x=np.array(xs),
        P=np.array(Ps),
        energy=np.array(energies),
        eps=float(eps),
        symplectic=True,
    )


def integrate_rk4(state: ParticleState, model, macro, dt, steps, record_every=1):
    """Classical fourth-order Runge–Kutta for the same flow (any model kind)."""
    if not dt > 0:
        raise ParameterError(f"dt must be positive, got {dt}")
    eps = state.eps

    def rhs(x, P):
        return model.grad_p(x / eps, P), hn_force(model, macro, eps, x, P)

    x = state.x.copy()
    P = state.P.copy()
    times, xs, Ps, energies = [], [], [], []
    _record(times, xs, Ps, energies, state.t, x, P, model, macro, eps)
    for step in range(1, steps + 1):
        k1x, k1p = rhs(x, P)
        k2x, k2p = rhs(x + 0.5 * dt * k1x, P + 0.5 * dt * k1p)
        k3x, k3p = rhs(x + 0.5 * dt * k2x, P + 0.5 * dt * k2p)
        k4x, k4p = rhs(x + dt * k3x, P + dt * k3p)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        P = P + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        if step % record_every == 0 or step == steps:
            _record(times, xs, Ps, energies, state.t + step * dt, x, P, model, macro, eps)
    return Trajectory(
        times=np.array(times),
        x=np.array(xs),
        P=np.array(Ps),
        energy=np.array(energies),
        eps=float(eps),
        symplectic=False,
    )


# -- actions --------------------------------------------------------------


def path_integral(knots, positions, integrand, fractions=None, weights=None, gradient=False):
    """Σ_k Σ_g w_kg · F(z(t_kg), ż_k) for a piecewise-linear path.

    Args:
        knots: (M+1,) times.
        positions: (M+1, N, d) knot positions.
        integrand: object with ``value(z, v)`` on batches (..., N, d), and
            ``grad_x``/``grad_v`` when ``gradient`` is requested.
        fractions: (M, G) node positions inside each interval as fractions
            of its length; three-point Gauss by default.
        weights: (M, G) quadrature weights including the interval length;
            Gauss weights times Δt by default.

    Returns:
        (value, grad) with grad of shape (M+1, N, d) or None.
    """
    knots = np.asarray(knots, dtype=float)
    positions = np.asarray(positions, dtype=float)
    dt = np.diff(knots)
    M = len(dt)
    if fractions is None:
        fractions = np.broadcast_to(GAUSS_NODES, (M, 3))
        weights = GAUSS_WEIGHTS[None, :] * dt[:, None]
    s = fractions[:, :, None, None]
    x0 = positions[:-1, None]
    x1 = positions[1:, None]
    z = (1.0 - s) * x0 + s * x1
    v = np.broadcast_to(((positions[1:] - positions[:-1]) / dt[:, None, None])[:, None], z.shape)
    values = integrand.value(z, v)
    total = float(np.sum(weights * values))
    if not gradient:
        return total, None
    gx = integrand.grad_x(z, v)
    gv = integrand.grad_v(z, v)
    w = weights[:, :, None, None]
    inv_dt = (1.0 / dt)[:, None, None, None]
    left = np.sum(w * ((1.0 - s) * gx - gv * inv_dt), axis=1)
    right = np.sum(w * (s * gx + gv * inv_dt), axis=1)
    grad = np.zeros_like(positions)
    grad[:-1] += left
    grad[1:] += right
    return total, grad


def action_of_path(path: PathEnsemble, model, macro, eps, cost=None) -> float:
    """∫ L_N(z, ż) dt with three-point Gauss quadrature on every interval."""
    cost = cost or ParticleLagrangian(model, macro, eps)
    value, _ = path_integral(path.knots, path.positions, cost)
    return value


def _minimize_interior(objective, start, fixed_first, fixed_last, budget, has_gradient):
    interior_shape = start[1:-1].shape

    def fun(flat):
        positions = np.concatenate(
            [fixed_first[None], flat.reshape(interior_shape), fixed_last[None]], axis=0
        )
        value, grad = objective(positions, has_gradient)
        if has_gradient:
            return value, grad[1:-1].ravel()
        return value

    res = minimize(
        fun,
        start[1:-1].ravel(),
        jac=True if has_gradient else None,
        method="L-BFGS-B",
        options={"maxiter": budget},
    )
    return res.x.reshape(interior_shape), float(res.fun), res.status != 1


def minimal_action(
    x0,
    x1,
    T,
    model,
    macro,
    eps,
    knots=16,
    budget=200,
    restarts=4,
    seed=0,
    warm_start=None,
    cost=None,
    threads=None,
):
    """Smallest action found over piecewise-linear paths from x0 to x1 in time T.

    The straight line (or ``warm_start`` resampled to the new knots) is the
    first start; the others perturb its interior knots. The result is an
    upper bound on the true minimal action.

    Returns:
        ActionResult(value, path, converged)
    """
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    if knots < 1:
        raise ParameterError(f"need at least one interval, got knots={knots}")
    cost = cost or ParticleLagrangian(model, macro, eps)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    if x0.ndim == 1:
        x0, x1 = x0[:, None], x1[:, None]
    t = np.linspace(0.0, float(T), knots + 1)
    straight = PathEnsemble.straight(x0, x1, t)

    def objective(positions, with_grad):
        return path_integral(t, positions, cost, gradient=with_grad)

    base = straight.positions if warm_start is None else warm_start.resample(t).positions
    starts = [base]
    if warm_start is not None:
        starts.append(straight.positions)
    scale = 0.1 * (1.0 + float(np.max(np.abs(x1 - x0))))
    for r in range(1, max(restarts, 1)):
        noise = task_rng(seed, r).normal(scale=scale, size=base.shape)
        noise[0] = noise[-1] = 0.0
        starts.append(base + noise)

    if knots == 1:
        value, _ = objective(straight.positions, False)
        return ActionResult(value, straight.with_positions(straight.positions, action=value), True)

    def run(start):
        start_value, _ = objective(start, False)
        interior, value, ok = _minimize_interior(objective, start, x0, x1, budget, cost.has_gradient)
        positions = np.concatenate([x0[None], interior, x1[None]], axis=0)
        value, _ = objective(positions, False)
        if start_value < value:
            return start_value, start, ok
        return value, positions, ok

    results = map_tasks(run, starts, threads)
    best = min(range(len(results)), key=lambda i: (results[i][0], i))
    value, positions, converged = results[best]
    if not converged:
        logger.warning("minimal_action: iteration budget exhausted")
    return ActionResult(value, straight.with_positions(positions, action=value), bool(converged))
