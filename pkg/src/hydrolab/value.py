"""Discounted resolvent values R_α h, their semigroup iteration, and the
particle-to-continuum convergence harness."""

import logging
import math
import threading
import time

import numpy as np
import pandas as pd
from scipy.optimize import minimize
from scipy.stats import norm

from hydrolab.BaseObject import IterationLimitError, ParameterError, PreconditionError
from hydrolab.cell import EffectiveCost
from hydrolab.dynamics import GAUSS_NODES, GAUSS_WEIGHTS, path_integral
from hydrolab.EffectiveTable import EffectiveTable
from hydrolab.EmpiricalMeasure import EmpiricalMeasure
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.MicroModel import MicroModel
from hydrolab.model import ParticleLagrangian
from hydrolab.parallel import map_tasks, task_rng
from hydrolab.PathEnsemble import PathEnsemble
from hydrolab.transport import w2_1d, w2_to_quantile
from hydrolab.ValueEstimate import ValueEstimate

logger = logging.getLogger(__name__)

SOLVER_DEFAULTS = {
    "knots": 16,
    "restarts": 4,
    "budget": 200,
    "tmax_tol": 1e-6,
    "refine_tol": 1e-4,
    "max_refinements": 2,
    "seed": 0,
    "threads": None,
}
# Inner solves of semigroup iterates and resolvent identities.
NESTED_SOLVER = {"knots": 8, "restarts": 1, "budget": 100, "max_refinements": 0, "threads": 1}
MEMO_RESOLUTION = 1e-6
ITERATE_BUDGET = 20000

CONVERGENCE_COLUMNS = ["N", "eps", "d_emp_to_target", "f_N", "f_limit", "error", "wall_time_s"]


def _configuration(x):
    if isinstance(x, EmpiricalMeasure):
        return x.atoms
    x = np.asarray(x, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _check_alpha(alpha):
    if not alpha > 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")


def _settings(overrides, base=SOLVER_DEFAULTS):
    unknown = set(overrides) - set(SOLVER_DEFAULTS)
    if unknown:
        raise TypeError(f"unknown solver settings: {sorted(unknown)}")
    return {**SOLVER_DEFAULTS, **base, **overrides}


def _level(cost):
    return "continuum" if isinstance(cost, EffectiveCost) else "particle"


# -- discounted path functional -------------------------------------------


def discount_knots(T, alpha, M):
    """M intervals carrying equal discounted weight on [0, T].

    Knots are uniform in u = e^{−t/α}, so doubling M keeps every old knot.
    """
    k = np.arange(M + 1)
    u = 1.0 - (k / M) * (1.0 - math.exp(-T / alpha))
    knots = -alpha * np.log(u)
    knots[0] = 0.0
    knots[-1] = T
    return knots


def discount_rule(knots, alpha):
    """Three-point Gauss rule in u = e^{−s/α} on every interval, for
    ∫ e^{−s/α} F(s) ds = α ∫ F du.

    Returns:
        (fractions, weights) in the layout of :func:`path_integral`
    """
    knots = np.asarray(knots, dtype=float)
    u = np.exp(-knots / alpha)
    du = u[:-1] - u[1:]
    ug = u[1:, None] + GAUSS_NODES[None, :] * du[:, None]
    s = -alpha * np.log(ug)
    fractions = (s - knots[:-1, None]) / np.diff(knots)[:, None]
    weights = alpha * du[:, None] * GAUSS_WEIGHTS[None, :]
    return fractions, weights


class _Payoff:
    """Running payoff h/α − L on batches of configurations."""

    def __init__(self, h, alpha, cost):
        self.h = h
        self.alpha = alpha
        self.cost = cost

    def value(self, z, v):
        return self.h.value(z) / self.alpha - self.cost.value(z, v)

    def grad_x(self, z, v):
        return self.h.gradient(z) / self.alpha - self.cost.grad_x(z, v)

    def grad_v(self, z, v):
        return -self.cost.grad_v(z, v)


def resting_payoff(h, alpha, cost, x):
    """h(x) − α·L(x, 0): the payoff of never moving."""
    x = _configuration(x)
    return float(h.value(x)) - alpha * cost.resting_value(x)


class _Functional:
    """J(z) = ∫₀^T e^{−s/α}(h/α − L) ds + e^{−T/α}(h(z_T) − α L(z_T, 0))."""

    def __init__(self, h, alpha, cost, knots):
        self.h = h
        self.alpha = alpha
        self.cost = cost
        self.knots = knots
        self.payoff = _Payoff(h, alpha, cost)
        self.fractions, self.weights = discount_rule(knots, alpha)
        self.decay = math.exp(-knots[-1] / alpha)

    def __call__(self, positions, with_grad=False):
        head, grad = path_integral(
            self.knots, positions, self.payoff, self.fractions, self.weights, gradient=with_grad
        )
        end = positions[-1]
        tail = self.decay * resting_payoff(self.h, self.alpha, self.cost, end)
        if with_grad:
            resting_grad = self.h.gradient(end) - self.alpha * self.cost.grad_x(end, np.zeros_like(end))
            grad[-1] += self.decay * resting_grad
        return head + tail, grad


def _ascend(functional, start, budget, has_gradient):
    x0 = start[0]
    shape = start[1:].shape

    def fun(flat):
        positions = np.concatenate([x0[None], flat.reshape(shape)], axis=0)
        value, grad = functional(positions, has_gradient)
        if has_gradient:
            return -value, -grad[1:].ravel()
        return -value

    res = minimize(
        fun,
        start[1:].ravel(),
        jac=True if has_gradient else None,
        method="L-BFGS-B",
        options={"maxiter": budget},
    )
    positions = np.concatenate([x0[None], res.x.reshape(shape)], axis=0)
    return positions, res.status != 1


def _run(functional, start, budget, has_gradient):
    """Local ascent from ``start``, keeping the start if it is better."""
    start_value, _ = functional(start)
    positions, converged = _ascend(functional, start, budget, has_gradient)
    value, _ = functional(positions)
    if start_value >= value:
        return start_value, start, converged
    return value, positions, converged


def _starts(h, alpha, x, knots, restarts, seed):
    """Resting path, a drift towards higher h, then random perturbations."""
    resting = np.broadcast_to(x, (len(knots),) + x.shape).copy()
    starts = [resting]
    if h.has_gradient:
        pull = len(x) * h.gradient(x)
        reach = (1.0 - np.exp(-knots / alpha)) * alpha / (1.0 + alpha)
        starts.append(x[None] + reach[:, None, None] * pull[None])
    scale = 0.1 * (1.0 + float(np.max(np.abs(x))))
    r = 1
    while len(starts) < restarts:
        noise = task_rng(seed, r).normal(scale=scale, size=resting.shape)
        noise[0] = 0.0
        starts.append(resting + noise)
        r += 1
    return starts[: max(restarts, 1)]


def horizon(h, alpha, cost, x, tol):
    """Truncation time T_max = α ln(max(Δ, tol)/tol), where Δ is the gap
    between the global payoff bound sup h − α inf L and the resting payoff
    at x.

    Raises:
        PreconditionError: if h is not bounded above
    """
    if not tol > 0:
        raise ParameterError(f"tmax_tol must be positive, got {tol}")
    top = h.sup() - alpha * cost.infimum()
    if not math.isfinite(top):
        raise PreconditionError("terminal data must be bounded above")
    spread = max(top - resting_payoff(h, alpha, cost, x), 0.0)
    return alpha * math.log(max(spread, tol) / tol), top


def _resolve(h, alpha, x, cost, settings, want_gradient=False, verbose=True):
    """Core of :func:`resolve`; optionally also ∂(R_α h)/∂x by the envelope
    theorem (the derivative of the payoff along the best path with respect
    to its starting point)."""
    _check_alpha(alpha)
    x = _configuration(x)
    level = _level(cost)
    T, top = horizon(h, alpha, cost, x, settings["tmax_tol"])
    has_gradient = bool(h.has_gradient and cost.has_gradient)

    # Canonical atom order: symmetric data give bit-identical values for
    # every relabelling of x.
    order = np.lexsort(x.T[::-1])
    inverse = np.argsort(order)
    xc = x[order]

    if T <= 0.0:
        value = resting_payoff(h, alpha, cost, xc)
        estimate = ValueEstimate(
            value=value,
            T_max=0.0,
            tail_bound=max(top - value, 0.0),
            knots=0,
            restarts=0,
            refinements=0,
            converged=True,
            level=level,
            lower_bound=level == "continuum",
        )
        if not want_gradient:
            return estimate, None
        grad = None
        if has_gradient:
            grad = h.gradient(x) - alpha * cost.grad_x(x, np.zeros_like(x))
        return estimate, grad

    if verbose:
        logger.info("Resolving N=%i d=%i at alpha=%g (T_max=%.3g)", *x.shape, alpha, T)
    M = int(settings["knots"])
    knots = discount_knots(T, alpha, M)
    functional = _Functional(h, alpha, cost, knots)
    starts = _starts(h, alpha, xc, knots, int(settings["restarts"]), settings["seed"])
    results = map_tasks(
        lambda start: _run(functional, start, settings["budget"], has_gradient),
        starts,
        settings["threads"],
    )
    best = max(range(len(results)), key=lambda i: (results[i][0], -i))
    value, positions, converged = results[best]

    refinements = 0
    while refinements < settings["max_refinements"]:
        finer = discount_knots(T, alpha, 2 * M)
        warm = PathEnsemble(knots=knots, positions=positions).resample(finer).positions
        functional = _Functional(h, alpha, cost, finer)
        new_value, positions, converged = _run(functional, warm, settings["budget"], has_gradient)
        refinements += 1
        change = abs(new_value - value)
        logger.debug("Refined to %i knots: value %.10g (change %.3g)", 2 * M, new_value, change)
        M, knots, value = 2 * M, finer, new_value
        if change < settings["refine_tol"]:
            break

    path = PathEnsemble(knots=knots, positions=positions[:, inverse], payoff=value)
    if hasattr(cost, "check_range"):
        cost.check_range(path.velocities())
    decay = math.exp(-T / alpha)
    tail_bound = decay * max(top - resting_payoff(h, alpha, cost, path.positions[-1]), 0.0)
    if not converged and verbose:
        logger.warning("resolve: iteration budget exhausted at %i knots", M)
    estimate = ValueEstimate(
        value=float(value),
        T_max=float(T),
        tail_bound=float(tail_bound),
        knots=M,
        restarts=len(starts),
        refinements=refinements,
        converged=bool(converged),
        level=level,
        lower_bound=level == "continuum",
        path=path,
    )
    if not want_gradient:
        return estimate, None
    grad = None
    if has_gradient:
        _, full = _Functional(h, alpha, cost, knots)(path.positions, True)
        grad = full[0]
    return estimate, grad


def resolve(h, alpha, x, cost, **settings) -> ValueEstimate:
    """(R_α h)(x): the best discounted payoff

        ∫₀^T e^{−s/α}(h(z)/α − L(z, ż)) ds + e^{−T/α}(h(z_T) − α L(z_T, 0))

    over piecewise-linear paths from x, for any running cost ``cost``
    (:class:`ParticleLagrangian` or :class:`EffectiveCost`).

    Settings (defaults in ``SOLVER_DEFAULTS``): ``knots`` (initial interval
    count, doubled up to ``max_refinements`` times until the value moves
    by less than ``refine_tol``), ``restarts``, ``budget`` (L-BFGS-B
    iterations per run), ``tmax_tol``, ``seed``, ``threads``.
    """
    estimate, _ = _resolve(h, alpha, x, cost, _settings(settings))
    return estimate


def resolve_particle(h, alpha, x, model: MicroModel, macro: MacroPotentials, eps, **settings):
    """f_N(x) = (R_{N,α} h_N)(x) with the N-particle running cost L_N."""
    return resolve(h, alpha, x, ParticleLagrangian(model, macro, eps), **settings)


def resolve_continuum(h, alpha, rho, table: EffectiveTable, macro: MacroPotentials, **settings):
    """f(ρ) = (R_α h)(ρ) restricted to paths that move the atoms of ρ.

    The running cost is (1/N₀) Σ [𝖫̄(v_i) + U(x_i) + (V*ρ_t)(x_i)]; the
    result is labelled a lower bound.

    Raises:
        ExtrapolationError: if the best path leaves the table's velocity grid
    """
    return resolve(h, alpha, rho, EffectiveCost(table, macro), **settings)


# -- iterates as terminal data --------------------------------------------


class ResolventIterate:
    """x ↦ (R_α h)(x) as terminal data for a further resolvent.

    Values are computed on demand and memoized on states quantized at
    ``MEMO_RESOLUTION``; concurrent writers of one key store the same value.
    After ``budget`` fresh solves an :class:`IterationLimitError` is raised.
    The cache and the solve count are guarded by a lock.
    """

    is_class_c = False

    def __init__(self, h, alpha, cost, settings=None, budget=ITERATE_BUDGET):
        _check_alpha(alpha)
        self.h = h
        self.alpha = float(alpha)
        self.cost = cost
        self.settings = _settings(settings or {}, NESTED_SOLVER)
        self.budget = int(budget)
        self.cache = {}
        self.evaluations = 0
        self._lock = threading.Lock()
        self.has_gradient = bool(h.has_gradient and cost.has_gradient)

    def _solve(self, x):
        key = tuple(np.round(x / MEMO_RESOLUTION).astype(np.int64).ravel().tolist())
        with self._lock:
            hit = self.cache.get(key)
            if hit is not None:
                return hit
            if self.evaluations >= self.budget:
                raise IterationLimitError(f"resolvent iterate exceeded its budget of {self.budget} solves")
            self.evaluations += 1
        estimate, grad = _resolve(
            self.h, self.alpha, x, self.cost, self.settings, want_gradient=True, verbose=False
        )
        entry = (estimate.value, grad)
        with self._lock:
            self.cache[key] = entry
        return entry

    def sup(self):
        """sup h + α (sup_q H(q, 0) − inf U − inf V)."""
        macro = self.cost.macro
        return self.h.sup() + self.alpha * (self.cost.sup_h_at_rest() - macro.inf_U - macro.inf_V)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape((-1,) + x.shape[-2:])
        return np.array([self._solve(config)[0] for config in flat]).reshape(x.shape[:-2])

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        flat = x.reshape((-1,) + x.shape[-2:])
        return np.array([self._solve(config)[1] for config in flat]).reshape(x.shape)


class _Combination:
    """Σ_k c_k h_k for non-negative coefficients."""

    is_class_c = False

    def __init__(self, terms):
        self.terms = [(float(c), h) for c, h in terms]
        self.has_gradient = all(h.has_gradient for _, h in self.terms)

    def sup(self):
        return sum(c * h.sup() for c, h in self.terms)

    def value(self, x):
        return sum(c * h.value(x) for c, h in self.terms)

    def gradient(self, x):
        return sum(c * h.gradient(x) for c, h in self.terms)


def semigroup(h, t, n, x, cost, budget=ITERATE_BUDGET, nested=None, **settings) -> ValueEstimate:
    """S(t)h(x) ≈ (R_{1/n})^{⌊nt⌋} h (x).

    Inner iterates are :class:`ResolventIterate` terminal data solved with
    the ``nested`` settings; the outermost resolvent uses ``settings``. If
    an iterate runs out of its budget the deepest iterate that still fits
    is returned with ``converged=False`` and ``iterations`` set to its depth.
    """
    if n < 1:
        raise ParameterError(f"n must be at least 1, got {n}")
    if t < 0:
        raise ParameterError(f"t must be non-negative, got {t}")
    x = _configuration(x)
    steps = int(math.floor(n * t + 1e-9))
    if steps == 0:
        value = float(h.value(x))
        return ValueEstimate(
            value=value, T_max=0.0, tail_bound=0.0, iterations=0, converged=True, level=_level(cost)
        )
    alpha = 1.0 / n
    resolved = _settings(settings)
    iterates = [h]
    for _ in range(steps - 1):
        iterates.append(ResolventIterate(iterates[-1], alpha, cost, nested, budget))
    logger.info("Semigroup: %i resolvent steps of size %g", steps, alpha)
    for depth in range(steps, 0, -1):
        try:
            estimate, _ = _resolve(iterates[depth - 1], alpha, x, cost, resolved)
        except IterationLimitError as exc:
            logger.warning("Semigroup: %s; falling back to %i steps", exc, depth - 1)
            continue
        data = dict(estimate._data, iterations=depth)
        if depth < steps:
            data["converged"] = False
        return ValueEstimate(_data=data)
    raise AssertionError("the first resolvent step has no budget to exceed")


def resolvent_identity_check(h, alpha, beta, points, cost, nested=None, **settings) -> float:
    """max over ``points`` of |R_α h − R_β((1 − β/α) R_α h + (β/α) h)|.

    Raises:
        ParameterError: unless alpha > beta > 0
    """
    if not (alpha > beta > 0):
        raise ParameterError(f"need alpha > beta > 0, got alpha={alpha}, beta={beta}")
    inner = ResolventIterate(h, alpha, cost, nested)
    blended = _Combination([(1.0 - beta / alpha, inner), (beta / alpha, h)])
    worst = 0.0
    for point in points:
        lhs = resolve(h, alpha, point, cost, **settings).value
        rhs = resolve(blended, beta, point, cost, **settings).value
        worst = max(worst, abs(lhs - rhs))
    return worst


def growth_bounds(h, alpha, x, cost):
    """The a-priori sandwich

        h(x) − α L(x, 0) ≤ (R_α h)(x) ≤ sup h + α (sup_q H(q, 0) − inf U − inf V).
    """
    _check_alpha(alpha)
    macro = cost.macro
    upper = h.sup() + alpha * (cost.sup_h_at_rest() - macro.inf_U - macro.inf_V)
    return {"lower": resting_payoff(h, alpha, cost, x), "upper": float(upper)}


def dpp_residual(estimate: ValueEstimate, h, alpha, cost, step=1, **settings) -> float:
    """|f(x) − (∫₀^τ e^{−s/α}(h/α − L) ds + e^{−τ/α} f(z(τ)))| along the
    best path, with τ its ``step``-th knot and f(z(τ)) solved afresh."""
    path = estimate.path
    if path is None:
        return 0.0
    step = int(min(max(step, 1), path.M))
    knots = path.knots[: step + 1]
    fractions, weights = discount_rule(knots, alpha)
    head, _ = path_integral(knots, path.positions[: step + 1], _Payoff(h, alpha, cost), fractions, weights)
    tail = resolve(h, alpha, path.positions[step], cost, **settings).value
    return abs(estimate.value - (head + math.exp(-knots[-1] / alpha) * tail))


# -- N → ∞ harness --------------------------------------------------------


def sample_cloud(target, n, rng=None, sampling="stratified"):
    """n atoms whose empirical measure approximates ``target``.

    ``target`` is a frozen one-dimensional ``scipy.stats`` law or an
    EmpiricalMeasure template. ``quantile`` sampling takes the mid-cell
    quantiles (i + ½)/n, ``stratified`` one uniform draw per cell.
    """
    if sampling == "quantile":
        levels = (np.arange(n) + 0.5) / n
    elif sampling == "stratified":
        levels = (np.arange(n) + rng.uniform(size=n)) / n
    else:
        raise ParameterError(f"unknown sampling scheme {sampling!r}")
    if isinstance(target, EmpiricalMeasure):
        atoms = np.sort(target.atoms[:, 0])
        return atoms[np.minimum((levels * len(atoms)).astype(int), len(atoms) - 1)][:, None]
    return target.ppf(levels)[:, None]


def _distance_to_target(x, target):
    if isinstance(target, EmpiricalMeasure):
        return w2_1d(x, target)
    return w2_to_quantile(x, target.ppf)


def converge_harness(
    h,
    target=None,
    alpha=1.0,
    schedule=((4, 0.5), (8, 8**-0.5), (16, 0.25), (32, 32**-0.5)),
    seed=0,
    sampling="stratified",
    proxy_atoms=64,
    macro=None,
    threads=None,
    **settings,
) -> pd.DataFrame:
    """Errors e_N = |f_N(x_N) − f(ρ)| of the free one-dimensional gas along
    a schedule of (N, ε_N).

    f(ρ) is the continuum value at the ``proxy_atoms`` mid-cell quantiles
    of ``target`` (standard normal by default); x_N is sampled from
    ``target`` with a stream keyed by (seed, N), so repeated entries agree.

    Raises:
        PreconditionError: for terminal data outside class 𝒞
    """
    if not getattr(h, "is_class_c", False):
        raise PreconditionError("the convergence harness needs class-C terminal data")
    target = norm() if target is None else target
    macro = macro or MacroPotentials()
    model = MicroModel(dimension=1, kind="quadratic", potential={"kind": "zero"})
    table = EffectiveTable.quadratic([np.linspace(-4.0, 4.0, 9)])
    proxy = sample_cloud(target, proxy_atoms, sampling="quantile")
    inner = dict(settings, seed=seed, threads=1)

    logger.info("Convergence harness: continuum value on %i proxy atoms", proxy_atoms)
    f_limit = resolve_continuum(h, alpha, proxy, table, macro, **inner).value

    def entry(item):
        n, eps = int(item[0]), float(item[1])
        started = time.perf_counter()
        x = sample_cloud(target, n, task_rng(seed, n), sampling)
        estimate = resolve_particle(h, alpha, x, model, macro, eps, **inner)
        return {
            "N": n,
            "eps": eps,
            "d_emp_to_target": _distance_to_target(x, target),
            "f_N": estimate.value,
            "f_limit": f_limit,
            "error": abs(estimate.value - f_limit),
            "wall_time_s": time.perf_counter() - started,
            "converged": estimate.converged,
        }

    rows = map_tasks(entry, schedule, threads)
    return pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS + ["converged"])


def eps_schedule(sizes, exponent=0.5):
    """[(N, N^(−exponent)) for N in sizes]."""
    return [(int(n), float(n) ** -exponent) for n in sizes]
