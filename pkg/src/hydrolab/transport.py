"""Optimal transport between equally weighted empirical measures."""

import heapq
import itertools
import logging
import math

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import linear_sum_assignment, linprog

from hydrolab.BaseObject import (
    InvalidInputError,
    ParameterError,
    SizeLimitError,
    UnsupportedError,
)
from hydrolab.EmpiricalMeasure import EmpiricalMeasure
from hydrolab.model import sorted_sum
from hydrolab.PhaseMeasure import MultiPhaseMeasure, PhaseMeasure
from hydrolab.Plan import Plan

logger = logging.getLogger(__name__)

TIE_TOLERANCE = 1e-9
BRUTE_FORCE_LIMIT = 8
LP_LIMIT = 5


def _atoms(measure):
    if isinstance(measure, EmpiricalMeasure):
        return measure.atoms
    atoms = np.asarray(measure, dtype=float)
    return atoms[:, None] if atoms.ndim == 1 else atoms


def _check_p(p):
    if not p >= 1:
        raise ParameterError(f"transport order p must be >= 1, got {p}")


def _check_sizes(x, y):
    if len(x) != len(y):
        raise UnsupportedError(
            f"equal-weight transport needs equal atom counts, got {len(x)} and {len(y)}"
        )
    if x.shape[1] != y.shape[1]:
        raise InvalidInputError(f"dimension mismatch: {x.shape[1]} and {y.shape[1]}")


def cost_matrix(x, y, p):
    """C_ij = |x_i − y_j|^p, with squared distances accumulated in extended precision."""
    diff = x[:, None, :].astype(np.longdouble) - y[None, :, :].astype(np.longdouble)
    d2 = np.sum(diff * diff, axis=-1)
    if p == 2:
        return d2.astype(float)
    return np.power(d2, np.longdouble(p) / 2).astype(float)


def _matching_cost(cost, perm):
    return math.fsum(cost[np.arange(len(perm)), perm]) / len(perm)


def _lexicographic_optimum(cost, tol):
    """The lexicographically smallest permutation whose averaged cost is within
    ``tol`` of the optimum.

    Each row may try every smaller free column against a reduced assignment
    problem, so the worst case is O(N²) solves of O(N³) each, O(N⁵) overall.
    Rows whose optimal column is already the smallest free one cost nothing.
    """
    n = len(cost)
    _, cols = linear_sum_assignment(cost)
    best = _matching_cost(cost, cols)
    perm = cols.copy()
    free = list(range(n))
    fixed = 0.0
    for i in range(n):
        for j in free:
            if j >= perm[i]:
                break
            rest_cols = np.array([c for c in free if c != j], dtype=np.int64)
            if len(rest_cols):
                sub = cost[np.ix_(np.arange(i + 1, n), rest_cols)]
                _, c = linear_sum_assignment(sub)
                tail = math.fsum(sub[np.arange(len(c)), c])
            else:
                c = np.array([], dtype=np.int64)
                tail = 0.0
            if (fixed + cost[i, j] + tail) / n <= best + tol:
                perm[i] = j
                perm[i + 1 :] = rest_cols[c]
                break
        fixed += cost[i, perm[i]]
        free.remove(perm[i])
    return perm


def wasserstein(rho, gamma, p=2.0, tol=TIE_TOLERANCE):
    """W_p between equally weighted measures and an optimal matching.

    The matching is the lexicographically smallest among those whose cost
    ties the optimum to within ``tol``. Tie-breaking is O(N⁵) in the worst
    case; ``tol=None`` keeps the assignment solver's own matching in O(N³).

    Returns:
        (distance, plan)

    Raises:
        UnsupportedError: for unequal atom counts
        ParameterError: for p < 1
    """
    _check_p(p)
    x, y = _atoms(rho), _atoms(gamma)
    _check_sizes(x, y)
    cost = cost_matrix(x, y, p)
    if tol is None:
        perm = linear_sum_assignment(cost)[1]
    else:
        perm = _lexicographic_optimum(cost, tol)
    value = _matching_cost(cost, perm)
    plan = Plan(mode="matching", permutation=perm, cost=value, p=float(p))
    return plan.distance, plan


def distance(rho, gamma, p=2.0):
    """W_p only; one-dimensional measures are matched by sorting."""
    _check_p(p)
    x, y = _atoms(rho), _atoms(gamma)
    _check_sizes(x, y)
    if x.shape[1] == 1:
        gap = np.abs(np.sort(x[:, 0]) - np.sort(y[:, 0])) ** p
        return (sorted_sum(gap) / len(x)) ** (1.0 / p)
    return wasserstein(rho, gamma, p)[0]


def quotient_metric_bruteforce(x, y, p=2.0):
    """min over all permutations σ of ((1/N) Σ |x_i − y_σ(i)|^p)^(1/p).

    Raises:
        SizeLimitError: for N > 8
    """
    _check_p(p)
    x, y = _atoms(x), _atoms(y)
    _check_sizes(x, y)
    n = len(x)
    if n > BRUTE_FORCE_LIMIT:
        raise SizeLimitError(f"factorial enumeration is limited to N <= {BRUTE_FORCE_LIMIT}, got {n}")
    cost = cost_matrix(x, y, p)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    totals = cost[np.arange(n)[None, :], perms].sum(axis=1)
    best = perms[int(np.argmin(totals))]
    return _matching_cost(cost, best) ** (1.0 / p)


def _murty(cost, tol, limit):
    """Assignments in order of increasing cost while within ``tol`` of the optimum."""
    n = len(cost)

    def solve(include, exclude):
        m = cost.copy()
        for i, j in exclude:
            m[i, j] = np.inf
        for i, j in include:
            keep = m[i, j]
            m[i, :] = np.inf
            m[:, j] = np.inf
            m[i, j] = keep
        try:
            _, cols = linear_sum_assignment(m)
        except ValueError:
            return None
        if not np.all(np.isfinite(m[np.arange(n), cols])):
            return None
        return cols

    first = solve([], [])
    best = _matching_cost(cost, first)
    counter = itertools.count()
    heap = [(best, next(counter), tuple(first), (), frozenset())]
    found = []
    while heap and len(found) < limit:
        value, _, perm, include, exclude = heapq.heappop(heap)
        if value > best + tol:
            break
        found.append(perm)
        fixed_rows = {i for i, _ in include}
        include = list(include)
        for i in range(n):
            if i in fixed_rows:
                continue
            branch_exclude = exclude | {(i, perm[i])}
            cols = solve(include, branch_exclude)
            if cols is not None:
                heapq.heappush(
                    heap,
                    (_matching_cost(cost, cols), next(counter), tuple(cols), tuple(include), branch_exclude),
                )
            include.append((i, perm[i]))
    return found


def optimal_matchings(rho, gamma, p=2.0, tol=TIE_TOLERANCE, limit=24):
    """All optimal matchings at cost-tie tolerance ``tol``, lexicographically sorted.

    Exhaustive for N <= 8, ranked enumeration of assignments above. At
    most ``limit`` matchings are returned.
    """
    _check_p(p)
    x, y = _atoms(rho), _atoms(gamma)
    _check_sizes(x, y)
    cost = cost_matrix(x, y, p)
    n = len(x)
    if n <= BRUTE_FORCE_LIMIT:
        perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
        totals = cost[np.arange(n)[None, :], perms].sum(axis=1) / n
        keep = perms[totals <= totals.min() + tol]
        return [np.array(perm) for perm in keep[:limit]]
    found = _murty(cost, tol, limit)
    if len(found) == limit:
        logger.info("optimal_matchings: stopped at %i tied matchings", limit)
    return [np.array(perm, dtype=np.int64) for perm in sorted(found)]


def wasserstein_lp(rho, gamma, p=2.0):
    """W_p from the doubly-stochastic linear program (oracle, N <= 5).

    Returns:
        (distance, plan) with a matrix-mode plan
    """
    _check_p(p)
    x, y = _atoms(rho), _atoms(gamma)
    _check_sizes(x, y)
    n = len(x)
    if n > LP_LIMIT:
        raise SizeLimitError(f"the LP oracle is limited to N <= {LP_LIMIT}, got {n}")
    cost = cost_matrix(x, y, p)
    rows = np.kron(np.eye(n), np.ones(n))
    cols = np.kron(np.ones(n), np.eye(n))
    res = linprog(
        cost.reshape(-1),
        A_eq=np.vstack([rows, cols]),
        b_eq=np.full(2 * n, 1.0 / n),
        bounds=(0, None),
        method="highs",
    )
    matrix = np.clip(res.x.reshape(n, n), 0.0, None)
    plan = Plan(mode="matrix", matrix=matrix, cost=float(np.sum(matrix * cost)), p=float(p))
    return plan.distance, plan


def w2_1d(rho, gamma):
    """Quadratic transport distance between 1D measures of any sizes.

    Uses the monotone (quantile) coupling: both quantile functions are
    piecewise constant, so the integral is a finite sum.
    """
    x, y = _atoms(rho), _atoms(gamma)
    if x.shape[1] != 1 or y.shape[1] != 1:
        raise UnsupportedError("w2_1d needs one-dimensional measures")
    x, y = np.sort(x[:, 0]), np.sort(y[:, 0])
    breaks = np.union1d(np.arange(len(x) + 1) / len(x), np.arange(len(y) + 1) / len(y))
    mids = 0.5 * (breaks[1:] + breaks[:-1])
    widths = np.diff(breaks)
    i = np.minimum((mids * len(x)).astype(int), len(x) - 1)
    j = np.minimum((mids * len(y)).astype(int), len(y) - 1)
    return math.sqrt(sorted_sum(widths * np.square(x[i] - y[j])))


def w2_to_quantile(rho, ppf, order=16):
    """Quadratic transport distance from a 1D empirical measure to a continuous
    law given by its quantile function ``ppf``.

    Each atom's mass interval is integrated with Gauss–Legendre nodes, which
    never touch the (possibly infinite) endpoints of the quantile function.
    """
    x = np.sort(_atoms(rho)[:, 0])
    n = len(x)
    nodes, weights = leggauss(order)
    left = np.arange(n)[:, None] / n
    s = left + (nodes[None, :] + 1.0) / (2.0 * n)
    gap = np.square(x[:, None] - ppf(s))
    return math.sqrt(sorted_sum((gap @ weights) / (2.0 * n)))


def geodesic(rho, gamma, t):
    """Displacement interpolation (1 − t) x_i + t y_σ(i) along the optimal matching."""
    x, y = _atoms(rho), _atoms(gamma)
    _, plan = wasserstein(rho, gamma, 2.0)
    t = float(t)
    return EmpiricalMeasure((1.0 - t) * x + t * y[plan.permutation])


def barycentric_projection(nu: MultiPhaseMeasure) -> PhaseMeasure:
    """Replace every atom's velocity list by its weighted mean."""
    means = []
    for i, (v, w) in enumerate(zip(nu.velocities, nu.weights)):
        if len(v) == 0:
            raise InvalidInputError(f"atom {i} has an empty velocity list")
        means.append(w @ v / w.sum())
    return PhaseMeasure(atoms=nu.atoms, velocities=np.array(means))


def tangent_pairing(nu1: PhaseMeasure, nu2: PhaseMeasure) -> float:
    """⟨ν₁, ν₂⟩_ρ = (1/N) Σ v¹_i · v²_i over a common base measure.

    Raises:
        InvalidInputError: if the two measures sit on different atoms
    """
    if nu1.atoms.shape != nu2.atoms.shape or not np.array_equal(nu1.atoms, nu2.atoms):
        raise InvalidInputError("tangent_pairing needs both measures on the same atoms")
    products = np.sum(nu1.velocities * nu2.velocities, axis=-1)
    return sorted_sum(products) / nu1.N
