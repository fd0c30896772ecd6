"""Hamiltonian operators of distance-type test functions on empirical measures.

For f₀ = ψ(d²(·, γ_k)) and an evaluation measure ρ with atoms x_i, every
choice σ = (σ_1, …, σ_K) of optimal matchings gives the momenta

    P_i^σ = Σ_k 2 α_k (x_i − y^k_{σ_k(i)}),

and for f₁ = −ψ(d²(ρ_k, ·)) evaluated at γ with atoms y_i,

    P_i^σ = Σ_k 2 β_k (x^k_{σ_k(i)} − y_i).

ℍ₀ and 𝐇₁ take the sup of (1/N) Σ_i H̄(P_i^σ) − ⟨U + V*ρ, ρ⟩ over σ; 𝐇₀
and ℍ₁ take the inf. 𝐇f maximizes over grid velocities instead.
"""

import itertools
import logging

import numpy as np
from scipy.optimize import linprog

from hydrolab.BaseObject import InvalidInputError
from hydrolab.EffectiveTable import EffectiveTable
from hydrolab.EmpiricalMeasure import EmpiricalMeasure
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.model import sorted_sum
from hydrolab.OperatorValue import OperatorValue
from hydrolab.TestFunction import TestFunction
from hydrolab.transport import TIE_TOLERANCE, optimal_matchings

logger = logging.getLogger(__name__)

MATCHING_LIMIT = 24


def _atoms(measure):
    if isinstance(measure, EmpiricalMeasure):
        return measure.atoms
    atoms = np.asarray(measure, dtype=float)
    return atoms[:, None] if atoms.ndim == 1 else atoms


def potential_pairing(x, macro: MacroPotentials):
    """⟨U + V*ρ, ρ⟩ = (1/N) Σ_i [U(x_i) + (1/N) Σ_j V(x_i − x_j)]."""
    terms = macro.U(x) + macro.interaction(x)
    return sorted_sum(terms) / len(x)


def momenta(f: TestFunction, measure, tol=TIE_TOLERANCE):
    """All candidate momentum fields of ``f`` at ``measure``.

    Returns:
        list of (choice, P) with ``choice`` a tuple of permutations (one per
        anchor) and P of shape (N, d); ``choice`` runs over the product of
        the anchors' optimal-matching sets.
    """
    x = _atoms(measure)
    for anchor in f.anchors:
        if anchor.shape[1] != x.shape[1]:
            raise InvalidInputError(
                f"anchor dimension {anchor.shape[1]} does not match the measure's {x.shape[1]}"
            )
    coef = 2.0 * f.partials(f.radii(x))
    per_anchor = [optimal_matchings(x, anchor, 2.0, tol, MATCHING_LIMIT) for anchor in f.anchors]
    out = []
    for choice in itertools.product(*per_anchor):
        P = np.zeros_like(x)
        for c, anchor, perm in zip(coef, f.anchors, choice):
            if f.sign == "plus":
                P += c * (x - anchor[perm])
            else:
                P += c * (anchor[perm] - x)
        out.append((tuple(np.asarray(perm) for perm in choice), P))
    return out


def _hamiltonian_averages(candidates, table: EffectiveTable):
    return np.array([sorted_sum(table.hbar(P)) / len(P) for _, P in candidates])


def _extremum(name, f, measure, table, macro, pick, sign):
    if f.sign != sign:
        raise InvalidInputError(f"{name} needs a test function of sign {sign!r}, got {f.sign!r}")
    x = _atoms(measure)
    candidates = momenta(f, x)
    values = _hamiltonian_averages(candidates, table)
    best = int(pick(values))
    unique = all(len(set(map(tuple, choices))) == 1 for choices in zip(*[c for c, _ in candidates]))
    return OperatorValue(
        operator=name,
        value=float(values[best] - potential_pairing(x, macro)),
        plans=[perm.tolist() for perm in candidates[best][0]],
        candidates=len(candidates),
        unique=unique,
    )


def eval_bbH0(f0: TestFunction, rho, table: EffectiveTable, macro: MacroPotentials) -> OperatorValue:
    """ℍ₀f₀(ρ): the sup over optimal matchings.

    Raises:
        ExtrapolationError: if a momentum leaves a tabulated H̄ range
    """
    return _extremum("bbH0", f0, rho, table, macro, np.argmax, "plus")


def eval_bfH0(f0: TestFunction, rho, table: EffectiveTable, macro: MacroPotentials) -> OperatorValue:
    """𝐇₀f₀(ρ): the inf over optimal matchings."""
    return _extremum("bfH0", f0, rho, table, macro, np.argmin, "plus")


def eval_bbH1(f1: TestFunction, gamma, table: EffectiveTable, macro: MacroPotentials) -> OperatorValue:
    """ℍ₁f₁(γ): the inf over optimal matchings."""
    return _extremum("bbH1", f1, gamma, table, macro, np.argmin, "minus")


def eval_bfH1(f1: TestFunction, gamma, table: EffectiveTable, macro: MacroPotentials) -> OperatorValue:
    """𝐇₁f₁(γ): the sup over optimal matchings."""
    return _extremum("bfH1", f1, gamma, table, macro, np.argmax, "minus")


def _minimax_hat(candidates, table: EffectiveTable):
    """min over convex weights λ on the candidates of (1/N) Σ_i Ĥ(Σ_σ λ_σ P_i^σ),
    with Ĥ(P) = max over the v grid of (P·v − 𝖫̄(v)), as a linear program
    in (λ, t_1..t_N) with t_i ≥ Σ_σ λ_σ P_i^σ·v_j − 𝖫̄(v_j)."""
    S = len(candidates)
    n = len(candidates[0][1])
    v = table.v_points()
    lag = table.lagrangian.reshape(-1)
    # slopes[σ, i, j] = P_i^σ · v_j
    slopes = np.stack([P @ v.T for _, P in candidates])
    rows = []
    rhs = []
    for i in range(n):
        block = np.zeros((len(v), S + n))
        block[:, :S] = slopes[:, i, :].T
        block[:, S + i] = -1.0
        rows.append(block)
        rhs.append(lag)
    cost = np.concatenate([np.zeros(S), np.full(n, 1.0 / n)])
    res = linprog(
        cost,
        A_ub=np.vstack(rows),
        b_ub=np.concatenate(rhs),
        A_eq=np.concatenate([np.ones(S), np.zeros(n)])[None, :],
        b_eq=[1.0],
        bounds=[(0, None)] * S + [(None, None)] * n,
        method="highs",
    )
    if res.status != 0:
        logger.warning("eval_bfH: linear program ended with status %i (%s)", res.status, res.message)
    return float(res.fun)


def eval_bfH(f: TestFunction, rho, table: EffectiveTable, macro: MacroPotentials) -> float:
    """𝐇f(ρ) = sup over grid velocities of (d_ρ f(v) − L(v)).

    In the plus case the differential is the worst case over optimal
    matchings and their mixtures, so the sup over v becomes a min over
    mixtures of Ĥ (a linear program when several matchings tie); in the
    minus case it is the best matching.
    """
    x = _atoms(rho)
    candidates = momenta(f, x)
    hats = np.array([sorted_sum(table.hbar_hat(P)) / len(P) for _, P in candidates])
    if f.sign == "plus":
        value = float(hats[0]) if len(candidates) == 1 else min(_minimax_hat(candidates, table), float(hats.min()))
    else:
        value = float(hats.max())
    return value - potential_pairing(x, macro)


def eval_all(f: TestFunction, rho, table: EffectiveTable, macro: MacroPotentials) -> dict:
    """All six operator values at ``rho`` for the anchors and ψ of ``f``,
    using f for one sign and its mirror for the other."""
    plus = f if f.sign == "plus" else f.mirrored()
    minus = plus.mirrored()
    results = {
        "bbH0": eval_bbH0(plus, rho, table, macro),
        "bfH0": eval_bfH0(plus, rho, table, macro),
        "bbH1": eval_bbH1(minus, rho, table, macro),
        "bfH1": eval_bfH1(minus, rho, table, macro),
    }
    summary = {name: result.value for name, result in results.items()}
    summary["bfH_plus"] = eval_bfH(plus, rho, table, macro)
    summary["bfH_minus"] = eval_bfH(minus, rho, table, macro)
    summary["unique_plus"] = results["bbH0"].unique
    summary["unique_minus"] = results["bbH1"].unique
    summary["plans"] = {name: result.plans for name, result in results.items()}
    return summary
