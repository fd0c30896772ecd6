"""
Tests for discounted resolvent values, semigroup iterates and the
particle-to-continuum convergence harness.
"""

import math

import numpy as np
import pytest
from scipy.stats import norm

from hydrolab import (
    EffectiveTable,
    IterationLimitError,
    MacroPotentials,
    MicroModel,
    ParameterError,
    ParticleLagrangian,
    PreconditionError,
    TerminalData,
    converge_harness,
    resolve,
    resolve_continuum,
    resolve_particle,
    resolvent_identity_check,
    semigroup,
)
from hydrolab.parallel import map_tasks
from hydrolab.value import (
    CONVERGENCE_COLUMNS,
    ResolventIterate,
    discount_knots,
    dpp_residual,
    eps_schedule,
    growth_bounds,
    sample_cloud,
)

FREE = MicroModel()
NO_MACRO = MacroPotentials()
QUICK = {"knots": 8, "restarts": 2, "max_refinements": 1}


def free_gas_value(alpha, d2):
    """R_α(−½d²) = −½k d² with k + αk² = 1 for the free gas."""
    k = (math.sqrt(1.0 + 4.0 * alpha) - 1.0) / (2.0 * alpha)
    return -0.5 * k * d2


def dp_value(x0, alpha=1.0, dt=0.02, dx=0.001, max_jump=60):
    """Value iteration on a (t, x) lattice for one particle with
    h = −½x², U = log(1 + |x|) and L = ½v² + U(x)."""
    grid = np.arange(-250, 1251) * dx
    jumps = np.arange(-max_jump, max_jump + 1)
    mid = grid[:, None] + 0.5 * jumps[None, :] * dx
    v = jumps[None, :] * dx / dt
    weight = alpha * (1.0 - math.exp(-dt / alpha))
    decay = math.exp(-dt / alpha)
    running = weight * (-0.5 * mid**2 / alpha - 0.5 * v**2 - np.log1p(np.abs(mid)))
    target = np.arange(len(grid))[:, None] + jumps[None, :]
    running = np.where((target >= 0) & (target < len(grid)), running, -np.inf)
    target = np.clip(target, 0, len(grid) - 1)
    f = -0.5 * grid**2 - alpha * np.log1p(np.abs(grid))
    for _ in range(5000):
        new = np.max(running + decay * f[target], axis=1)
        if np.max(np.abs(new - f)) < 1e-11:
            f = new
            break
        f = new
    return f[int(round((x0 - grid[0]) / dx))]


def tilted_well(center, b, e):
    """−½(x − center)² + b·tanh(x − e) for one particle on the line."""
    return TerminalData.custom(
        lambda x: -0.5 * (x[0, 0] - center) ** 2 + b * math.tanh(x[0, 0] - e),
        sup_bound=abs(b),
        grad=lambda x: np.array([[center - x[0, 0] + b / math.cosh(x[0, 0] - e) ** 2]]),
    )


def tilted_pairs(count, seed):
    """Seeded pairs of tilted wells sharing a center, with sup(h₁ − h₂) and a start."""
    rng = np.random.default_rng(seed)
    grid = np.linspace(-30.0, 30.0, 600001)
    pairs = []
    for _ in range(count):
        center = rng.normal(scale=0.5)
        (b1, b2), (e1, e2) = rng.uniform(-0.3, 0.3, 2), rng.uniform(-1.0, 1.0, 2)
        gap = float(np.max(b1 * np.tanh(grid - e1) - b2 * np.tanh(grid - e2)))
        x = np.array([[rng.normal()]])
        pairs.append((tilted_well(center, b1, e1), tilted_well(center, b2, e2), gap, x))
    return pairs


class TestResolve:
    def test_constant_is_a_fixed_point(self):
        """R_α c = c when resting costs nothing."""
        h = TerminalData.constant(0.7)
        x = np.array([[0.3], [-1.2], [2.0]])
        estimate = resolve_particle(h, 1.0, x, FREE, NO_MACRO, 0.1)
        assert estimate.value == pytest.approx(0.7, abs=1e-6)
        assert estimate.T_max == 0.0
        assert estimate.converged

    def test_free_gas_closed_form(self):
        """The free gas with h = −½d²(·, δ₀) has R_α h = −½k d²."""
        h = TerminalData.neg_dist_squared([0.0])
        estimate = resolve_particle(h, 1.0, [[1.0]], FREE, NO_MACRO, 0.1)
        assert estimate.value == pytest.approx(free_gas_value(1.0, 1.0), abs=1e-3)
        assert estimate.level == "particle"
        assert not estimate.lower_bound

    def test_matches_dynamic_programming(self):
        """One particle under log confinement agrees with value iteration."""
        h = TerminalData.neg_dist_squared([0.0])
        macro = MacroPotentials(U={"kind": "log"})
        estimate = resolve_particle(h, 1.0, [[1.0]], FREE, macro, 0.1)
        assert estimate.value == pytest.approx(dp_value(1.0), abs=5e-3)

    def test_growth_sandwich(self):
        """h(x) − α L(x, 0) ≤ R_α h(x) ≤ sup h + α(sup H(·, 0) − inf U − inf V)."""
        model = MicroModel(potential={"kind": "sin2", "amplitude": 0.5})
        macro = MacroPotentials(U={"kind": "log"}, V={"kind": "gaussian", "v0": 0.2})
        cost = ParticleLagrangian(model, macro, 0.5)
        h = TerminalData.neg_dist_squared([[0.0], [1.0]])
        rng = np.random.default_rng(0)
        for _ in range(3):
            x = rng.normal(size=(2, 1))
            bounds = growth_bounds(h, 1.0, x, cost)
            value = resolve(h, 1.0, x, cost, **QUICK).value
            assert bounds["lower"] - 1e-12 <= value <= bounds["upper"] + 1e-12

    def test_relabelling_is_exact(self):
        """Permuting the atoms of x gives a bit-identical value."""
        model = MicroModel(potential={"kind": "sin2", "amplitude": 0.5})
        h = TerminalData.neg_dist_squared([[-0.5], [0.0], [0.5]])
        x = np.array([[0.9], [-0.4], [0.1]])
        first = resolve_particle(h, 1.0, x, model, NO_MACRO, 0.5, **QUICK)
        second = resolve_particle(h, 1.0, x[[2, 0, 1]], model, NO_MACRO, 0.5, **QUICK)
        assert first.value == second.value

    def test_constant_shift(self):
        """R_α(h + c) = R_α h + c within solver tolerance."""
        base = TerminalData.neg_dist_squared([0.0])
        shifted = TerminalData.custom(
            lambda x: base(x) + 0.3, sup_bound=0.3, grad=lambda x: base.gradient(x[None])[0]
        )
        cost = ParticleLagrangian(FREE, MacroPotentials(U={"kind": "log"}), 0.1)
        plain = resolve(base, 1.0, [[0.8]], cost, **QUICK).value
        moved = resolve(shifted, 1.0, [[0.8]], cost, **QUICK).value
        assert moved == pytest.approx(plain + 0.3, abs=2e-4)

    def test_monotone_in_the_data(self):
        """h₁ ≤ h₂ gives R_α h₁ ≤ R_α h₂ within solver tolerance."""
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        rng = np.random.default_rng(1)
        for _ in range(5):
            x = rng.normal(size=(1, 1))
            steep = resolve(TerminalData.neg_dist_squared([0.0], a=2.0), 1.0, x, cost, **QUICK).value
            flat = resolve(TerminalData.neg_dist_squared([0.0], a=1.0), 1.0, x, cost, **QUICK).value
            assert steep <= flat + 2e-4

    def test_contraction(self):
        """R_α h₁ − R_α h₂ ≤ sup(h₁ − h₂) + 2·tol on 20 random bounded pairs."""
        tol = 1e-4
        for h1, h2, gap, x in tilted_pairs(20, seed=6):
            first = resolve_particle(h1, 1.0, x, FREE, NO_MACRO, 0.1, **QUICK).value
            second = resolve_particle(h2, 1.0, x, FREE, NO_MACRO, 0.1, **QUICK).value
            assert first - second <= gap + 2 * tol

    def test_dynamic_programming_principle(self):
        """Restarting from the best path's first knot reproduces the value."""
        h = TerminalData.neg_dist_squared([0.0])
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        estimate = resolve(h, 1.0, [[1.0]], cost)
        assert dpp_residual(estimate, h, 1.0, cost) <= 1e-3

    def test_parameter_errors(self):
        """α and the truncation tolerance must be positive; unknown settings raise."""
        h = TerminalData.constant(0.0)
        with pytest.raises(ParameterError, match="alpha must be positive"):
            resolve_particle(h, 0.0, [[0.0]], FREE, NO_MACRO, 0.1)
        with pytest.raises(ParameterError, match="tmax_tol must be positive"):
            resolve_particle(h, 1.0, [[0.0]], FREE, NO_MACRO, 0.1, tmax_tol=0.0)
        with pytest.raises(TypeError, match="unknown solver settings"):
            resolve_particle(h, 1.0, [[0.0]], FREE, NO_MACRO, 0.1, knot=4)

    def test_discount_knots_are_nested(self):
        """Doubling the interval count keeps every old knot."""
        coarse = discount_knots(10.0, 1.0, 8)
        fine = discount_knots(10.0, 1.0, 16)
        assert coarse[0] == 0.0 and coarse[-1] == 10.0
        assert np.allclose(fine[::2], coarse, rtol=0, atol=1e-12)


class TestContinuum:
    def test_constant_is_a_fixed_point(self):
        """With 𝖫̄(0) = 0 constants are resolved exactly."""
        table = EffectiveTable.quadratic([np.linspace(-2.0, 2.0, 5)])
        estimate = resolve_continuum(TerminalData.constant(-0.4), 1.0, [0.0, 1.0], table, NO_MACRO)
        assert estimate.value == pytest.approx(-0.4, abs=1e-6)
        assert estimate.level == "continuum"
        assert estimate.lower_bound

    def test_ideal_gas_agrees_with_particles(self):
        """For the free gas the particle and continuum costs coincide."""
        h = TerminalData.neg_dist_squared([[-0.5], [0.5], [1.0]])
        x = np.array([[0.2], [-1.0], [0.7]])
        table = EffectiveTable.quadratic([np.linspace(-2.0, 2.0, 5)])
        continuum = resolve_continuum(h, 1.0, x, table, NO_MACRO, **QUICK).value
        particle = resolve_particle(h, 1.0, x, FREE, NO_MACRO, 0.3, **QUICK).value
        assert continuum == pytest.approx(particle, abs=1e-4)


class TestSemigroup:
    def test_zero_time(self):
        """S(0)h = h."""
        h = TerminalData.neg_dist_squared([0.0])
        estimate = semigroup(h, 0.0, 4, [[0.5]], ParticleLagrangian(FREE, NO_MACRO, 0.1))
        assert estimate.value == pytest.approx(-0.125)
        assert estimate.iterations == 0

    def test_one_step_is_a_resolvent(self):
        """With n = 1 and t = 1 the semigroup is R₁ h."""
        h = TerminalData.neg_dist_squared([0.0])
        estimate = semigroup(h, 1.0, 1, [[1.0]], ParticleLagrangian(FREE, NO_MACRO, 0.1))
        assert estimate.value == pytest.approx(free_gas_value(1.0, 1.0), abs=1e-3)
        assert estimate.iterations == 1

    def test_constants_stay_fixed(self):
        """Every resolvent step keeps a constant."""
        estimate = semigroup(TerminalData.constant(1.5), 1.0, 3, [[0.2]], ParticleLagrangian(FREE, NO_MACRO, 0.1))
        assert estimate.value == pytest.approx(1.5, abs=1e-6)
        assert estimate.iterations == 3
        assert estimate.converged

    def test_budget_falls_back_to_shallower_iterate(self):
        """When nested solves run out the deepest affordable iterate is returned."""
        h = TerminalData.neg_dist_squared([0.0])
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        estimate = semigroup(h, 1.0, 3, [[1.0]], cost, budget=0, **QUICK)
        assert estimate.iterations == 1
        assert not estimate.converged

    def test_contraction(self):
        """Two resolvent steps stay within sup(h₁ − h₂) up to the nested solver tolerance."""
        tol = 1e-3
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        outer = {"knots": 4, "restarts": 1, "max_refinements": 0}
        for h1, h2, gap, x in tilted_pairs(3, seed=8):
            first = semigroup(h1, 1.0, 2, x, cost, **outer)
            second = semigroup(h2, 1.0, 2, x, cost, **outer)
            assert first.iterations == second.iterations == 2
            assert first.value - second.value <= gap + 2 * tol

    def test_iterate_budget_is_exact_under_threads(self):
        """Concurrent callers never solve more than the iterate's budget."""
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        iterate = ResolventIterate(TerminalData.constant(0.2), 1.0, cost, budget=10)

        def evaluate(x):
            try:
                return float(iterate.value(x))
            except IterationLimitError:
                return None

        points = [np.array([[0.1 * i]]) for i in range(40)]
        values = map_tasks(evaluate, points, 8)
        solved = [x for x, v in zip(points, values) if v is not None]
        assert iterate.evaluations == 10
        assert len(iterate.cache) == len(solved) == 10
        assert iterate.value(solved[0]) == pytest.approx(0.2, abs=1e-12)
        assert iterate.evaluations == 10

    def test_parameter_errors(self):
        """n ≥ 1 and t ≥ 0."""
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        with pytest.raises(ParameterError, match="n must be at least 1"):
            semigroup(TerminalData.constant(0.0), 1.0, 0, [[0.0]], cost)
        with pytest.raises(ParameterError, match="t must be non-negative"):
            semigroup(TerminalData.constant(0.0), -1.0, 2, [[0.0]], cost)


class TestResolventIdentity:
    def test_constant_data(self):
        """Constants satisfy the identity exactly."""
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        residual = resolvent_identity_check(TerminalData.constant(0.5), 1.0, 0.5, [[[0.0]], [[1.0]]], cost)
        assert residual <= 1e-12

    @pytest.mark.parametrize(
        "point",
        [[[1.0], [-0.5]], [[0.0], [0.3]], [[-1.2], [0.8]], [[0.4], [0.6]], [[2.0], [-1.0]]],
    )
    def test_two_particle_free_gas(self, point):
        """R_α h = R_β((1 − β/α) R_α h + (β/α) h) within 1e-2 for h = −½d², N = 2."""
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        h = TerminalData.neg_dist_squared([[-0.5], [0.5]])
        residual = resolvent_identity_check(
            h, 1.0, 0.5, [point], cost, knots=8, restarts=1, budget=30, max_refinements=0
        )
        assert residual <= 1e-2

    def test_needs_ordered_parameters(self):
        """α > β > 0."""
        cost = ParticleLagrangian(FREE, NO_MACRO, 0.1)
        with pytest.raises(ParameterError, match="alpha > beta > 0"):
            resolvent_identity_check(TerminalData.constant(0.0), 0.5, 1.0, [[[0.0]]], cost)


class TestConvergenceHarness:
    def test_errors_shrink_with_N(self):
        """e_N decreases along N = 4, 8, 16, 32 with at most one small inversion."""
        reference = norm(loc=1.0, scale=0.5).ppf((np.arange(8) + 0.5) / 8)
        h = TerminalData.neg_dist_squared(reference)
        frame = converge_harness(
            h,
            target=norm(),
            alpha=1.0,
            schedule=eps_schedule([4, 8, 16, 32]),
            sampling="quantile",
            proxy_atoms=64,
        )
        assert list(frame.columns[: len(CONVERGENCE_COLUMNS)]) == CONVERGENCE_COLUMNS
        errors = frame.sort_values("N")["error"].to_numpy()
        inversions = int(np.sum(np.diff(errors) > 2e-4))
        assert inversions <= 1
        assert errors[-1] <= errors[0]
        assert np.all(np.diff(frame.sort_values("N")["d_emp_to_target"].to_numpy()) < 0)

    def test_needs_class_c_data(self):
        """Custom data without the class-𝒞 assertion is refused."""
        h = TerminalData.custom(lambda x: 0.0, sup_bound=0.0)
        with pytest.raises(PreconditionError, match="class-C"):
            converge_harness(h, schedule=[(4, 0.5)])

    def test_schedule(self):
        """ε_N = N^(−1/2) by default."""
        assert eps_schedule([4, 16]) == [(4, 0.5), (16, 0.25)]

    def test_sampling(self):
        """Quantile clouds are deterministic; stratified clouds keep one atom per cell."""
        quantile = sample_cloud(norm(), 4, sampling="quantile")
        assert np.allclose(quantile[:, 0], norm.ppf([0.125, 0.375, 0.625, 0.875]))
        stratified = sample_cloud(norm(), 4, np.random.default_rng(0))
        cells = np.floor(norm.cdf(stratified[:, 0]) * 4)
        assert cells.tolist() == [0.0, 1.0, 2.0, 3.0]
        with pytest.raises(ParameterError, match="unknown sampling scheme"):
            sample_cloud(norm(), 4, sampling="sobol")
