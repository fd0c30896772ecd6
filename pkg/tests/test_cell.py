"""
Tests for the cell problem, effective tables and Moreau–Yosida regularization.
"""

import logging
import math

import numpy as np
import pytest

from hydrolab import (
    EffectiveCost,
    EffectiveTable,
    ExtrapolationError,
    GridFunction,
    InvalidModelError,
    MacroPotentials,
    MicroModel,
    ParameterError,
    UnsupportedError,
    build_table,
    effective_h_1d,
    effective_h_minimax,
    effective_lagrangian,
    flat_piece_edge,
    moreau_inf,
    moreau_sup,
)
from hydrolab.cell import closed_measure_bound, legendre_slack, moreau_gradient_check

SIN2 = MicroModel(potential={"kind": "sin2"})


@pytest.fixture(scope="module")
def free_table():
    """A sampled (not closed-form) table of the free gas."""
    return build_table(MicroModel(), [np.linspace(-4.0, 4.0, 161)], modes=0, restarts=1, explicit=False)


class TestExplicitEffectiveHamiltonian:
    @pytest.mark.parametrize("P", [-2.0, -1.0, 0.0, 1.0, 2.0])
    def test_free_case(self, P):
        """Without a potential H̄(P) = ½P²."""
        assert effective_h_1d(MicroModel(), P) == pytest.approx(0.5 * P * P, abs=1e-8)

    def test_flat_piece_is_exactly_zero(self):
        """Inside the flat piece of sin²(πq) the value is exactly 0."""
        for P in np.linspace(-0.6, 0.6, 11):
            assert effective_h_1d(SIN2, P) == 0.0

    def test_flat_piece_edge(self):
        """The flat piece of sin²(πq) ends at ∫√(2 sin²(πq)) = 2√2/π."""
        assert flat_piece_edge(SIN2) == pytest.approx(2.0 * math.sqrt(2.0) / math.pi, abs=1e-8)

    def test_beyond_the_flat_piece(self):
        """Past the edge H̄ grows and stays between ½P² − mean U and ½P²."""
        values = [effective_h_1d(SIN2, P) for P in [1.0, 1.5, 2.0]]
        assert 0.0 < values[0] < values[1] < values[2]
        for P, value in zip([1.0, 1.5, 2.0], values):
            assert 0.5 * P * P - 0.5 - 1e-9 <= value <= 0.5 * P * P

    def test_even_in_P(self):
        """H̄ depends on |P| only."""
        assert effective_h_1d(SIN2, -1.7) == effective_h_1d(SIN2, 1.7)

    def test_accepts_plain_callables(self):
        """A float -> float potential works as well as a model."""
        value = effective_h_1d(lambda q: math.sin(math.pi * q) ** 2, 1.5)
        assert value == pytest.approx(effective_h_1d(SIN2, 1.5), abs=1e-9)

    def test_negative_potential_rejected(self):
        """U_per must be nonnegative."""
        with pytest.raises(InvalidModelError, match="nonnegative"):
            effective_h_1d(lambda q: -math.sin(math.pi * q) ** 2, 1.0)

    def test_tolerance_must_be_positive(self):
        """tol ≤ 0 is a parameter error."""
        with pytest.raises(ParameterError, match="tol must be positive"):
            effective_h_1d(SIN2, 1.0, tol=0.0)


class TestMinimaxBracket:
    @pytest.mark.parametrize("P", [-2.0, -1.0, 0.0, 1.0, 2.0])
    def test_free_case(self, P):
        """The bracket contains ½P² and has width at most 5e-3."""
        lower, upper, corrector = effective_h_minimax(MicroModel(), [P], modes=8, restarts=2)
        assert lower <= 0.5 * P * P + 1e-12
        assert upper >= 0.5 * P * P - 1e-12
        assert upper - lower <= 5e-3
        assert corrector.modes == 8

    def test_flat_piece(self):
        """For |P| ≤ 0.6 the bracket contains 0 with width at most 5e-3."""
        for P in np.linspace(-0.6, 0.6, 11):
            lower, upper, _ = effective_h_minimax(SIN2, [P], modes=8, restarts=4)
            assert lower <= 1e-9
            assert upper >= -1e-9
            assert upper - lower <= 5e-3

    @pytest.mark.parametrize("P", [0.8, 1.0, 1.5, 2.0])
    def test_contains_explicit_value(self, P):
        """Beyond 0.6 the bracket contains the explicit value."""
        explicit = effective_h_1d(SIN2, P)
        lower, upper, _ = effective_h_minimax(SIN2, [P], modes=8, restarts=4)
        assert lower - 1e-6 <= explicit <= upper + 1e-6

    def test_two_dimensional_free_case(self):
        """In 2D the free bracket collapses onto ½|P|²."""
        lower, upper, _ = effective_h_minimax(MicroModel(dimension=2), [1.0, 0.5], modes=2, restarts=1)
        assert lower == pytest.approx(0.625, abs=1e-9)
        assert upper == pytest.approx(0.625, abs=1e-9)

    def test_seeded_restarts_are_reproducible(self):
        """The same seed gives the same bracket."""
        first = effective_h_minimax(SIN2, [1.2], modes=4, restarts=3, seed=7)
        second = effective_h_minimax(SIN2, [1.2], modes=4, restarts=3, seed=7)
        assert first[:2] == second[:2]

    def test_three_dimensions_unsupported(self):
        """Minimax solves stop at d = 2."""
        with pytest.raises(UnsupportedError, match="d <= 2"):
            effective_h_minimax(MicroModel(dimension=3), [0.0, 0.0, 0.0])

    def test_closed_measure_bound(self):
        """Rest points and rotations bound H̄ from below."""
        assert closed_measure_bound(SIN2, [0.0]) == pytest.approx(0.0, abs=1e-12)
        assert closed_measure_bound(SIN2, [2.0]) == pytest.approx(1.5, abs=1e-12)


class TestEffectiveTable:
    def test_lagrangian_of_free_table(self, free_table):
        """𝖫̄(v) = ½v² within 1e-3 on |v| ≤ 2."""
        for v in np.linspace(-2.0, 2.0, 21):
            assert effective_lagrangian(free_table, v) == pytest.approx(0.5 * v * v, abs=1e-3)

    def test_lagrangian_reports_saturation(self, free_table, caplog):
        """Slopes beyond the P grid saturate its edge; interior slopes do not."""
        value, saturated = effective_lagrangian(free_table, 1.0, with_saturation=True)
        assert value == pytest.approx(0.5, abs=1e-3)
        assert not saturated
        with caplog.at_level(logging.WARNING):
            _, saturated = effective_lagrangian(free_table, 6.0, with_saturation=True)
        assert saturated
        assert "effective_lagrangian" in caplog.text
        closed = EffectiveTable.quadratic([np.linspace(-1.0, 1.0, 3)])
        assert effective_lagrangian(closed, 3.0, with_saturation=True) == (4.5, False)

    def test_table_invariants(self, free_table):
        """The free table is ordered, convex and within the growth bounds."""
        report = free_table.invariant_report(c=1.0, C=2.0)
        assert report == {"ordered": True, "convex": True, "growth": True}
        assert free_table.converged

    def test_lookup_outside_grid(self, free_table):
        """Sampled tables refuse to extrapolate."""
        with pytest.raises(ExtrapolationError, match="outside the table range") as info:
            free_table.hbar(np.array([[10.0]]))
        assert info.value.velocity.tolist() == [10.0]

    def test_closed_form_table_has_no_range(self):
        """The closed-form free table answers anywhere."""
        table = EffectiveTable.quadratic([np.linspace(-1.0, 1.0, 3)])
        assert table.hbar(np.array([[3.0]]))[0] == 4.5
        assert table.lbar(np.array([[-4.0]]))[0] == 8.0
        assert effective_lagrangian(table, 3.0) == 4.5

    def test_legendre_slack(self):
        """The v-grid slack vanishes on the grid and grows beyond it."""
        table = EffectiveTable.quadratic([np.linspace(-4.0, 4.0, 9)], [np.linspace(-3.0, 3.0, 61)])
        assert legendre_slack(table, np.array([[1.0]]))[0] == pytest.approx(0.0, abs=1e-12)
        assert legendre_slack(table, np.array([[5.0]]))[0] == pytest.approx(2.0, abs=1e-12)

    def test_bracket_must_be_ordered(self):
        """lower > upper is an invalid table."""
        axes = [np.array([0.0, 1.0])]
        with pytest.raises(InvalidModelError, match="lower <= upper"):
            EffectiveTable(
                P_axes=axes,
                v_axes=axes,
                lower=np.array([1.0, 1.0]),
                upper=np.array([0.0, 1.0]),
                lagrangian=np.zeros(2),
            )

    def test_round_trip(self, free_table):
        """to_dict/from_dict keep the sampled values."""
        again = EffectiveTable.from_dict(free_table.to_dict())
        P = np.array([[0.37], [-1.2]])
        assert np.array_equal(again.hbar(P), free_table.hbar(P))


class TestEffectiveCost:
    def test_velocity_range_check(self, free_table):
        """Velocities off the v grid raise with the offending vector."""
        cost = EffectiveCost(free_table, MacroPotentials())
        cost.check_range(np.array([[1.0], [-2.0]]))
        with pytest.raises(ExtrapolationError, match="outside the effective Lagrangian table") as info:
            cost.check_range(np.array([[1.0], [5.0]]))
        assert info.value.velocity.tolist() == [5.0]

    def test_resting_value_and_bounds(self):
        """At rest only the macroscopic potentials cost anything."""
        macro = MacroPotentials(U={"kind": "log"})
        cost = EffectiveCost(EffectiveTable.quadratic([np.linspace(-2.0, 2.0, 5)]), macro)
        x = np.array([[0.0], [math.e - 1.0]])
        assert cost.resting_value(x) == pytest.approx(0.5)
        assert cost.infimum() == 0.0
        assert cost.sup_h_at_rest() == 0.0


def lipschitz_walk(rng, n=201, slope=1.0):
    q = np.linspace(-2.0, 2.0, n)
    steps = rng.uniform(-slope, slope, n - 1) * (q[1] - q[0])
    values = np.concatenate([[0.0], np.cumsum(steps)])
    return GridFunction(axes=[q], values=values - values[n // 2])


class TestMoreau:
    def test_below_the_function(self):
        """w_ε ≤ w on random Lipschitz functions."""
        rng = np.random.default_rng(2)
        for _ in range(50):
            w = lipschitz_walk(rng)
            assert np.all(moreau_inf(w, 0.05).values <= w.values + 1e-15)

    def test_monotone_in_eps(self):
        """Larger ε gives a smaller regularization."""
        rng = np.random.default_rng(4)
        for _ in range(50):
            w = lipschitz_walk(rng)
            assert np.all(moreau_inf(w, 0.1).values <= moreau_inf(w, 0.05).values + 1e-15)

    def test_huber_closed_form(self):
        """The regularization of |q| is the Huber function."""
        q = np.linspace(-2.0, 2.0, 401)
        eps = 0.2
        w_eps = moreau_inf(GridFunction(axes=[q], values=np.abs(q)), eps)
        huber = np.where(np.abs(q) <= eps, q**2 / (2 * eps), np.abs(q) - eps / 2)
        assert np.max(np.abs(w_eps.values - huber)) < 1e-3

    def test_sup_regularization_is_above(self):
        """v_ε ≥ w_ε since the sup includes q' = q."""
        rng = np.random.default_rng(6)
        w_eps = moreau_inf(lipschitz_walk(rng), 0.05)
        assert np.all(moreau_sup(w_eps, 0.05).values >= w_eps.values - 1e-15)

    def test_argmax_inequality(self):
        """|q' − q|² ≤ 2ε(w(q) − w(q̂)) at every returned maximizer."""
        rng = np.random.default_rng(8)
        for _ in range(50):
            report = moreau_gradient_check(lipschitz_walk(rng), 0.05)
            assert report["argmax_violation"] == 0.0

    def test_gradient_bound(self):
        """Centered differences of v_ε stay below four times the slope plus slack."""
        rng = np.random.default_rng(10)
        q = np.linspace(-2.0, 2.0, 401)
        for _ in range(50):
            a, c = rng.uniform(0.2, 2.0), rng.uniform(-0.5, 0.5)
            report = moreau_gradient_check(GridFunction(axes=[q], values=a * np.abs(q - c)), 0.1)
            assert report["gradient_violation"] == 0.0
            assert report["checked"] > 0
            assert report["slack"] == pytest.approx(4 * 0.01 / 0.1)

    def test_eps_range(self):
        """ε must lie in (0, 1/(2 C_w))."""
        w = GridFunction(axes=[np.linspace(-2.0, 2.0, 41)], values=np.abs(np.linspace(-2.0, 2.0, 41)))
        with pytest.raises(ParameterError, match="admissible range"):
            moreau_inf(w, 1.0)
        with pytest.raises(ParameterError, match="eps must be positive"):
            moreau_inf(w, 0.0)
