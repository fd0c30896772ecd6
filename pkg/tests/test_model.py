"""
Tests for microscopic models, macroscopic potentials, Legendre duality and
the rescaled N-particle Hamiltonian.
"""

import logging

import numpy as np
import pytest

from hydrolab import (
    GridFunction,
    InvalidModelError,
    MacroPotentials,
    MicroModel,
    OutOfRangeError,
    eval_h,
    legendre,
    micro_lagrangian,
    rescaled_hn,
)
from hydrolab.model import ParticleLagrangian, sorted_sum
from hydrolab.potentials import GridPotential


def sin2_hamiltonian(q, p):
    return 0.5 * np.sum(np.square(p), axis=-1) - np.sum(np.sin(np.pi * q) ** 2, axis=-1)


@pytest.fixture
def tabulated():
    return MicroModel.tabulate(sin2_hamiltonian, nq=64, p_axis=np.linspace(-4.0, 4.0, 81))


class TestEvalH:
    def test_free_model(self):
        """With U_per = 0, H(0.3, 2) = ½·4."""
        assert eval_h(MicroModel(), 0.3, 2.0) == 2.0

    def test_sin2_potential(self):
        """H(0.5, 0) = −sin²(π/2) = −1."""
        model = MicroModel(potential={"kind": "sin2"})
        assert eval_h(model, 0.5, 0.0) == pytest.approx(-1.0, abs=1e-15)

    def test_periodic_in_q(self):
        """Integer shifts of q leave H unchanged."""
        model = MicroModel(potential={"kind": "cosine", "amplitude": 0.5, "phase": 0.2})
        for q in [0.1, 0.37, 0.9]:
            assert eval_h(model, q + 3.0, 1.5) == pytest.approx(eval_h(model, q, 1.5), abs=1e-12)

    def test_tabulated_matches_closed_form_at_nodes(self, tabulated):
        """At a table node H(0.25, 1) = ½ − ½ = 0."""
        assert eval_h(tabulated, 0.25, 1.0) == pytest.approx(0.0, abs=1e-12)

    def test_tabulated_interpolates_between_nodes(self, tabulated):
        """Off the nodes the table agrees with the closed form to interpolation error."""
        rng = np.random.default_rng(3)
        for q, p in zip(rng.uniform(0, 1, 20), rng.uniform(-3, 3, 20)):
            exact = 0.5 * p * p - np.sin(np.pi * q) ** 2
            assert eval_h(tabulated, q, p) == pytest.approx(exact, abs=1e-2)

    def test_tabulated_out_of_range(self, tabulated):
        """Momenta outside the table raise."""
        with pytest.raises(OutOfRangeError, match="outside the tabulated range"):
            eval_h(tabulated, 0.1, 5.0)


class TestMicroModelValidation:
    def test_growth_bound_violation(self):
        """A potential deeper than the growth constants allow is rejected."""
        with pytest.raises(InvalidModelError, match="growth bound"):
            MicroModel(potential={"kind": "sin2", "amplitude": 5.0})

    def test_unknown_potential(self):
        """Unregistered potential kinds are rejected with the known names."""
        with pytest.raises(InvalidModelError, match="Unknown potential kind"):
            MicroModel(potential={"kind": "square-well"})

    def test_kind_must_be_known(self):
        """The kind field only takes the documented values."""
        with pytest.raises(ValueError, match="must be one of"):
            MicroModel(kind="relativistic")

    def test_grid_potential_wraps(self):
        """Grid potentials interpolate linearly with periodic wrap-around."""
        pot = GridPotential(values=[0.0, 1.0, 0.0, 1.0])
        assert pot(np.array([[0.125]]))[0] == pytest.approx(0.5)
        assert pot(np.array([[1.125]]))[0] == pytest.approx(0.5)
        assert pot(np.array([[0.875]]))[0] == pytest.approx(0.5)

    def test_round_trip(self):
        """to_dict/from_dict rebuild an equivalent model."""
        model = MicroModel(potential={"kind": "sin2", "amplitude": 0.5})
        again = MicroModel.from_dict(model.to_dict())
        assert eval_h(again, 0.3, 0.7) == eval_h(model, 0.3, 0.7)


class TestMacroPotentials:
    def test_defaults_are_free(self):
        """Without U and V the macro potentials vanish."""
        macro = MacroPotentials()
        assert macro.is_free
        assert macro.potential_energy(np.array([[0.5], [1.5]])) == 0.0

    def test_negative_confinement_rejected(self):
        """U must be nonnegative."""
        with pytest.raises(InvalidModelError, match="u0 >= 0"):
            MacroPotentials(U={"kind": "log", "u0": -1.0})

    def test_log_confinement_under_envelope(self):
        """U(x) = u₀ log(1 + |x|) sits exactly on its envelope."""
        macro = MacroPotentials(U={"kind": "log", "u0": 2.0})
        x = np.array([[3.0], [-1.0]])
        assert np.allclose(macro.U(x), 2.0 * np.log1p([3.0, 1.0]))
        assert np.allclose(macro.envelope(np.array([3.0, 1.0])), macro.U(x))

    def test_interaction_is_even(self):
        """The Gaussian pair interaction is even and bounded by v₀."""
        macro = MacroPotentials(V={"kind": "gaussian", "v0": 0.3})
        z = np.array([[0.4, -1.2]])
        assert macro.V(z) == pytest.approx(macro.V(-z))
        assert macro.sup_V == 0.3


class TestLegendre:
    p = np.linspace(-5.0, 5.0, 1001)
    xi = np.linspace(-2.0, 2.0, 41)

    def test_quadratic_is_self_dual(self):
        """The conjugate of ½p² is ½ξ² within the grid error."""
        g = legendre(GridFunction(axes=[self.p], values=0.5 * self.p**2), [self.xi])
        assert np.max(np.abs(g.values - 0.5 * self.xi**2)) < 1e-4
        assert not g.saturated

    def test_constant_shift(self):
        """Shifting f by −0.7 shifts the conjugate by +0.7."""
        g = legendre(GridFunction(axes=[self.p], values=0.5 * self.p**2 - 0.7), [self.xi])
        assert np.max(np.abs(g.values - (0.5 * self.xi**2 + 0.7))) < 1e-4

    def test_double_conjugate_is_convex_hull(self):
        """For the double well, g**(0) = 0 while f(0) = ½."""
        p = np.linspace(-5.0, 5.0, 2001)
        f = np.minimum(0.5 * (p - 1) ** 2, 0.5 * (p + 1) ** 2)
        g = legendre(GridFunction(axes=[p], values=f), [np.linspace(-3.0, 3.0, 601)])
        gg = legendre(g, [np.linspace(-1.5, 1.5, 301)])
        assert gg(np.array([[0.0]]))[0] == pytest.approx(0.0, abs=1e-6)
        assert f[1000] == pytest.approx(0.5)

    def test_involution_on_convex_input(self):
        """Applying legendre twice reproduces a convex input on the interior."""
        rng = np.random.default_rng(11)
        p = np.linspace(-4.0, 4.0, 801)
        for _ in range(5):
            a, b = rng.uniform(0.5, 2.0), rng.uniform(-0.5, 0.5)
            f = 0.5 * a * p**2 + b * p + 0.1 * np.abs(p)
            g = legendre(GridFunction(axes=[p], values=f), [np.linspace(-6.0, 6.0, 1201)])
            gg = legendre(g, [p[200:601]])
            assert np.max(np.abs(gg.values - f[200:601])) < 2e-2

    def test_boundary_saturation_is_flagged(self, caplog):
        """A supremum on the grid edge sets the flag and logs a warning."""
        p = np.linspace(-1.0, 1.0, 21)
        with caplog.at_level(logging.WARNING):
            g = legendre(GridFunction(axes=[p], values=0.5 * p**2), [[3.0]])
        assert g.saturated
        assert "grid boundary" in caplog.text


class TestMicroLagrangian:
    def test_free(self):
        """𝖫(q, 3) = 4.5 without a potential."""
        assert micro_lagrangian(MicroModel(), 0.2, 3.0) == 4.5

    def test_saturation_flag(self, tabulated):
        """Slopes past the momentum grid are reported as saturated."""
        assert micro_lagrangian(MicroModel(), 0.2, 3.0, with_saturation=True) == (4.5, False)
        assert not micro_lagrangian(tabulated, 0.3, 1.0, with_saturation=True)[1]
        assert micro_lagrangian(tabulated, 0.3, 6.0, with_saturation=True)[1]

    def test_sin2(self):
        """𝖫 = ½ξ² + U_per; at q = 0.5, ξ = 0 that is 1."""
        model = MicroModel(potential={"kind": "sin2"})
        assert micro_lagrangian(model, 0.5, 0.0) == pytest.approx(1.0)

    def test_grid_conjugate_matches_closed_form(self, tabulated):
        """The tabulated conjugate agrees with ½ξ² + sin²(πq) at random points."""
        rng = np.random.default_rng(5)
        for q, xi in zip(rng.uniform(0, 1, 50), rng.uniform(-2, 2, 50)):
            exact = 0.5 * xi * xi + np.sin(np.pi * q) ** 2
            assert micro_lagrangian(tabulated, q, xi) == pytest.approx(exact, abs=5e-3)

    def test_fenchel_young(self):
        """ξ·p ≤ 𝖫(q, ξ) + H(q, p), with equality at p = ξ."""
        model = MicroModel(potential={"kind": "sin2", "amplitude": 0.8})
        rng = np.random.default_rng(9)
        for q, xi, p in zip(rng.uniform(0, 1, 100), rng.normal(size=100), rng.normal(size=100)):
            total = micro_lagrangian(model, q, xi) + eval_h(model, q, p)
            assert xi * p <= total + 1e-12
            assert micro_lagrangian(model, q, xi) + eval_h(model, q, xi) == pytest.approx(xi * xi)


class TestRescaledHN:
    def test_free_kinetic_average(self):
        """Two particles with P = 1 give the mean of ½|P|²."""
        x = np.array([[0.1], [0.7]])
        P = np.ones((2, 1))
        assert rescaled_hn(MicroModel(), MacroPotentials(), 0.1, x, P) == 0.5

    def test_log_confinement_at_rest(self):
        """One particle at the origin at rest has zero energy."""
        macro = MacroPotentials(U={"kind": "log"})
        assert rescaled_hn(MicroModel(), macro, 0.5, np.zeros((1, 1)), np.zeros((1, 1))) == 0.0

    def test_permutation_invariance_is_exact(self):
        """Relabelling particles leaves H_N bit-for-bit unchanged."""
        model = MicroModel(potential={"kind": "sin2", "amplitude": 0.5})
        macro = MacroPotentials(U={"kind": "log"}, V={"kind": "gaussian", "v0": 0.4})
        rng = np.random.default_rng(0)
        for _ in range(100):
            n, d = rng.integers(1, 7), rng.integers(1, 3)
            x, P = rng.normal(size=(n, d)), rng.normal(size=(n, d))
            perm = rng.permutation(n)
            assert rescaled_hn(model, macro, 0.1, x[perm], P[perm]) == rescaled_hn(model, macro, 0.1, x, P)

    def test_rejects_bad_input(self):
        """ε must be positive and x, P must match."""
        with pytest.raises(ValueError, match="eps must be positive"):
            rescaled_hn(MicroModel(), MacroPotentials(), 0.0, np.zeros((1, 1)), np.zeros((1, 1)))
        with pytest.raises(ValueError, match="same shape"):
            rescaled_hn(MicroModel(), MacroPotentials(), 0.1, np.zeros((2, 1)), np.zeros((1, 1)))


class TestParticleLagrangian:
    def test_free_value(self):
        """L_N at velocity v is the mean of ½|v_i|²."""
        cost = ParticleLagrangian(MicroModel(), MacroPotentials(), 0.1)
        x = np.zeros((2, 1))
        v = np.array([[1.0], [3.0]])
        assert cost.value(x, v) == pytest.approx(2.5)
        assert np.allclose(cost.grad_v(x, v), v / 2)

    def test_infimum_bound(self):
        """inf L_N is bounded below by inf 𝖫 + inf U + inf V."""
        macro = MacroPotentials(V={"kind": "gaussian", "v0": -0.5})
        cost = ParticleLagrangian(MicroModel(potential={"kind": "sin2"}), macro, 0.1)
        assert cost.infimum() == pytest.approx(-0.5)
        assert cost.sup_h_at_rest() == pytest.approx(0.0, abs=1e-12)


def test_sorted_sum_is_order_free():
    """Sums after sorting do not depend on the order of the terms."""
    values = np.array([1e16, 1.0, -1e16, 1.0])
    assert sorted_sum(values) == sorted_sum(values[::-1])
