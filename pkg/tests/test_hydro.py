import numpy as np
import pytest

from hydrolab import (
    CoverageError,
    FieldSnapshot,
    MacroPotentials,
    MicroModel,
    ParticleState,
    PhaseMeasure,
    PreconditionError,
    euler_residual,
    fields_from_state,
    ideal_gas_check,
    integrate,
)
from hydrolab.hydro import bump_functions, flux_decomposition_defect, snapshots_from_trajectory


def phase(x, v):
    return PhaseMeasure(atoms=np.asarray(x, dtype=float)[:, None], velocities=np.asarray(v, dtype=float)[:, None])


def free_stream(x0, v, times, lower, upper, bins):
    return [fields_from_state(phase(x0 + t * v, v), lower, upper, bins, t=t) for t in times]


class TestFields:
    def test_single_particle(self):
        """One particle: u = v and T = p = 0 in its bin."""
        snap = fields_from_state(phase([0.6], [2.0]), 0.0, 1.0, 4)
        assert snap.velocity[2, 0] == 2.0
        assert snap.temperature[2] == 0.0
        assert snap.pressure[2] == 0.0
        assert snap.counts.tolist() == [0.0, 0.0, 1.0, 0.0]

    def test_two_beams(self):
        """Velocities ±1 in one bin: u = 0, T = 1 and p = ρ."""
        snap = fields_from_state(phase([0.1, 0.2], [1.0, -1.0]), 0.0, 1.0, 4)
        assert snap.velocity[0, 0] == 0.0
        assert snap.temperature[0] == 1.0
        assert snap.pressure[0] == snap.density[0] == 4.0
        assert ideal_gas_check(snap) == 0.0

    def test_single_beam_closure(self):
        """A cold beam has M = ρu² and p = 0."""
        snap = fields_from_state(phase([0.1, 0.2, 0.7], [1.5, 1.5, 1.5]), 0.0, 1.0, 4)
        assert ideal_gas_check(snap) == pytest.approx(0.0, abs=1e-12)

    def test_gaussian_gas(self):
        """Binned temperatures of a Gaussian gas reproduce σ² within 5%."""
        rng = np.random.default_rng(0)
        sigma = 0.7
        gas = phase(rng.uniform(0.0, 1.0, 100_000), rng.normal(0.3, sigma, 100_000))
        snap = fields_from_state(gas, 0.0, 1.0, 4)
        assert np.all(np.abs(snap.temperature / sigma**2 - 1.0) <= 0.05)
        assert ideal_gas_check(snap) <= 0.05

    def test_mass_and_flux_identities(self):
        """Binning conserves mass and M = ρ u⊗u + stress per bin."""
        rng = np.random.default_rng(1)
        state = PhaseMeasure(atoms=rng.uniform(-1, 1, size=(5000, 2)), velocities=rng.normal(size=(5000, 2)))
        snap = fields_from_state(state, [-1.0, -1.0], [1.0, 1.0], [8, 5])
        assert snap.total_mass() == pytest.approx(1.0, abs=1e-12)
        assert flux_decomposition_defect(snap) <= 1e-9
        assert np.all(snap.temperature >= 0.0)

    def test_galilean_boost(self):
        """Boosting every velocity by w shifts u by w and leaves T alone."""
        rng = np.random.default_rng(2)
        x, v = rng.uniform(0, 1, 2000), rng.normal(size=2000)
        plain = fields_from_state(phase(x, v), 0.0, 1.0, 5)
        boosted = fields_from_state(phase(x, v + 0.8), 0.0, 1.0, 5)
        assert np.allclose(boosted.velocity, plain.velocity + 0.8, atol=1e-12)
        assert np.allclose(boosted.temperature, plain.temperature, atol=1e-10)

    def test_particle_state_uses_momenta(self):
        """Without a table the momentum map is the identity."""
        state = ParticleState(t=0.5, x=[[0.1], [0.3]], P=[[1.0], [3.0]], eps=0.1)
        snap = fields_from_state(state, 0.0, 1.0, 1)
        assert snap.velocity[0, 0] == 2.0
        assert snap.t == 0.5
        assert snap.velocity_map == "identity"

    def test_coverage(self):
        """Atoms outside the box are an error."""
        with pytest.raises(CoverageError, match="outside the bin box"):
            fields_from_state(phase([0.5, 1.5], [0.0, 0.0]), 0.0, 1.0, 4)


class TestEulerResidual:
    def test_translated_profile(self):
        """ρ(t, x) = ρ₀(x − ut) with constant u solves both equations."""
        u = 0.5

        def snapshot(t):
            return FieldSnapshot.from_fields(
                t,
                0.0,
                4.0,
                400,
                density=lambda x: np.exp(-np.square(x[..., 0] - 1.5 - u * t) / 0.09),
                velocity=lambda x: np.full(x.shape, u),
            )

        result = euler_residual([snapshot(0.01 * k) for k in range(5)], bump_functions(0.0, 4.0, 3))
        assert result["continuity"]["relative"] <= 1e-3
        assert result["momentum"]["relative"] <= 1e-3

    def test_free_gas(self):
        """10⁴ free particles satisfy the weak equations within 5% of the fluxes."""
        rng = np.random.default_rng(3)
        x0 = rng.uniform(0.0, 1.0, 10_000)
        v = rng.normal(1.0, 0.2, 10_000)
        snaps = free_stream(x0, v, [0.0, 0.05, 0.1], -0.5, 2.0, 250)
        result = euler_residual(snaps, bump_functions(-0.5, 2.0, 5))
        assert result["continuity"]["relative"] <= 0.05
        assert result["momentum"]["relative"] <= 0.05

    def test_source_term_toggle(self):
        """Under confinement the momentum balance needs the force density."""
        rng = np.random.default_rng(4)
        n = 10_000
        macro = MacroPotentials(U={"kind": "log"})
        state = ParticleState(
            t=0.0, x=rng.uniform(0.5, 1.5, size=(n, 1)), P=rng.normal(0.5, 0.2, size=(n, 1)), eps=0.1
        )
        trajectory = integrate(state, MicroModel(), macro, dt=1e-3, steps=100, record_every=50)
        snaps = snapshots_from_trajectory(trajectory, 0.0, 2.5, 250, macro=macro)
        bumps = bump_functions(0.0, 2.5, 5)
        with_source = euler_residual(snaps, bumps, with_source=True)
        without = euler_residual(snaps, bumps, with_source=False)
        assert with_source["momentum"]["relative"] <= 0.05
        assert without["momentum"]["max"] > 10 * with_source["momentum"]["max"]

    def test_needs_three_snapshots(self):
        """Centered differences need at least three times."""
        snaps = free_stream(np.array([0.5]), np.array([0.0]), [0.0, 0.1], 0.0, 1.0, 4)
        with pytest.raises(PreconditionError, match="at least 3 snapshots"):
            euler_residual(snaps, bump_functions(0.0, 1.0, 2))

    def test_needs_uniform_spacing(self):
        """Snapshot times must be equally spaced."""
        snaps = free_stream(np.array([0.5]), np.array([0.0]), [0.0, 0.1, 0.3], 0.0, 1.0, 4)
        with pytest.raises(PreconditionError, match="equally spaced"):
            euler_residual(snaps, bump_functions(0.0, 1.0, 2))
