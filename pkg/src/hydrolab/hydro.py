"""Hydrodynamic fields from particle states, weak Euler residuals and the
ideal-gas closure."""

import logging

import numpy as np

from hydrolab.BaseObject import CoverageError, PreconditionError
from hydrolab.EffectiveTable import EffectiveTable
from hydrolab.FieldSnapshot import FieldSnapshot
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.ParticleState import ParticleState
from hydrolab.PhaseMeasure import PhaseMeasure

logger = logging.getLogger(__name__)


def momentum_to_velocity(P, table: EffectiveTable = None):
    """v = ∇H̄(P); the identity for the free (quadratic) case.

    Returns:
        (velocities, non_smooth) where ``non_smooth`` flags momenta at which
        one-sided differences of the table disagree.
    """
    P = np.asarray(P, dtype=float)
    if table is None or table.closed_form == "quadratic":
        return P.copy(), np.zeros(P.shape[:-1], dtype=bool)
    v, non_smooth = table.grad_hbar(P)
    if np.any(non_smooth):
        logger.warning(
            "Momentum map: %i particles sit at a kink of the effective Hamiltonian",
            int(np.sum(non_smooth)),
        )
    return v, non_smooth


def _bin_index(x, lower, upper, shape):
    shape = np.asarray(shape)
    outside = np.any((x < lower) | (x > upper), axis=-1)
    if np.any(outside):
        raise CoverageError(
            f"{int(np.sum(outside))} atoms lie outside the bin box "
            f"{lower.tolist()}..{upper.tolist()}, e.g. {x[outside][0].tolist()}"
        )
    cell = np.floor((x - lower) / (upper - lower) * shape).astype(np.int64)
    cell = np.minimum(cell, shape - 1)
    return np.ravel_multi_index(tuple(cell.T), tuple(shape))


def particle_forces(x, macro: MacroPotentials):
    """∇U(x_i) + (2/N) Σ_j ∇V(x_i − x_j): the macroscopic force per particle."""
    force = macro.grad_U(x)
    if macro.has_interaction:
        force = force + 2.0 * macro.interaction_gradient(x)
    return force


def fields_from_state(state, lower, upper, shape, table=None, macro=None, t=None) -> FieldSnapshot:
    """Histogram moments of a particle state or phase measure.

    Args:
        state: ParticleState (momenta mapped to velocities through
            :func:`momentum_to_velocity`) or PhaseMeasure (velocities used
            as given).
        lower, upper: Box corners; ``shape`` bins per axis.
        table: Effective table for the momentum map; None means v = P.
        macro: When given, the binned force density ρ∇(U + 2V*ρ) is stored
            as the snapshot's ``source``.

    Raises:
        CoverageError: if some atom lies outside the box
    """
    if isinstance(state, ParticleState):
        x = state.x
        v, non_smooth = momentum_to_velocity(state.P, table)
        t = state.t if t is None else t
        velocity_map = "identity" if table is None or table.closed_form == "quadratic" else "table"
    elif isinstance(state, PhaseMeasure):
        x = state.atoms
        v = state.velocities
        non_smooth = np.zeros(len(x), dtype=bool)
        velocity_map = "identity"
    else:
        raise TypeError(f"cannot bin {type(state).__name__}")
    t = 0.0 if t is None else float(t)
    n, d = x.shape
    lower = np.broadcast_to(np.asarray(lower, dtype=float), (d,)).copy()
    upper = np.broadcast_to(np.asarray(upper, dtype=float), (d,)).copy()
    shape = [int(s) for s in np.broadcast_to(np.asarray(shape), (d,))]
    index = _bin_index(x, lower, upper, shape)
    nbins = int(np.prod(shape))
    volume = float(np.prod((upper - lower) / np.array(shape)))
    weight = 1.0 / (n * volume)

    counts = np.bincount(index, minlength=nbins).astype(float)
    density = counts * weight
    momentum = np.stack([np.bincount(index, v[:, k], nbins) for k in range(d)], -1) * weight
    flux = np.empty((nbins, d, d))
    for k in range(d):
        for l in range(k, d):
            flux[:, k, l] = flux[:, l, k] = np.bincount(index, v[:, k] * v[:, l], nbins) * weight
    occupied = counts > 0
    velocity = np.zeros((nbins, d))
    velocity[occupied] = momentum[occupied] / density[occupied, None]
    # covariance about the bin velocity, accumulated from deviations
    dev = v - velocity[index]
    stress = np.empty((nbins, d, d))
    for k in range(d):
        for l in range(k, d):
            stress[:, k, l] = stress[:, l, k] = np.bincount(index, dev[:, k] * dev[:, l], nbins) * weight
    temperature = np.zeros(nbins)
    temperature[occupied] = np.trace(stress[occupied], axis1=1, axis2=2) / (d * density[occupied])
    if np.any(~occupied):
        logger.debug("%i of %i bins are empty (T reported as 0)", int(np.sum(~occupied)), nbins)

    source = None
    if macro is not None:
        force = particle_forces(x, macro)
        source = np.stack([np.bincount(index, force[:, k], nbins) for k in range(d)], -1) * weight

    grid = tuple(shape)
    return FieldSnapshot(
        t=t,
        lower=lower,
        upper=upper,
        shape=shape,
        counts=counts.reshape(grid),
        density=density.reshape(grid),
        momentum=momentum.reshape(grid + (d,)),
        velocity=velocity.reshape(grid + (d,)),
        temperature=temperature.reshape(grid),
        flux=flux.reshape(grid + (d, d)),
        stress=stress.reshape(grid + (d, d)),
        pressure=(density * temperature).reshape(grid),
        source=None if source is None else source.reshape(grid + (d,)),
        non_smooth=bool(np.any(non_smooth)),
        velocity_map=velocity_map,
    )


def snapshots_from_trajectory(trajectory, lower, upper, shape, table=None, macro=None):
    return [fields_from_state(trajectory[k], lower, upper, shape, table, macro) for k in range(len(trajectory))]


# -- weak residuals -------------------------------------------------------


class Bump:
    """φ(x) = exp(−1 / (1 − |x − c|²/r²)) inside the ball of radius r, else 0."""

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)

    def _s(self, x):
        return np.sum(np.square(x - self.center), axis=-1) / self.radius**2

    def __call__(self, x):
        s = self._s(x)
        out = np.zeros(s.shape)
        inside = s < 1.0
        out[inside] = np.exp(-1.0 / (1.0 - s[inside]))
        return out

    def gradient(self, x):
        s = self._s(x)
        out = np.zeros(np.shape(x))
        inside = s < 1.0
        phi = np.exp(-1.0 / (1.0 - s[inside]))
        coef = -2.0 * phi / (np.square(1.0 - s[inside]) * self.radius**2)
        out[inside] = coef[:, None] * (x[inside] - self.center)
        return out


def bump_functions(lower, upper, count, radius=None):
    """``count`` bumps per axis with centers spread over the box and supports
    inside it."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    width = float(np.min(upper - lower))
    radius = width / (count + 1) if radius is None else float(radius)
    axes = [np.linspace(lo + radius, hi - radius, count) for lo, hi in zip(lower, upper)]
    centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(lower))
    return [Bump(c, radius) for c in centers]


def _integral(snapshot, values):
    """∫ over the box by the bin-center rule."""
    return np.sum(values, axis=tuple(range(snapshot.dimension))) * snapshot.bin_volume


def euler_residual(snapshots, bumps, with_source=True) -> dict:
    """Weak-form residuals of

        ∂ₜρ + div(ρu) = 0,    ∂ₜm + div M = ρ∇(U + 2V*ρ)

    per bump φ and interior snapshot, with centered time differences:

        |d/dt ∫φρ − ∫∇φ·m|,    |d/dt ∫φ m − ∫∇φ·M − ∫φ ρ∇(U + 2V*ρ)|.

    Returns:
        {"continuity": {...}, "momentum": {...}}, each with ``max``,
        ``mean``, ``scale`` (largest ∫|flux integrand| seen) and
        ``relative`` (max / scale).

    Raises:
        PreconditionError: fewer than 3 snapshots or non-uniform spacing
    """
    if len(snapshots) < 3:
        raise PreconditionError(f"euler_residual needs at least 3 snapshots, got {len(snapshots)}")
    times = np.array([s.t for s in snapshots])
    steps = np.diff(times)
    if not np.allclose(steps, steps[0], rtol=1e-9, atol=1e-12) or not steps[0] > 0:
        raise PreconditionError("snapshots must be equally spaced in time")
    dt = float(steps[0])
    centers = snapshots[0].centers()
    continuity, momentum = [], []
    c_scale = m_scale = 0.0
    for phi in bumps:
        phi_c = phi(centers)
        grad_c = phi.gradient(centers)
        mass = [_integral(s, phi_c * s.density) for s in snapshots]
        mom = [_integral(s, phi_c[..., None] * s.momentum) for s in snapshots]
        for k in range(1, len(snapshots) - 1):
            s = snapshots[k]
            transport = _integral(s, np.sum(grad_c * s.momentum, axis=-1))
            rate = (mass[k + 1] - mass[k - 1]) / (2.0 * dt)
            continuity.append(abs(rate - transport))
            c_scale = max(c_scale, float(_integral(s, np.abs(np.sum(grad_c * s.momentum, axis=-1)))))

            div_flux = _integral(s, np.einsum("...l,...lj->...j", grad_c, s.flux))
            forcing = np.zeros(s.dimension)
            if with_source and s.source is not None:
                forcing = _integral(s, phi_c[..., None] * s.source)
            rate_m = (mom[k + 1] - mom[k - 1]) / (2.0 * dt)
            momentum.append(float(np.max(np.abs(rate_m - div_flux - forcing))))
            flux_mag = _integral(s, np.abs(np.einsum("...l,...lj->...j", grad_c, s.flux)))
            if s.source is not None:
                flux_mag = flux_mag + _integral(s, np.abs(phi_c[..., None] * s.source))
            m_scale = max(m_scale, float(np.max(flux_mag)))

    def summary(values, scale):
        values = np.asarray(values)
        top = float(values.max())
        return {
            "max": top,
            "mean": float(values.mean()),
            "scale": scale,
            "relative": top / scale if scale > 0 else float("inf") if top > 0 else 0.0,
        }

    return {"continuity": summary(continuity, c_scale), "momentum": summary(momentum, m_scale)}


def ideal_gas_check(snapshot: FieldSnapshot) -> float:
    """max over occupied bins of |M − ρ u⊗u − p·Id| / |M| (Frobenius norms).

    In one dimension this is the closure M = ρu² + p with p = ρT.
    """
    if snapshot.velocity_map == "table":
        logger.warning("ideal_gas_check: the closure assumes a quadratic effective Hamiltonian")
    d = snapshot.dimension
    rho = snapshot.density
    u = snapshot.velocity
    expected = rho[..., None, None] * u[..., :, None] * u[..., None, :]
    expected = expected + snapshot.pressure[..., None, None] * np.eye(d)
    occupied = snapshot.density > 0
    if not np.any(occupied):
        return 0.0
    diff = np.linalg.norm((snapshot.flux - expected)[occupied].reshape(-1, d * d), axis=-1)
    size = np.linalg.norm(snapshot.flux[occupied].reshape(-1, d * d), axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(size > 0, diff / size, diff)
    return float(np.max(ratio))


def flux_decomposition_defect(snapshot: FieldSnapshot) -> float:
    """max |M − ρ u⊗u − stress| over bins; zero up to rounding."""
    rho = snapshot.density
    u = snapshot.velocity
    defect = snapshot.flux - rho[..., None, None] * u[..., :, None] * u[..., None, :] - snapshot.stress
    return float(np.max(np.abs(defect)))
