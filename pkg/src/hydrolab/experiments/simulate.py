import logging

import numpy as np

from hydrolab.convertors import Convert
from hydrolab.dynamics import integrate
from hydrolab.parallel import task_rng
from hydrolab.ParticleState import ParticleState

from .builders import macro_from_config, model_from_config

logger = logging.getLogger(__name__)


def initial_state(config, dimension):
    """``dynamics.initial`` ({"x": ..., "P": ...}) or a seeded random cloud
    with positions uniform on [0, 1)^d and standard normal momenta."""
    dyn = config.section("dynamics")
    eps = float(dyn["eps"])
    initial = dyn["initial"]
    if initial is not None:
        x = np.asarray(initial["x"], dtype=float)
        x = x[:, None] if x.ndim == 1 else x
        P = np.asarray(initial.get("P", np.zeros_like(x)), dtype=float).reshape(x.shape)
        return ParticleState(t=0.0, x=x, P=P, eps=eps)
    seed = config.seed if dyn["seed"] is None else int(dyn["seed"])
    n = int(dyn["N"])
    rng = task_rng(seed, 0)
    x = rng.uniform(size=(n, dimension))
    P = rng.normal(size=(n, dimension))
    return ParticleState(t=0.0, x=x, P=P, eps=eps)


def run_simulate(config, output, threads):
    """Integrates the N-particle flow; writes ``trajectory.csv`` and
    ``simulate.json`` (energy drift and integrator)."""
    dyn = config.section("dynamics")
    model = model_from_config(config)
    macro = macro_from_config(config)
    state = initial_state(config, model.dimension)
    logger.info("Integrating %i particles for %i steps", state.N, int(dyn["steps"]))
    trajectory = integrate(
        state,
        model,
        macro,
        float(dyn["dt"]),
        int(dyn["steps"]),
        allow_fallback=bool(dyn["allow_fallback"]),
        record_every=int(dyn["record_every"]),
    )
    Convert(output / "trajectory.csv").save(trajectory)
    Convert(output / "simulate.json").save(
        {
            "relative_drift": trajectory.relative_drift(),
            "symplectic": trajectory.symplectic,
            "recorded": len(trajectory),
            "seed": config.seed,
        }
    )
    return True
