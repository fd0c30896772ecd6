import logging

import numpy as np

from hydrolab.BaseObject import ConfigValidationError
from hydrolab.cell import EffectiveCost
from hydrolab.convertors import Convert
from hydrolab.model import ParticleLagrangian
from hydrolab.value import growth_bounds, resolve

from .builders import (
    macro_from_config,
    measure_from,
    model_from_config,
    solver_settings,
    table_from_config,
    terminal_from_config,
)

logger = logging.getLogger(__name__)


def cost_from_config(config, threads):
    """L_N at ``value.eps`` for the particle level, the table cost for the
    continuum level."""
    level = config.get("value.level")
    model = model_from_config(config)
    macro = macro_from_config(config)
    if level == "particle":
        return ParticleLagrangian(model, macro, float(config.get("value.eps")))
    if level == "continuum":
        grid = np.asarray(config.get("cell.Pgrid"), dtype=float).reshape(-1, model.dimension)
        P_axes = [np.unique(grid[:, k]) for k in range(model.dimension)]
        v_max = config.get("cell.v_max")
        v_axes = None if v_max is None else [np.linspace(-v_max, v_max, len(a)) for a in P_axes]
        return EffectiveCost(table_from_config(config, model, P_axes, v_axes, threads), macro)
    raise ConfigValidationError(
        f"value.level must be 'particle' or 'continuum', got {level!r}", key="value.level"
    )


def run_resolve(config, output, threads):
    """(R_α h)(x) at ``value.x``; writes ``value.json`` with the estimate,
    its best path and the growth sandwich."""
    section = config.section("value")
    h = terminal_from_config(config)
    x = measure_from(section["x"], "value.x")
    cost = cost_from_config(config, threads)
    alpha = float(section["alpha"])
    estimate = resolve(h, alpha, x, cost, seed=config.seed, threads=threads, **solver_settings(section))
    bounds = growth_bounds(h, alpha, x, cost)
    logger.info(
        "R_%g h = %.10g (sandwich %.6g .. %.6g)", alpha, estimate.value, bounds["lower"], bounds["upper"]
    )
    Convert(output / "value.json").save(
        {"estimate": estimate, "growth_bounds": bounds, "seed": config.seed}
    )
    return estimate.converged
