import logging

import numpy as np

from hydrolab.BaseObject import ConfigValidationError, PreconditionError
from hydrolab.convertors import Convert
from hydrolab.hydro import (
    bump_functions,
    euler_residual,
    fields_from_state,
    flux_decomposition_defect,
    ideal_gas_check,
)
from hydrolab.Trajectory import Trajectory

from .builders import is_free, macro_from_config, model_from_config, table_from_config

logger = logging.getLogger(__name__)


def _box(trajectory, lower, upper):
    """The configured box, or the range of all recorded positions padded by 5%."""
    x = trajectory.x.reshape(-1, trajectory.x.shape[-1])
    lo, hi = x.min(axis=0), x.max(axis=0)
    pad = 0.05 * np.maximum(hi - lo, 1e-9)
    lower = lo - pad if lower is None else np.broadcast_to(np.asarray(lower, dtype=float), lo.shape)
    upper = hi + pad if upper is None else np.broadcast_to(np.asarray(upper, dtype=float), hi.shape)
    return lower, upper


def run_hydro(config, output, threads):
    """Binned fields of a recorded trajectory and its weak Euler residuals.

    Writes ``fields_<k>.csv`` per snapshot and ``hydro.json``.
    """
    section = config.section("hydro")
    trajectory = Convert(section["trajectory"]).load(eps=config.get("dynamics.eps"))
    if not isinstance(trajectory, Trajectory):
        raise ConfigValidationError(
            f"{section['trajectory']} does not hold a trajectory", key="hydro.trajectory"
        )
    model = model_from_config(config)
    macro = macro_from_config(config)
    table = None
    if not is_free(model):
        span = float(np.max(np.abs(trajectory.P))) * 1.25
        P_axes = [np.linspace(-span, span, 33)] * model.dimension
        table = table_from_config(config, model, P_axes, threads=threads)
    lower, upper = _box(trajectory, section["lower"], section["upper"])
    shape = [int(section["bins"])] * len(lower)

    indices = range(0, len(trajectory), max(int(section["every"]), 1))
    logger.info("Binning %i snapshots into %s bins", len(indices), shape)
    snapshots = []
    for k in indices:
        snapshot = fields_from_state(trajectory[k], lower, upper, shape, table, macro)
        Convert(output / f"fields_{k:04d}.csv").save(snapshot)
        snapshots.append(snapshot)

    summary = {
        "snapshots": len(snapshots),
        "mass": [s.total_mass() for s in snapshots],
        "ideal_gas": max(ideal_gas_check(s) for s in snapshots),
        "flux_decomposition": max(flux_decomposition_defect(s) for s in snapshots),
        "non_smooth": any(s.non_smooth for s in snapshots),
        "seed": config.seed,
    }
    if len(snapshots) >= 3:
        bumps = bump_functions(lower, upper, int(section["bumps"]))
        try:
            summary["residuals"] = euler_residual(snapshots, bumps)
        except PreconditionError as e:
            logger.warning("No weak Euler residuals: %s", e)
    else:
        logger.warning("Fewer than 3 snapshots: no weak Euler residuals")
    Convert(output / "hydro.json").save(summary)
    return True
