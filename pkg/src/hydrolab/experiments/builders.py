"""Domain objects from configuration sections."""

import numpy as np

from hydrolab.BaseObject import ConfigValidationError
from hydrolab.cell import build_table
from hydrolab.convertors import Convert
from hydrolab.EffectiveTable import EffectiveTable
from hydrolab.EmpiricalMeasure import EmpiricalMeasure
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.MicroModel import MicroModel
from hydrolab.potentials import ZeroPotential
from hydrolab.TerminalData import TerminalData


def model_from_config(config) -> MicroModel:
    section = config.section("model")
    if section["kind"] != "quadratic":
        raise ConfigValidationError(
            f"model.kind {section['kind']!r} cannot be built from a configuration; "
            "only 'quadratic' models are", key="model.kind",
        )
    return MicroModel(
        dimension=int(section["dimension"]),
        kind="quadratic",
        potential=section["potential"],
        c=float(section["c"]),
        C=float(section["C"]),
    )


def macro_from_config(config) -> MacroPotentials:
    section = config.section("macro")
    return MacroPotentials(U=section["U"], V=section["V"])


def is_free(model: MicroModel):
    return model.kind == "quadratic" and isinstance(model.periodic_potential, ZeroPotential)


def measure_from(value, key) -> EmpiricalMeasure:
    """Atoms given inline as a list, or a path to a CSV measure file."""
    if isinstance(value, str):
        loaded = Convert(value).load()
        if not isinstance(loaded, EmpiricalMeasure):
            raise ConfigValidationError(f"{key!r}: {value} does not hold an atom cloud", key=key)
        return loaded
    try:
        return EmpiricalMeasure(np.asarray(value, dtype=float))
    except (TypeError, ValueError) as e:
        raise ConfigValidationError(f"{key!r}: {e}", key=key) from e


def terminal_from_config(config, key="value.h") -> TerminalData:
    params = dict(config.get(key))
    kind = params.pop("kind", None)
    if kind == "constant":
        return TerminalData.constant(float(params.get("c", 0.0)))
    if kind in ("neg_dist_squared", "neg_dist"):
        if "reference" not in params:
            raise ConfigValidationError(f"{key}.reference is required for {kind!r}", key=f"{key}.reference")
        reference = measure_from(params["reference"], f"{key}.reference")
        return TerminalData(kind=kind, reference=reference, a=float(params.get("a", 1.0)))
    raise ConfigValidationError(
        f"{key}.kind must be one of ['constant', 'neg_dist_squared', 'neg_dist'], got {kind!r}",
        key=f"{key}.kind",
    )


def table_from_config(config, model, P_axes, v_axes=None, threads=None) -> EffectiveTable:
    """The closed-form table for the free gas, a minimax table otherwise."""
    if is_free(model):
        return EffectiveTable.quadratic(P_axes, v_axes)
    cell = config.section("cell")
    return build_table(
        model,
        P_axes,
        v_axes,
        modes=int(cell["modes"]),
        qgrid=cell["qgrid"],
        budget=int(cell["budget"]),
        restarts=int(cell["restarts"]),
        seed=config.seed,
        threads=threads,
        explicit=bool(cell["explicit"]),
    )


SOLVER_KEYS = ("knots", "restarts", "budget", "tmax_tol", "refine_tol", "max_refinements")


def solver_settings(section):
    return {k: section[k] for k in SOLVER_KEYS if k in section}
