import logging

import numpy as np

from hydrolab.BaseObject import ConfigValidationError
from hydrolab.convertors import Convert
from hydrolab.operators import eval_all
from hydrolab.TestFunction import TestFunction

from .builders import macro_from_config, model_from_config, table_from_config

logger = logging.getLogger(__name__)

OPERATOR_NAMES = ["bbH0", "bfH0", "bbH1", "bfH1", "bfH_plus", "bfH_minus"]


def load_instance(instance):
    """An instance file (or inline object) with ``atoms``, ``anchors`` and
    an optional ``psi`` description ``{"kind", "a", "cap"}``.

    Returns:
        (atoms, test function of sign plus)
    """
    if isinstance(instance, str):
        instance = Convert(instance).load()
    try:
        atoms = np.asarray(instance["atoms"], dtype=float)
        psi = dict(instance.get("psi") or {})
        f = TestFunction(
            sign="plus",
            anchors=instance["anchors"],
            psi=psi.get("kind", "linear"),
            a=psi.get("a"),
            cap=psi.get("cap", 1.0),
        )
    except KeyError as e:
        raise ConfigValidationError(f"operator instance lacks {e.args[0]!r}", key="operators.instance") from e
    return (atoms[:, None] if atoms.ndim == 1 else atoms), f


def run_operators(config, output, threads):
    """All six operator values of one instance; writes ``operators.json``."""
    section = config.section("operators")
    atoms, f = load_instance(section["instance"])
    model = model_from_config(config)
    if atoms.shape[1] != model.dimension:
        raise ConfigValidationError(
            f"instance atoms have dimension {atoms.shape[1]}, the model {model.dimension}",
            key="operators.instance",
        )
    v_max = float(section["v_max"])
    v_axes = [np.linspace(-v_max, v_max, int(section["v_points"]))] * model.dimension
    P_axes = [np.asarray(config.get("cell.Pgrid"), dtype=float)] * model.dimension
    table = table_from_config(config, model, P_axes, v_axes, threads)
    summary = eval_all(f, atoms, table, macro_from_config(config))
    for name in OPERATOR_NAMES:
        logger.info("%-9s = %.10g", name, summary[name])
    logger.info("unique plans: plus=%s minus=%s", summary["unique_plus"], summary["unique_minus"])
    summary["seed"] = config.seed
    Convert(output / "operators.json").save(summary)
    return True
