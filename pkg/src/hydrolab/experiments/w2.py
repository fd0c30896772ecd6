import logging

from hydrolab.convertors import Convert
from hydrolab.transport import w2_1d, wasserstein

from .builders import measure_from

logger = logging.getLogger(__name__)


def run_w2(config, output, threads):
    """W_p between ``transport.rho`` and ``transport.gamma`` and the matching.

    Unequal one-dimensional clouds fall back to the monotone coupling with
    p = 2 and no permutation.
    """
    rho = measure_from(config.get("transport.rho"), "transport.rho")
    gamma = measure_from(config.get("transport.gamma"), "transport.gamma")
    p = float(config.get("transport.p"))
    if rho.N != gamma.N and rho.dimension == 1 and gamma.dimension == 1 and p == 2.0:
        summary = {"distance": w2_1d(rho, gamma), "p": p, "permutation": None}
    else:
        value, plan = wasserstein(rho, gamma, p)
        summary = {"distance": value, "p": p, "permutation": plan.permutation, "cost": plan.cost}
    summary["seed"] = config.seed
    logger.info("W_%g = %.17g", p, summary["distance"])
    Convert(output / "w2.json").save(summary)
    return True
