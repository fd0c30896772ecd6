import logging

from scipy.stats import norm

from hydrolab.convertors import Convert
from hydrolab.value import CONVERGENCE_COLUMNS, converge_harness, eps_schedule

from .builders import macro_from_config, measure_from, solver_settings, terminal_from_config

logger = logging.getLogger(__name__)


def target_from_config(config):
    """A normal law from ``{"loc", "scale"}`` or an atom cloud from ``{"atoms"}``."""
    target = config.get("schedule.target")
    if "atoms" in target:
        return measure_from(target["atoms"], "schedule.target.atoms")
    return norm(loc=float(target.get("loc", 0.0)), scale=float(target.get("scale", 1.0)))


def run_converge(config, output, threads):
    """Errors e_N along ``schedule.N`` with ε_N = N^(−eps_exponent); writes
    ``converge.csv`` sorted by N."""
    schedule = config.section("schedule")
    section = config.section("value")
    settings = solver_settings(section)
    frame = converge_harness(
        terminal_from_config(config),
        target=target_from_config(config),
        alpha=float(section["alpha"]),
        schedule=eps_schedule(schedule["N"], float(schedule["eps_exponent"])),
        seed=config.seed,
        sampling=schedule["sampling"],
        proxy_atoms=int(schedule["proxy_atoms"]),
        macro=macro_from_config(config),
        threads=threads,
        **settings,
    )
    frame = frame.sort_values("N", kind="stable").reset_index(drop=True)
    for row in frame.itertuples():
        logger.info("N=%i eps=%.4g error=%.6g", row.N, row.eps, row.error)
    Convert(output / "converge.csv").save(frame[CONVERGENCE_COLUMNS])
    return bool(frame["converged"].all())
