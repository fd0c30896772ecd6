"""Experiment runners, one per CLI subcommand.

A runner is called as ``runner(config, output, threads)`` with the output
directory already created, writes its artifacts there and returns whether
every solver it ran converged.
"""

import logging
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from hydrolab.convertors import Convert
from hydrolab.parallel import resolve_threads

from .cell import run_cell
from .converge import run_converge
from .hydro import run_hydro
from .operators import run_operators
from .resolve import run_resolve
from .simulate import run_simulate
from .w2 import run_w2

logger = logging.getLogger(__name__)

EXPERIMENTS = {
    "cell": run_cell,
    "w2": run_w2,
    "simulate": run_simulate,
    "resolve": run_resolve,
    "converge": run_converge,
    "operators": run_operators,
    "hydro": run_hydro,
}

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

PACKAGES = ["hydrolab", "numpy", "scipy", "pandas", "orjson"]


def get_experiment(kind):
    if kind not in EXPERIMENTS:
        raise ValueError(f"Unknown experiment {kind}")
    return EXPERIMENTS[kind]


def package_versions():
    versions = {}
    for name in PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


def prepare_output(path, force=False):
    """Create the output directory, refusing a non-empty one unless ``force``."""
    path = Path(path)
    if path.exists() and (not path.is_dir() or any(path.iterdir())):
        if not force:
            raise FileExistsError(f"output directory {path} exists; pass --force to overwrite")
        logger.warning("Overwriting artifacts in %s", path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def run(config, force=False, threads=None) -> int:
    """Run the experiment ``config.kind`` and write ``manifest.json``.

    Returns:
        0 on success, 2 when a solver did not converge (artifacts are
        still written)

    Raises:
        FileExistsError: if the output directory is taken and not ``force``
    """
    runner = get_experiment(config.kind)
    threads = resolve_threads(threads)
    output = prepare_output(config.output, force)
    logger.info("Running %s experiment into %s (seed %i, %i threads)", config.kind, output, config.seed, threads)
    started = time.perf_counter()
    converged = runner(config, output, threads)
    status = "ok" if converged else "not_converged"
    if not converged:
        logger.warning("Some solvers did not converge; artifacts are written regardless")
    Convert(output / "manifest.json").save(
        {
            "kind": config.kind,
            "config": config.to_dict(),
            "seed": config.seed,
            "threads": threads,
            "versions": package_versions(),
            "wall_time_s": time.perf_counter() - started,
            "status": status,
        }
    )
    return EXIT_OK if converged else EXIT_NOT_CONVERGED
