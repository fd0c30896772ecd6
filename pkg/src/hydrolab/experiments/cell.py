import logging

import numpy as np
import pandas as pd

from hydrolab.BaseObject import InvalidModelError
from hydrolab.cell import effective_h_1d, effective_h_minimax
from hydrolab.convertors import Convert
from hydrolab.parallel import map_tasks

from .builders import model_from_config

logger = logging.getLogger(__name__)


def run_cell(config, output, threads):
    """H̄ on ``cell.Pgrid``: minimax bracket and, in 1D, the explicit value.

    Writes ``cell.csv`` with columns P (P0.. for d > 1), lower, upper,
    explicit (blank when unavailable), corrector_modes, converged.
    """
    cell = config.section("cell")
    model = model_from_config(config)
    d = model.dimension
    points = np.asarray(cell["Pgrid"], dtype=float).reshape(-1, d)
    logger.info("Cell problem at %i momenta", len(points))

    def solve(i):
        P = points[i]
        lower, upper, corrector = effective_h_minimax(
            model,
            P,
            modes=int(cell["modes"]),
            qgrid=cell["qgrid"],
            budget=int(cell["budget"]),
            restarts=int(cell["restarts"]),
            seed=config.seed,
            key=(i,),
        )
        explicit = np.nan
        if cell["explicit"] and d == 1:
            try:
                explicit = effective_h_1d(model, P[0], tol=float(cell["tol"]))
            except InvalidModelError as e:
                logger.info("No explicit value at P=%s: %s", P.tolist(), e)
        return lower, upper, explicit, corrector.converged

    results = map_tasks(solve, range(len(points)), threads)
    columns = ["P"] if d == 1 else [f"P{k}" for k in range(d)]
    frame = pd.DataFrame(points, columns=columns)
    frame["lower"] = [r[0] for r in results]
    frame["upper"] = [r[1] for r in results]
    frame["explicit"] = [r[2] for r in results]
    frame["corrector_modes"] = int(cell["modes"])
    frame["converged"] = [bool(r[3]) for r in results]
    Convert(output / "cell.csv").save(frame)
    return bool(frame["converged"].all())
