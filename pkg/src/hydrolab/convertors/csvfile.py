import numpy as np
import pandas as pd

from hydrolab.convertors import BaseConvertor
from hydrolab.EmpiricalMeasure import EmpiricalMeasure
from hydrolab.FieldSnapshot import FieldSnapshot
from hydrolab.Trajectory import Trajectory

FLOAT_FORMAT = "%.17g"


def _columns(prefix, d):
    return [f"{prefix}{k}" for k in range(d)]


def _count(columns, prefix):
    d = 0
    while f"{prefix}{d}" in columns:
        d += 1
    return d


def measure_frame(measure: EmpiricalMeasure) -> pd.DataFrame:
    return pd.DataFrame(measure.atoms, columns=_columns("x", measure.dimension))


def trajectory_frame(trajectory: Trajectory) -> pd.DataFrame:
    K, N, d = trajectory.x.shape
    frame = pd.DataFrame(
        {
            "t": np.repeat(trajectory.times, N),
            "particle": np.tile(np.arange(N), K),
        }
    )
    for k, name in enumerate(_columns("x", d)):
        frame[name] = trajectory.x[:, :, k].reshape(-1)
    for k, name in enumerate(_columns("P", d)):
        frame[name] = trajectory.P[:, :, k].reshape(-1)
    frame["energy"] = np.repeat(trajectory.energy, N)
    frame["eps"] = trajectory.eps
    return frame


def snapshot_frame(snapshot: FieldSnapshot) -> pd.DataFrame:
    """One row per bin: center, counts and the binned moments."""
    d = snapshot.dimension
    centers = snapshot.centers().reshape(-1, d)
    frame = pd.DataFrame(centers, columns=_columns("center", d))
    frame.insert(0, "t", snapshot.t)
    frame["counts"] = snapshot.counts.reshape(-1)
    frame["density"] = snapshot.density.reshape(-1)
    for k, name in enumerate(_columns("u", d)):
        frame[name] = snapshot.velocity.reshape(-1, d)[:, k]
    frame["temperature"] = snapshot.temperature.reshape(-1)
    frame["pressure"] = snapshot.pressure.reshape(-1)
    flux = snapshot.flux.reshape(-1, d, d)
    for k in range(d):
        for l in range(d):
            frame[f"M{k}{l}"] = flux[:, k, l]
    if snapshot.source is not None:
        for k, name in enumerate(_columns("source", d)):
            frame[name] = snapshot.source.reshape(-1, d)[:, k]
    return frame


def trajectory_from_frame(frame: pd.DataFrame, eps=None) -> Trajectory:
    d = _count(frame.columns, "x")
    frame = frame.sort_values(["t", "particle"], kind="stable")
    times = np.unique(frame["t"].to_numpy(dtype=float))
    K = len(times)
    N = len(frame) // K
    if K * N != len(frame):
        raise ValueError("every recorded time must list the same particles")
    x = frame[_columns("x", d)].to_numpy(dtype=float).reshape(K, N, d)
    P = frame[_columns("P", d)].to_numpy(dtype=float).reshape(K, N, d)
    if "energy" in frame.columns:
        energy = frame["energy"].to_numpy(dtype=float).reshape(K, N)[:, 0]
    else:
        energy = np.full(K, np.nan)
    if eps is None:
        eps = float(frame["eps"].iloc[0]) if "eps" in frame.columns else 1.0
    return Trajectory(times=times, x=x, P=P, energy=energy, eps=float(eps), symplectic=True)


class CSV(BaseConvertor):
    """Comma-separated tables with full-precision floats.

    Loading returns a Trajectory when the table has ``t`` and ``particle``
    columns, an EmpiricalMeasure when it has only ``x0``.. columns, and the
    raw DataFrame otherwise.
    """

    suffix = ".csv"

    def _load(self, **kwargs):
        frame = pd.read_csv(self.filename)
        columns = set(frame.columns)
        d = _count(columns, "x")
        if {"t", "particle"} <= columns and d:
            self.logger.debug("Reading a trajectory from %s", self.filename)
            return trajectory_from_frame(frame, eps=kwargs.get("eps"))
        if d and columns == set(_columns("x", d)):
            return EmpiricalMeasure(frame[_columns("x", d)].to_numpy(dtype=float))
        return frame

    def _save(self, **kwargs):
        obj = self.obj
        if isinstance(obj, EmpiricalMeasure):
            frame = measure_frame(obj)
        elif isinstance(obj, Trajectory):
            frame = trajectory_frame(obj)
        elif isinstance(obj, FieldSnapshot):
            frame = snapshot_frame(obj)
        elif isinstance(obj, pd.DataFrame):
            frame = obj
        elif isinstance(obj, list):
            frame = pd.DataFrame(obj)
        else:
            raise TypeError(f"cannot write {type(obj).__name__} as CSV")
        frame.to_csv(self.filename, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return self.filename
