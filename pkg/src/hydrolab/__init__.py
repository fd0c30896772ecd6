from hydrolab.BaseObject import (
    ConfigValidationError,
    ConfigVersionError,
    CoverageError,
    ExtrapolationError,
    InvalidInputError,
    InvalidModelError,
    IterationLimitError,
    OutOfRangeError,
    ParameterError,
    PreconditionError,
    SizeLimitError,
    UnsupportedError,
    UnsupportedIntegratorError,
)
from hydrolab.cell import (
    EffectiveCost,
    build_table,
    effective_h_1d,
    effective_h_minimax,
    effective_lagrangian,
    flat_piece_edge,
    moreau_inf,
    moreau_sup,
)
from hydrolab.Corrector import Corrector
from hydrolab.dynamics import action_of_path, integrate, minimal_action
from hydrolab.EffectiveTable import EffectiveTable
from hydrolab.EmpiricalMeasure import EmpiricalMeasure
from hydrolab.ExperimentConfig import ExperimentConfig, parse_config
from hydrolab.FieldSnapshot import FieldSnapshot
from hydrolab.GridFunction import GridFunction
from hydrolab.hydro import euler_residual, fields_from_state, ideal_gas_check
from hydrolab.MacroPotentials import MacroPotentials
from hydrolab.MicroModel import MicroModel
from hydrolab.model import ParticleLagrangian, eval_h, legendre, micro_lagrangian, rescaled_hn
from hydrolab.operators import eval_bbH0, eval_bbH1, eval_bfH, eval_bfH0, eval_bfH1
from hydrolab.OperatorValue import OperatorValue
from hydrolab.ParticleState import ParticleState
from hydrolab.PathEnsemble import PathEnsemble
from hydrolab.PhaseMeasure import MultiPhaseMeasure, PhaseMeasure
from hydrolab.Plan import Plan
from hydrolab.TerminalData import TerminalData
from hydrolab.TestFunction import TestFunction
from hydrolab.Trajectory import Trajectory
from hydrolab.transport import (
    barycentric_projection,
    geodesic,
    quotient_metric_bruteforce,
    tangent_pairing,
    wasserstein,
)
from hydrolab.value import (
    converge_harness,
    resolve,
    resolve_continuum,
    resolve_particle,
    resolvent_identity_check,
    semigroup,
)
from hydrolab.ValueEstimate import ValueEstimate

__all__ = [
    "MicroModel",
    "MacroPotentials",
    "GridFunction",
    "EffectiveTable",
    "EffectiveCost",
    "Corrector",
    "EmpiricalMeasure",
    "PhaseMeasure",
    "MultiPhaseMeasure",
    "Plan",
    "ParticleState",
    "PathEnsemble",
    "Trajectory",
    "ParticleLagrangian",
    "TerminalData",
    "ValueEstimate",
    "TestFunction",
    "OperatorValue",
    "FieldSnapshot",
    "ExperimentConfig",
    "eval_h",
    "legendre",
    "rescaled_hn",
    "micro_lagrangian",
    "effective_h_1d",
    "effective_h_minimax",
    "effective_lagrangian",
    "flat_piece_edge",
    "build_table",
    "moreau_inf",
    "moreau_sup",
    "wasserstein",
    "quotient_metric_bruteforce",
    "geodesic",
    "barycentric_projection",
    "tangent_pairing",
    "integrate",
    "action_of_path",
    "minimal_action",
    "resolve",
    "resolve_particle",
    "resolve_continuum",
    "semigroup",
    "resolvent_identity_check",
    "converge_harness",
    "eval_bbH0",
    "eval_bfH0",
    "eval_bbH1",
    "eval_bfH1",
    "eval_bfH",
    "fields_from_state",
    "euler_residual",
    "ideal_gas_check",
    "parse_config",
    "load",
    "save",
    "OutOfRangeError",
    "ExtrapolationError",
    "InvalidModelError",
    "ParameterError",
    "InvalidInputError",
    "PreconditionError",
    "CoverageError",
    "SizeLimitError",
    "UnsupportedError",
    "UnsupportedIntegratorError",
    "IterationLimitError",
    "ConfigValidationError",
    "ConfigVersionError",
]


def load(filename, **kwargs):
    """Load a measure, trajectory or table (``.csv``) or JSON data (``.json``).

    Args:
        filename: Path to the file; the suffix picks the format.
        cls: For JSON, a value-object class to rebuild with ``from_dict``.
        eps: For trajectory CSVs without an ``eps`` column.

    Returns:
        EmpiricalMeasure, Trajectory, pandas DataFrame, value object or dict
    """
    from hydrolab.convertors import Convert

    return Convert(filename).load(**kwargs)


def save(obj, filename, **kwargs):
    """Write ``obj`` in the format given by the suffix of ``filename``."""
    from hydrolab.convertors import Convert

    return Convert(filename).save(obj, **kwargs)
