import copy
import logging

import orjson

from .BaseObject import BaseObject, ConfigValidationError, ConfigVersionError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

KINDS = ["cell", "w2", "simulate", "resolve", "converge", "operators", "hydro"]

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "kind": None,
    "seed": 0,
    "output": "results",
    "model": {
        "dimension": 1,
        "kind": "quadratic",
        "potential": {"kind": "zero"},
        "c": 1.0,
        "C": 2.0,
    },
    "macro": {"U": {"kind": "zero"}, "V": {"kind": "zero"}},
    "cell": {
        "Pgrid": [-2.0, -1.0, 0.0, 1.0, 2.0],
        "tol": 1e-10,
        "modes": 8,
        "qgrid": None,
        "budget": 200,
        "restarts": 8,
        "explicit": True,
        "v_max": None,
    },
    "transport": {"rho": None, "gamma": None, "p": 2.0},
    "dynamics": {
        "N": 8,
        "eps": 0.1,
        "dt": 1e-5,
        "steps": 1000,
        "record_every": 10,
        "allow_fallback": False,
        "initial": None,
        "seed": None,
        "knots": 16,
        "budget": 200,
        "restarts": 4,
    },
    "value": {
        "alpha": 1.0,
        "knots": 16,
        "restarts": 4,
        "budget": 200,
        "tmax_tol": 1e-6,
        "refine_tol": 1e-4,
        "max_refinements": 2,
        "level": "particle",
        "eps": 0.1,
        "h": {"kind": "neg_dist_squared", "a": 1.0, "reference": [0.0]},
        "x": None,
    },
    "schedule": {
        "N": [4, 8, 16, 32],
        "eps_exponent": 0.5,
        "sampling": "stratified",
        "proxy_atoms": 64,
        "target": {"loc": 0.0, "scale": 1.0},
    },
    "operators": {"instance": None, "v_max": 8.0, "v_points": 1601},
    "hydro": {
        "trajectory": None,
        "lower": None,
        "upper": None,
        "bins": 20,
        "bumps": 5,
        "every": 1,
    },
}

# Values at these keys are passed through unchecked.
FREE_FORM = {"model.potential", "macro.U", "macro.V", "value.h", "schedule.target", "dynamics.initial"}

REQUIRED = {
    "w2": ["transport.rho", "transport.gamma"],
    "resolve": ["value.x"],
    "operators": ["operators.instance"],
    "hydro": ["hydro.trajectory"],
}

SECTIONS = [key for key, value in DEFAULTS.items() if isinstance(value, dict)]


def _merge(defaults, given, prefix=""):
    merged = copy.deepcopy(defaults)
    for key, value in given.items():
        path = f"{prefix}{key}"
        if key not in defaults:
            raise ConfigValidationError(f"unknown configuration key {path!r}", key=path)
        if isinstance(defaults[key], dict) and path not in FREE_FORM:
            if not isinstance(value, dict):
                raise ConfigValidationError(f"{path!r} must be an object", key=path)
            merged[key] = _merge(defaults[key], value, prefix=f"{path}.")
        else:
            merged[key] = value
    return merged


def _lookup(data, path):
    node = data
    for part in path.split("."):
        node = node.get(part) if isinstance(node, dict) else None
    return node


class ExperimentConfig(BaseObject):
    """A validated experiment configuration with every default filled in.

    Sections are plain dicts; ``config.section("value")["alpha"]`` or the
    dotted form ``config.get("value.alpha")``.
    """

    _field_types = {
        "schema_version": {"data_type": int, "required": True},
        "kind": {"data_type": str, "allowed_values": KINDS, "required": True},
        "seed": {"data_type": int, "required": True},
        "output": {"data_type": str, "required": True},
        **{name: {"data_type": dict, "required": True} for name in SECTIONS},
    }

    @classmethod
    def from_dict(cls, data, _copy=True, _validate=True):
        """Validate ``data`` and fill in defaults.

        Raises:
            ConfigVersionError: for an unsupported schema version
            ConfigValidationError: for unknown or missing keys
        """
        if not isinstance(data, dict):
            raise ConfigValidationError("a configuration must be a JSON object")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigVersionError(
                f"unsupported schema_version {version!r}; this build reads version {SCHEMA_VERSION}"
            )
        merged = _merge(DEFAULTS, data)
        if merged["kind"] is None:
            raise ConfigValidationError("configuration key 'kind' is required", key="kind")
        if merged["kind"] not in KINDS:
            raise ConfigValidationError(
                f"'kind' must be one of {KINDS}, got {merged['kind']!r}", key="kind"
            )
        for path in REQUIRED.get(merged["kind"], []):
            if _lookup(merged, path) is None:
                raise ConfigValidationError(
                    f"configuration key {path!r} is required for {merged['kind']!r} experiments",
                    key=path,
                )
        return cls(_data=merged, _validate=_validate)

    @classmethod
    def load(cls, path):
        """Read and validate a JSON configuration file.

        Raises:
            FileNotFoundError: if the file does not exist
        """
        with open(path, "rb") as f:
            data = orjson.loads(f.read())
        logger.debug("Loaded configuration from %s", path)
        return cls.from_dict(data)

    @property
    def schema_version(self):
        return self._data["schema_version"]

    @property
    def kind(self):
        return self._data["kind"]

    @property
    def seed(self):
        return self._data["seed"]

    @property
    def output(self):
        return self._data["output"]

    def section(self, name):
        return self._data[name]

    def get(self, path, default=None):
        value = _lookup(self._data, path)
        return default if value is None else value

    def with_overrides(self, seed=None, output=None):
        data = copy.deepcopy(self._data)
        if seed is not None:
            data["seed"] = int(seed)
        if output is not None:
            data["output"] = str(output)
        return ExperimentConfig(_data=data)


def parse_config(path) -> ExperimentConfig:
    return ExperimentConfig.load(path)
