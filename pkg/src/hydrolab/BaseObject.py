import copy
from typing import Union

import numpy as np
import orjson

Number = Union[int, float]


class OutOfRangeError(ValueError):
    pass


class ExtrapolationError(OutOfRangeError):
    """A table lookup left the sampled range.

    The offending point is kept on ``velocity`` so callers can report it.
    """

    def __init__(self, message, velocity=None):
        super().__init__(message)
        self.velocity = None if velocity is None else np.asarray(velocity)


class InvalidModelError(ValueError):
    pass


class ParameterError(ValueError):
    pass


class InvalidInputError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


class CoverageError(ValueError):
    pass


class SizeLimitError(ValueError):
    pass


class UnsupportedError(ValueError):
    pass


class UnsupportedIntegratorError(UnsupportedError):
    pass


class IterationLimitError(RuntimeError):
    pass


class ConfigValidationError(ValueError):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConfigVersionError(ValueError):
    pass


def _plain(value):
    """Convert numpy values (and containers of them) to JSON-able data."""
    if isinstance(value, BaseObject):
        return value.to_dict()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


class BaseObject:
    """
    Base class for all hydrolab value objects with dict-backed storage.

    All data lives in ``self._data``. Subclasses declare ``_field_types``
    with validation rules per field:

        "field": {"data_type": float, "allowed_values": [...], "required": True}

    Numpy arrays listed in ``_array_fields`` are copied to float arrays and
    frozen on construction, so instances can be shared between threads.
    Derived quantities are cached with ``object.__setattr__`` on the
    instance and never serialized.
    """

    _field_types = {}
    _array_fields = ()

    def __init__(self, _data=None, _validate=True, **kwargs):
        data = dict(_data) if _data is not None else dict(kwargs)
        for name in self._array_fields:
            if data.get(name) is not None:
                array = np.array(data[name], dtype=float)
                array.setflags(write=False)
                data[name] = array
        object.__setattr__(self, "_data", data)
        if _validate:
            for field_name in self._field_types:
                self._check_field(field_name, data.get(field_name))

    def _check_field(self, field_name, value, expected_type=None):
        """
        Validate a single field value against its rules.

        Args:
            field_name: Name of the field to check
            value: Value to check
            expected_type: Validation rules overriding ``_field_types``.

        Raises:
            ValueError: If value doesn't match expected type or allowed values
        """
        rules = expected_type
        if rules is None:
            rules = self._field_types.get(field_name)
        if rules is None:
            return
        if not isinstance(rules, dict):
            rules = {"data_type": rules}

        if value is None:
            if rules.get("required", False):
                raise ValueError(
                    f"{self.__class__.__name__}.{field_name} is a "
                    f"required field and cannot be None"
                )
            return

        data_type = rules.get("data_type")
        if data_type is not None and not isinstance(value, data_type):
            if isinstance(data_type, tuple):
                type_names = " or ".join(t.__name__ for t in data_type)
            else:
                type_names = data_type.__name__
            raise ValueError(
                f"{self.__class__.__name__}.{field_name} must be "
                f"{type_names}, got {type(value).__name__}"
            )

        allowed_values = rules.get("allowed_values")
        if allowed_values is not None and value not in allowed_values:
            raise ValueError(
                f"{self.__class__.__name__}.{field_name} must be "
                f"one of {allowed_values}, got {value!r}"
            )

    def _set_field(self, field_name, value, expected_type=None):
        """Validate and store a field; used by the few mutable result objects."""
        self._check_field(field_name, value, expected_type)
        self._data[field_name] = value

    def __setattr__(self, name, value):
        if name in self._field_types:
            self._set_field(name, value)
        else:
            object.__setattr__(self, name, value)

    def _cached(self, name, compute):
        """Return ``self.<name>``, computing and storing it on first use."""
        try:
            return object.__getattribute__(self, name)
        except AttributeError:
            value = compute()
            object.__setattr__(self, name, value)
            return value

    def to_dict(self):
        """
        Return a plain dictionary representation.

        Arrays become nested lists and nested value objects become dicts, so
        the result can go straight to ``orjson.dumps``.
        """
        return {k: _plain(v) for k, v in self._data.items() if v is not None}

    @classmethod
    def from_dict(cls, data, _copy=True, _validate=True):
        """
        Create an instance from a dictionary representation.
        This is the inverse of to_dict().

        Args:
            data: Dictionary with object data
            _copy: If True, deep copy the data to prevent mutation.
            _validate: If False, skip field validation.

        Returns:
            Instance of the class
        """
        if not isinstance(data, dict):
            return data
        if _copy:
            data = copy.deepcopy(data)
        return cls(_data=data, _validate=_validate)

    def write(self, stream):
        """Write the object as sorted-key, indented JSON to a binary stream."""
        stream.write(
            orjson.dumps(
                self.to_dict(),
                option=orjson.OPT_SERIALIZE_NUMPY
                | orjson.OPT_SORT_KEYS
                | orjson.OPT_INDENT_2,
            )
        )
        stream.write(b"\n")

    def __repr__(self):
        fields = ", ".join(
            f"{k}={v!r}"
            for k, v in self._data.items()
            if not isinstance(v, (np.ndarray, list, dict, BaseObject))
        )
        return f"{self.__class__.__name__}({fields})"
