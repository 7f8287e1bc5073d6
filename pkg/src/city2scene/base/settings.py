import abc
import copy
import dataclasses
import json
import logging
import pathlib
import types
import typing
from enum import Enum
from typing import Any, ClassVar, TypeVar

TSettings = TypeVar("TSettings", bound="Settings")


class ConfigurationError(ValueError):
    def __init__(self, problems: list[str], source: str = None):
        self.problems = list(problems)
        origin = f" in {source}" if source is not None else ""
        super().__init__(
            f"Invalid configuration{origin}: " + "; ".join(self.problems)
            if self.problems
            else f"Invalid configuration{origin}."
        )


def _concrete_type(hint: Any) -> Any:
    origin = typing.get_origin(hint)
    if origin is typing.Union or origin is types.UnionType:
        candidates = [a for a in typing.get_args(hint) if a is not type(None)]
        return candidates[0] if len(candidates) > 0 else Any
    return hint


def _to_plain(value: Any) -> Any:
    if isinstance(value, Settings):
        return value.to_dict()
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, pathlib.PurePath):
        return str(value)
    if isinstance(value, tuple):
        return [_to_plain(v) for v in value]
    if isinstance(value, list):
        return [_to_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _to_plain(v) for k, v in value.items()}
    return value


def _from_plain(hint: Any, value: Any, name: str) -> Any:
    if value is None:
        return None
    concrete = _concrete_type(hint)
    # On Python 3.10, isinstance(tuple[int, int], type) is True; treat such generic
    # aliases as non-classes, as Python 3.11+ does.
    is_class = isinstance(concrete, type) and not isinstance(concrete, types.GenericAlias)
    if is_class and issubclass(concrete, Settings):
        if not isinstance(value, dict):
            raise ConfigurationError([f"{name} must be an object"])
        return concrete.from_dict(value, prefix=name + ".")
    if is_class and issubclass(concrete, Enum):
        try:
            return concrete(value)
        except ValueError:
            allowed = [e.value for e in concrete]
            raise ConfigurationError([f"{name} must be one of {allowed}"]) from None
    if typing.get_origin(concrete) is tuple and isinstance(value, list):
        return tuple(value)
    if concrete is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


def set_nested_value(d: dict, input_key: str, value: Any) -> None:
    keys = input_key.split(".")
    if not all(isinstance(k, str) and len(k) > 0 for k in keys):
        raise ConfigurationError([f"'{input_key}' is not a valid dotted key"])
    for key in keys[:-1]:
        d = d.setdefault(key, {})
        if not isinstance(d, dict):
            raise ConfigurationError([f"'{input_key}' does not address an object"])
    d[keys[-1]] = value


def parse_override(override: str) -> tuple[str, Any]:
    if "=" not in override:
        raise ConfigurationError([f"override '{override}' is not in key=value form"])
    key, raw_value = override.split("=", 1)
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    return key.strip(), value


def apply_overrides(data: dict, overrides: list[str] | None) -> dict:
    output = copy.deepcopy(data)
    for override in overrides or []:
        key, value = parse_override(override)
        set_nested_value(output, key, value)
    return output


def load_json(path: str | pathlib.Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as err:
        raise ConfigurationError([f"not valid JSON ({err})"], source=str(path))
    if not isinstance(data, dict):
        raise ConfigurationError(["the top level must be an object"], str(path))
    return data


def save_json(data: dict, path: str | pathlib.Path) -> None:
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_to_plain(data), f, indent=2, sort_keys=False)
        f.write("\n")


@dataclasses.dataclass
class Settings(abc.ABC):
    """
    Base of every configuration object. Fields default to None and are filled in
    __post_init__; problems() lists what is wrong with the current values.
    """

    LoggerName: ClassVar[str] = "[city2scene::Settings]"

    @abc.abstractmethod
    def problems(self) -> list[str]:
        pass

    def is_valid(self) -> bool:
        logger = logging.getLogger(self.LoggerName)
        problems = self.problems()
        for problem in problems:
            logger.error(problem)
        return len(problems) == 0

    def validate(self: TSettings) -> TSettings:
        problems = self.problems()
        if len(problems) > 0:
            raise ConfigurationError(problems)
        return self

    def to_dict(self) -> dict:
        return {
            field.name: _to_plain(getattr(self, field.name))
            for field in dataclasses.fields(self)
            if field.init and not field.name.startswith("_")
        }

    @classmethod
    def from_dict(cls: type[TSettings], data: dict, prefix: str = "") -> TSettings:
        hints = typing.get_type_hints(cls)
        known = {
            f.name: f
            for f in dataclasses.fields(cls)
            if f.init and not f.name.startswith("_")
        }
        unknown = [prefix + k for k in data if k not in known]
        if len(unknown) > 0:
            raise ConfigurationError([f"unknown field {k}" for k in unknown])

        kwargs = {
            name: _from_plain(hints[name], value, prefix + name)
            for name, value in data.items()
        }
        return cls(**kwargs)


def prefixed(prefix: str, problems: list[str]) -> list[str]:
    return [prefix + p for p in problems]
