"""Canonical text form for every record in the package.

Records serialize to JSON objects whose first key is ``"__type__"`` and
whose remaining keys follow dataclass field order. Floats are written with
17 significant digits so that parsing recovers the exact double. The same
emitter writes reports and graph dumps, which keeps them byte-stable.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
import types as _pytypes
import typing
from enum import Enum
from typing import Any, Optional, Union

import numpy as np

from . import types as T
from .errors import ParseError

TYPE_KEY = "__type__"

_REGISTRY: dict[str, type] = {}


def register(cls: type) -> type:
    _REGISTRY[cls.__name__] = cls
    return cls


for _cls in (
    T.Triple, T.SampleSet, T.TripleEmbedding, T.Node, T.Edge, T.KnowledgeGraph,
    T.RgcnParams, T.TripleScoreCard, T.DetectorConfig, T.CalibrationResult,
):
    register(_cls)


def format_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x!r}")
    text = format(x, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def dumps(value: Any, indent: Optional[int] = None) -> str:
    """Write a plain JSON value (dict/list/str/number/bool/None) canonically.

    Dict keys keep insertion order; callers that need sorted output sort first.
    """
    out: list[str] = []
    _emit(to_plain(value), indent, 0, out)
    return "".join(out)


def _emit(v: Any, indent: Optional[int], level: int, out: list[str]) -> None:
    if v is None:
        out.append("null")
    elif v is True:
        out.append("true")
    elif v is False:
        out.append("false")
    elif isinstance(v, int):
        out.append(str(v))
    elif isinstance(v, float):
        out.append(format_float(v))
    elif isinstance(v, str):
        out.append(json.dumps(v, ensure_ascii=False))
    elif isinstance(v, list):
        if not v:
            out.append("[]")
            return
        scalar = all(not isinstance(x, (list, dict)) for x in v)
        if indent is None or scalar:
            out.append("[")
            for i, x in enumerate(v):
                if i:
                    out.append(", " if indent is not None else ",")
                _emit(x, indent, level + 1, out)
            out.append("]")
        else:
            pad = "\n" + " " * (indent * (level + 1))
            out.append("[")
            for i, x in enumerate(v):
                out.append(("," if i else "") + pad)
                _emit(x, indent, level + 1, out)
            out.append("\n" + " " * (indent * level) + "]")
    elif isinstance(v, dict):
        if not v:
            out.append("{}")
            return
        sep = ": " if indent is not None else ":"
        if indent is None:
            out.append("{")
            for i, (k, x) in enumerate(v.items()):
                if i:
                    out.append(",")
                out.append(json.dumps(str(k), ensure_ascii=False) + sep)
                _emit(x, indent, level + 1, out)
            out.append("}")
        else:
            pad = "\n" + " " * (indent * (level + 1))
            out.append("{")
            for i, (k, x) in enumerate(v.items()):
                out.append(("," if i else "") + pad + json.dumps(str(k), ensure_ascii=False) + sep)
                _emit(x, indent, level + 1, out)
            out.append("\n" + " " * (indent * level) + "}")
    else:
        raise TypeError(f"cannot emit {type(v).__name__}")


def to_plain(obj: Any) -> Any:
    """Convert records, enums, arrays and tuples into plain JSON values."""
    if obj is None or isinstance(obj, (bool, str)):
        return obj
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        out: dict[str, Any] = {TYPE_KEY: type(obj).__name__}
        for f in dataclasses.fields(obj):
            out[f.name] = to_plain(getattr(obj, f.name))
        return out
    if isinstance(obj, (list, tuple)):
        return [to_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {str(to_plain(k)): to_plain(v) for k, v in obj.items()}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def serialize(obj: Any) -> str:
    if not dataclasses.is_dataclass(obj):
        raise TypeError("serialize expects a record instance")
    return dumps(obj)


def deserialize(text: str, cls: Optional[type] = None) -> Any:
    """Parse the canonical form back into a record.

    Raises ParseError carrying the character offset of the problem: the
    decoder's offset for malformed JSON, else the offending key's offset.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed input: {exc.msg}", pos=exc.pos) from None
    if not isinstance(data, dict) or TYPE_KEY not in data:
        raise ParseError(f"expected an object with {TYPE_KEY!r}", pos=0)
    name = data[TYPE_KEY]
    if cls is None:
        cls = _REGISTRY.get(name)
        if cls is None:
            raise ParseError(f"unknown record type {name!r}", pos=_locate(text, TYPE_KEY), key=TYPE_KEY)
    return _Decoder(text).decode(data, cls, "$")


def _locate(text: str, key: str) -> Optional[int]:
    m = re.search(r'"%s"\s*:' % re.escape(key), text)
    return m.start() if m else None


class _Decoder:
    def __init__(self, text: str):
        self.text = text

    def fail(self, message: str, path: str, key: Optional[str] = None):
        pos = _locate(self.text, key) if key else None
        raise ParseError(f"{message} (at {path})", pos=pos, key=key)

    def decode(self, value: Any, ann: Any, path: str) -> Any:
        origin = typing.get_origin(ann)
        args = typing.get_args(ann)
        if ann is Any:
            return value
        if origin in (Union, _pytypes.UnionType):
            if value is None and type(None) in args:
                return None
            inner = [a for a in args if a is not type(None)]
            return self.decode(value, inner[0], path)
        if ann is type(None):
            if value is not None:
                self.fail("expected null", path)
            return None
        if origin is tuple:
            if not isinstance(value, list):
                self.fail("expected a list", path)
            if len(args) == 2 and args[1] is Ellipsis:
                return tuple(self.decode(x, args[0], f"{path}[{i}]") for i, x in enumerate(value))
            if len(args) != len(value):
                self.fail(f"expected {len(args)} items", path)
            return tuple(self.decode(x, a, f"{path}[{i}]") for i, (x, a) in enumerate(zip(value, args)))
        if origin is list:
            if not isinstance(value, list):
                self.fail("expected a list", path)
            return [self.decode(x, args[0], f"{path}[{i}]") for i, x in enumerate(value)]
        if origin is dict:
            if not isinstance(value, dict):
                self.fail("expected an object", path)
            kt, vt = args
            out = {}
            for k, v in value.items():
                try:
                    key = kt(k)
                except ValueError:
                    self.fail(f"bad key {k!r}", path, key=k)
                out[key] = self.decode(v, vt, f"{path}.{k}")
            return out
        if ann is np.ndarray:
            try:
                arr = np.array(value, dtype=np.float64)
            except (TypeError, ValueError):
                self.fail("expected a numeric array", path)
            return arr
        if isinstance(ann, type) and issubclass(ann, Enum):
            try:
                return ann(value)
            except ValueError:
                self.fail(f"invalid {ann.__name__} value {value!r}", path)
        if ann is bool:
            if not isinstance(value, bool):
                self.fail("expected a boolean", path)
            return value
        if ann is int:
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail("expected an integer", path)
            return value
        if ann is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                self.fail("expected a number", path)
            return float(value)
        if ann is str:
            if not isinstance(value, str):
                self.fail("expected a string", path)
            return value
        if dataclasses.is_dataclass(ann):
            return self.decode_record(value, ann, path)
        raise TypeError(f"unsupported annotation {ann!r}")

    def decode_record(self, value: Any, cls: type, path: str) -> Any:
        if not isinstance(value, dict):
            self.fail(f"expected a {cls.__name__} object", path)
        tag = value.get(TYPE_KEY)
        if tag != cls.__name__:
            self.fail(f"expected {TYPE_KEY}={cls.__name__!r}, got {tag!r}", path, key=TYPE_KEY)
        hints = typing.get_type_hints(cls)
        names = [f.name for f in dataclasses.fields(cls)]
        for k in value:
            if k != TYPE_KEY and k not in names:
                self.fail(f"unknown field {k!r} in {cls.__name__}", path, key=k)
        kwargs = {}
        for name in names:
            if name not in value:
                self.fail(f"missing field {name!r} in {cls.__name__}", path)
            kwargs[name] = self.decode(value[name], hints[name], f"{path}.{name}")
        try:
            return cls(**kwargs)
        except (ValueError, TypeError) as exc:
            self.fail(f"invalid {cls.__name__}: {exc}", path)
