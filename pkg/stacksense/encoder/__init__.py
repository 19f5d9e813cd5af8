"""
Turns probe responses into fixed size real vectors.

The layout is described by an inventory file (``stacksense/data/nmap-inventory.json``
by default) listing, per test, the fields to encode and how. Every field becomes a
small block of units:

* ``resp``: one unit, ``+1`` if the test was answered
* ``flag``: one unit, ``+1`` if the value is the flag's ``true`` token
* ``category``: a presence unit followed by one unit per known value
* ``letters``: a presence unit followed by one unit per letter (TCP flags)
* ``options``: a presence unit followed by ``option_slots`` groups with one unit
  per option kind, filled in order of appearance
* ``numeric``: the parsed value followed by a presence unit

Units are ``+1``/``-1`` except the numeric values. A missing numeric field encodes
as ``0`` with its presence unit at ``-1``.
"""
import hashlib
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from stacksense import data
from stacksense.diagnostics import MessageType, Messages
from stacksense.fpdb import FingerprintRule, ProbeResponse


logger = logging.getLogger(__name__)

DEFAULT_INVENTORY = "nmap-inventory.json"


class FeatureKind(Enum):
    RESP = "resp"
    FLAG = "flag"
    CATEGORY = "category"
    LETTERS = "letters"
    OPTIONS = "options"
    NUMERIC = "numeric"


@dataclass(frozen=True)
class FeatureDescriptor:
    """
    One encoded field.

    Attributes:
        test: test id, i.e., ``T3``
        field: field name, i.e., ``ACK``
        kind: how the field is encoded
        values: known values for ``category``, letters for ``letters``, option
            codes for ``options``, the ``true`` token for ``flag``
        base: ``numeric`` only, 16 or 10
        slots: ``options`` only, number of option positions
    """

    test: str
    field: str
    kind: FeatureKind
    values: Tuple[str, ...] = ()
    base: int = 16
    slots: int = 0

    @property
    def width(self) -> int:
        if self.kind in (FeatureKind.RESP, FeatureKind.FLAG):
            return 1
        if self.kind is FeatureKind.NUMERIC:
            return 2
        if self.kind is FeatureKind.OPTIONS:
            return 1 + self.slots * len(self.values)
        return 1 + len(self.values)

    def serialize(self) -> Dict[str, Any]:
        return {
            "test": self.test,
            "field": self.field,
            "kind": self.kind.value,
            "values": list(self.values),
            "base": self.base,
            "slots": self.slots,
        }


@dataclass(frozen=True)
class EncodingSchema:
    """
    Ordered list of :obj:`FeatureDescriptor`.

    Attributes:
        descriptors: the encoded fields, in vector order
        option_names: long name of every option code, i.e., ``M`` -> ``MAXSEG``
        version: ``<inventory version>-<digest of the layout>``; models record it
    """

    descriptors: Tuple[FeatureDescriptor, ...]
    option_names: Tuple[Tuple[str, str], ...]
    version: str

    @property
    def total_dim(self) -> int:
        return sum(d.width for d in self.descriptors)

    def offsets(self) -> List[int]:
        """
        Position of the first unit of every descriptor.
        """
        out = []
        pos = 0
        for d in self.descriptors:
            out.append(pos)
            pos += d.width
        return out

    def covers(self, test: str, name: str) -> bool:
        return any(d.test == test and d.field == name for d in self.descriptors)


def _digest(descriptors: Sequence[FeatureDescriptor], options: Sequence[Tuple[str, str]]) -> str:
    payload = json.dumps(
        {"descriptors": [d.serialize() for d in descriptors], "options": list(options)},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:8]


def _descriptors(inventory: Dict[str, Any]) -> List[FeatureDescriptor]:
    slots = int(inventory["option_slots"])
    codes = tuple(code for code, _ in inventory["options"])
    out = []
    for group in inventory["groups"]:
        for test in group["tests"]:
            for f in group["fields"]:
                kind = FeatureKind(f["kind"])
                if kind is FeatureKind.OPTIONS:
                    values: Tuple[str, ...] = codes
                elif kind is FeatureKind.FLAG:
                    values = (f.get("true", "Y"),)
                else:
                    values = tuple(f.get("values", ()))
                out.append(
                    FeatureDescriptor(
                        test=test,
                        field=f["field"],
                        kind=kind,
                        values=values,
                        base=int(f.get("base", 16)),
                        slots=slots if kind is FeatureKind.OPTIONS else 0,
                    )
                )
    return out


def build_nmap_schema(
    db: Optional[List[FingerprintRule]] = None,
    inventory: Optional[Dict[str, Any]] = None,
    prune: bool = False,
    messages: Optional[Messages] = None,
) -> EncodingSchema:
    """
    Builds the schema described by ``inventory`` (the shipped one by default).

    Arguments:
        db: if given, fields used by the rules that the inventory doesn't cover
            are reported as ``W204``
        prune: drop the fields no rule in ``db`` uses
        messages: where to collect the diagnostics
    """
    inventory = inventory if inventory is not None else data.load_json(DEFAULT_INVENTORY)
    descriptors = _descriptors(inventory)
    options = tuple((code, name) for code, name in inventory["options"])

    if db is not None:
        used: Set[Tuple[str, str]] = set()
        for rule in db:
            for test, fields in rule.tests.items():
                used.add((test, "Resp"))
                used.update((test, name) for name in fields)
        covered = {(d.test, d.field) for d in descriptors}
        if messages is not None:
            for test, name in sorted(used - covered):
                messages.add(
                    MessageType.FIELD_UNKNOWN, f"{test}.{name} is used by the database"
                )
        if prune:
            descriptors = [d for d in descriptors if (d.test, d.field) in used]

    version = f"{inventory['version']}-{_digest(descriptors, options)}"
    schema = EncodingSchema(tuple(descriptors), options, version)
    logger.info("encoding schema %s: %d units", schema.version, schema.total_dim)
    return schema


def _pm(flag: bool) -> float:
    return 1.0 if flag else -1.0


def _encode_field(
    d: FeatureDescriptor, value: Optional[str], answered: bool, messages: Messages
) -> List[float]:
    if d.kind is FeatureKind.RESP:
        return [_pm(answered)]
    if d.kind is FeatureKind.FLAG:
        return [_pm(value == d.values[0])]
    if d.kind is FeatureKind.NUMERIC:
        if value is None:
            return [0.0, -1.0]
        try:
            return [float(int(value, d.base)), 1.0]
        except ValueError:
            messages.add(MessageType.NUMERIC_INVALID, f"{d.test}.{d.field}={value}")
            return [-1.0, -1.0]

    out = [-1.0] * d.width
    if value is None:
        return out
    out[0] = 1.0
    if d.kind is FeatureKind.CATEGORY:
        if value in d.values:
            out[1 + d.values.index(value)] = 1.0
        else:
            messages.add(MessageType.CATEGORY_UNKNOWN, f"{d.test}.{d.field}={value}")
    elif d.kind is FeatureKind.LETTERS:
        for letter in value:
            if letter in d.values:
                out[1 + d.values.index(letter)] = 1.0
            else:
                messages.add(
                    MessageType.CATEGORY_UNKNOWN, f"{d.test}.{d.field} has '{letter}'"
                )
    else:
        kinds = len(d.values)
        if len(value) > d.slots:
            messages.add(
                MessageType.OPTIONS_TRUNCATED,
                f"{d.test}.{d.field}={value} has more than {d.slots} options",
            )
        for slot, code in enumerate(value[: d.slots]):
            if code in d.values:
                out[1 + slot * kinds + d.values.index(code)] = 1.0
            else:
                messages.add(MessageType.CATEGORY_UNKNOWN, f"{d.test}.{d.field} has '{code}'")
    return out


def encode(
    resp: ProbeResponse, schema: EncodingSchema, messages: Optional[Messages] = None
) -> np.ndarray:
    """
    Encodes ``resp`` into a vector of ``schema.total_dim`` reals.

    Never fails: values the schema doesn't know and fields it doesn't cover are
    reported in ``messages``. Fields of a test answered with ``Resp=N`` are
    encoded as absent.
    """
    messages = messages if messages is not None else Messages()
    out: List[float] = []
    for d in schema.descriptors:
        answered = resp.responds(d.test)
        value = resp.value(d.test, d.field) if answered else None
        out.extend(_encode_field(d, value, answered, messages))
    for test, fields in resp.tests.items():
        for name in fields:
            if name != "Resp" and not schema.covers(test, name):
                messages.add(MessageType.FIELD_UNKNOWN, f"{test}.{name} is not encoded")
    return np.array(out, dtype=float)


def feature_names(schema: EncodingSchema) -> List[str]:
    """
    One name per unit, i.e., ``T3:ACK=S++``, ``T1:Ops[2]=NOP`` or ``TSeq:gcd?``
    for the presence unit of a numeric field.
    """
    long_name = dict(schema.option_names)
    names = []
    for d in schema.descriptors:
        base = f"{d.test}:{d.field}"
        names.append(base)
        if d.kind is FeatureKind.NUMERIC:
            names.append(f"{base}?")
        elif d.kind is FeatureKind.CATEGORY:
            names.extend(f"{base}={v}" for v in d.values)
        elif d.kind is FeatureKind.LETTERS:
            names.extend(f"{base}:{v}" for v in d.values)
        elif d.kind is FeatureKind.OPTIONS:
            for slot in range(d.slots):
                names.extend(f"{base}[{slot + 1}]={long_name.get(v, v)}" for v in d.values)
    return names


def numeric_mask(schema: EncodingSchema) -> np.ndarray:
    """
    ``True`` for the units holding numeric values, every other unit is +/-1.
    """
    mask = np.zeros(schema.total_dim, dtype=bool)
    for d, offset in zip(schema.descriptors, schema.offsets()):
        if d.kind is FeatureKind.NUMERIC:
            mask[offset] = True
    return mask


__all__ = (
    "EncodingSchema",
    "FeatureDescriptor",
    "FeatureKind",
    "build_nmap_schema",
    "encode",
    "feature_names",
    "numeric_mask",
)
