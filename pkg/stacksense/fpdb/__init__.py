"""
First generation Nmap fingerprint database.

An entry looks like::

    # Linux kernel 2.6.10 X86 Slackware 10.0
    Fingerprint Linux 2.6.10
    Class Linux | Linux | 2.6.X | general purpose
    TSeq(Class=RI%gcd=<6%SI=<2D870AA&>6708%IPID=Z%TS=1000HZ)
    T1(DF=Y%W=16A0%ACK=S++%Flags=AS%Ops=MNNTNW)
    T2(Resp=N)
    ...

Values are constants, alternatives separated by ``|``, hex ranges ``lo-hi`` or
the comparisons ``<X``, ``>X`` and ``<X&>Y``. A test without a ``Resp`` field was
answered (``Resp=Y``); a test with ``Resp=N`` has no other fields.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, NamedTuple, Optional, Tuple

import numpy as np

from stacksense.diagnostics import MessageType, Messages
from stacksense.exceptions import EmptyInput, NotConcrete
from stacksense.render import TextTree


logger = logging.getLogger(__name__)

TEST_IDS = ("TSeq", "T1", "T2", "T3", "T4", "T5", "T6", "T7", "PU")
TCP_TESTS = ("T1", "T2", "T3", "T4", "T5", "T6", "T7")

_CANONICAL_TEST = {t.upper(): t for t in TEST_IDS}
_TEST_LINE = re.compile(r"^([A-Za-z0-9]+)\((.*)\)$")
_HEX_RANGE = re.compile(r"^([0-9A-Fa-f]+)-([0-9A-Fa-f]+)$")
_COMPARISON = re.compile(r"^([<>])([0-9A-Fa-f]+)$")

#: upper bound used for ``>X`` comparisons
HEX_MAX = 0xFFFFFFFF


class ValueSpec:
    """
    What a rule accepts for one field.
    """

    def matches(self, value: str) -> bool:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator) -> Optional[str]:
        raise NotImplementedError

    def to_text(self) -> str:
        raise NotImplementedError


@dataclass(frozen=True)
class Const(ValueSpec):
    value: str

    def matches(self, value: str) -> bool:
        return value == self.value

    def sample(self, rng: np.random.Generator) -> Optional[str]:
        return self.value

    def to_text(self) -> str:
        return self.value


@dataclass(frozen=True)
class HexRange(ValueSpec):
    """
    Inclusive range of hexadecimal numbers.
    """

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 0 <= self.lo <= self.hi:
            raise ValueError(f"invalid range {self.lo:X}-{self.hi:X}")

    def matches(self, value: str) -> bool:
        try:
            n = int(value, 16)
        except ValueError:
            return False
        return self.lo <= n <= self.hi

    def sample(self, rng: np.random.Generator) -> Optional[str]:
        return f"{int(rng.integers(self.lo, self.hi, endpoint=True)):X}"

    def to_text(self) -> str:
        return f"{self.lo:X}-{self.hi:X}"


@dataclass(frozen=True)
class OneOf(ValueSpec):
    """
    Alternatives, each a :obj:`Const` or a :obj:`HexRange`.
    """

    options: Tuple[ValueSpec, ...]

    def __post_init__(self) -> None:
        if not self.options:
            raise ValueError("OneOf needs at least one option")

    def matches(self, value: str) -> bool:
        return any(o.matches(value) for o in self.options)

    def sample(self, rng: np.random.Generator) -> Optional[str]:
        return self.options[int(rng.integers(len(self.options)))].sample(rng)

    def to_text(self) -> str:
        return "|".join(o.to_text() for o in self.options)


class _Absent(ValueSpec):
    def matches(self, value: str) -> bool:
        return False

    def sample(self, rng: np.random.Generator) -> Optional[str]:
        return None

    def to_text(self) -> str:
        return ""

    def __repr__(self) -> str:
        return "ABSENT"


#: the field is not part of the rule, or its test got no response
ABSENT = _Absent()


class OsClass(NamedTuple):
    vendor: str
    family: str
    version: str
    device_type: str

    def to_text(self) -> str:
        return " | ".join(self)


RESP_NO = Const("N")
RESP_YES = Const("Y")


@dataclass
class FingerprintRule:
    """
    One database entry.

    Attributes:
        name: text after ``Fingerprint``
        os_class: the four fields of the ``Class`` line
        tests: test id -> field name -> :obj:`ValueSpec`, fields in file order
        lineno: line of the ``Fingerprint`` line in the source document
    """

    name: str
    os_class: OsClass
    tests: Dict[str, Dict[str, ValueSpec]] = field(default_factory=dict)
    lineno: int = 0

    def responds(self, test: str) -> bool:
        """
        ``True`` if the rule expects an answer to ``test``
        """
        return test in self.tests and self.tests[test].get("Resp", RESP_YES) != RESP_NO

    def spec(self, test: str, name: str) -> ValueSpec:
        """
        Spec for ``test.name``. ``Resp`` is implied ``Y`` for present tests and every
        other field of an unanswered test is :obj:`ABSENT`.
        """
        if test not in self.tests:
            return ABSENT
        fields = self.tests[test]
        if name == "Resp":
            return fields.get("Resp", RESP_YES)
        if not self.responds(test):
            return ABSENT
        return fields.get(name, ABSENT)


@dataclass
class ProbeResponse:
    """
    Concrete answers of a host. A missing test id means no reply.
    """

    tests: Dict[str, Dict[str, str]] = field(default_factory=dict)

    def responds(self, test: str) -> bool:
        return test in self.tests and self.tests[test].get("Resp", "Y") != "N"

    def value(self, test: str, name: str) -> Optional[str]:
        """
        Value of ``test.name`` with ``Resp`` implied ``Y`` for present tests.
        """
        if test not in self.tests:
            return None
        if name == "Resp":
            return self.tests[test].get("Resp", "Y")
        return self.tests[test].get(name)


@dataclass
class ParsedDB:
    """
    Result of :func:`parse_db`.

    Attributes:
        rules: well formed entries, in file order
        messages: problems found, entries with an ``E`` message are not in ``rules``
    """

    rules: List[FingerprintRule]
    messages: Messages

    def families(self) -> Dict[str, int]:
        counts: Dict[str, int] = {}
        for r in self.rules:
            counts[r.os_class.family] = counts.get(r.os_class.family, 0) + 1
        return counts


def parse_value(text: str) -> ValueSpec:
    """
    Parses the right hand side of ``key=value``.

    Raises:
        ValueError: a range or comparison is malformed
    """
    options = [_parse_option(o) for o in text.split("|")]
    if len(options) == 1:
        return options[0]
    return OneOf(tuple(options))


def _parse_option(text: str) -> ValueSpec:
    m = _HEX_RANGE.match(text)
    if m:
        return HexRange(int(m.group(1), 16), int(m.group(2), 16))
    if text[:1] in ("<", ">"):
        lo, hi = 0, HEX_MAX
        for part in text.split("&"):
            c = _COMPARISON.match(part)
            if not c:
                raise ValueError(f"invalid comparison '{text}'")
            n = int(c.group(2), 16)
            if c.group(1) == "<":
                hi = min(hi, n - 1)
            else:
                lo = max(lo, n + 1)
        return HexRange(lo, hi)
    return Const(text)


def _strip(line: str) -> str:
    return line.split("#", 1)[0].strip()


def _split_test_line(line: str) -> Optional[Tuple[str, List[Tuple[str, str]]]]:
    m = _TEST_LINE.match(line)
    if not m:
        return None
    test, body = m.groups()
    pairs = []
    for item in body.split("%") if body else []:
        if "=" not in item:
            return None
        key, value = item.split("=", 1)
        if not key:
            return None
        pairs.append((key, value))
    return test, pairs


class _Entry:
    def __init__(self, name: str, lineno: int) -> None:
        self.name = name
        self.lineno = lineno
        self.os_class: Optional[OsClass] = None
        self.tests: Dict[str, Dict[str, ValueSpec]] = {}
        self.messages = Messages()

    @property
    def broken(self) -> bool:
        return bool(self.messages.errors)


def _numbered_lines(text: str) -> Iterator[Tuple[int, str]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = _strip(raw)
        if line:
            yield lineno, line


def parse_db(text: str, messages: Optional[Messages] = None) -> ParsedDB:
    """
    Parses a fingerprint database.

    Problems are reported as diagnostics: entries with an ``E`` code are skipped,
    ``W`` codes leave the entry in place.

    Arguments:
        messages: where to collect the diagnostics, its ``ignore`` set applies

    Raises:
        EmptyInput: the document has no content
    """
    messages = messages if messages is not None else Messages()
    lines = list(_numbered_lines(text))
    if not lines:
        raise EmptyInput("fingerprint database is empty")

    entries: List[_Entry] = []
    current: Optional[_Entry] = None
    for lineno, line in lines:
        if line.startswith("Fingerprint ") or line == "Fingerprint":
            current = _Entry(line[len("Fingerprint"):].strip(), lineno)
            entries.append(current)
            continue
        if current is None:
            messages.add(MessageType.LINE_ORPHAN, f"'{line}' outside any entry", lineno)
            continue
        if line.startswith("Class ") or line == "Class":
            _parse_class(current, line, lineno)
            continue
        _parse_test(current, line, lineno)

    rules: List[FingerprintRule] = []
    seen: Dict[str, int] = {}
    for e in entries:
        if e.os_class is None and not e.broken:
            e.messages.add(MessageType.CLASS_INVALID, f"{e.name} has no Class line", e.lineno)
        if not e.tests:
            e.messages.add(MessageType.ENTRY_EMPTY, f"{e.name} has no tests", e.lineno)
        if not e.name:
            e.messages.add(MessageType.LINE_INVALID, "Fingerprint without a name", e.lineno)
        messages.extend(e.messages)
        if e.broken or e.os_class is None:
            logger.debug("skipping entry %s at line %d", e.name, e.lineno)
            continue
        if e.name in seen:
            messages.add(
                MessageType.NAME_DUPLICATE,
                f"{e.name} already defined at line {seen[e.name]}",
                e.lineno,
            )
        else:
            seen[e.name] = e.lineno
        rules.append(FingerprintRule(e.name, e.os_class, e.tests, e.lineno))

    logger.info("parsed %d rules out of %d entries", len(rules), len(entries))
    return ParsedDB(rules, messages)


def _parse_class(entry: _Entry, line: str, lineno: int) -> None:
    if entry.os_class is not None:
        entry.messages.add(MessageType.CLASS_EXTRA, "extra Class line ignored", lineno)
        return
    parts = [p.strip() for p in line[len("Class"):].split("|")]
    if len(parts) != 4:
        entry.messages.add(
            MessageType.CLASS_INVALID, f"expected 4 fields, got {len(parts)}", lineno
        )
        return
    entry.os_class = OsClass(*parts)


def _parse_test(entry: _Entry, line: str, lineno: int) -> None:
    split = _split_test_line(line)
    if split is None:
        entry.messages.add(MessageType.LINE_INVALID, f"can't parse '{line}'", lineno)
        return
    test, pairs = split
    canonical = _CANONICAL_TEST.get(test.upper())
    if canonical is None:
        entry.messages.add(MessageType.TEST_UNKNOWN, f"unknown test '{test}'", lineno)
        return
    if canonical in entry.tests:
        entry.messages.add(MessageType.LINE_INVALID, f"test {canonical} given twice", lineno)
        return
    fields: Dict[str, ValueSpec] = {}
    for key, value in pairs:
        try:
            fields[key] = parse_value(value)
        except ValueError as e:
            entry.messages.add(MessageType.VALUE_INVALID, f"{canonical}.{key}: {e}", lineno)
            return
    if fields.get("Resp") == RESP_NO and len(fields) > 1:
        ignored = [k for k in fields if k != "Resp"]
        entry.messages.add(
            MessageType.FIELD_IGNORED, f"{canonical}: ignoring {', '.join(ignored)}", lineno
        )
        fields = {"Resp": RESP_NO}
    entry.tests[canonical] = fields


def parse_response(text: str, messages: Optional[Messages] = None) -> ProbeResponse:
    """
    Parses the answers of a host, written with the same test line grammar as the
    database. Values must be concrete, unknown field names are kept as they are.
    Lines that are not test lines are reported and ignored.

    Raises:
        NotConcrete: a value has alternatives
    """
    messages = messages if messages is not None else Messages()
    resp = ProbeResponse()
    for lineno, line in _numbered_lines(text):
        split = _split_test_line(line)
        if split is None:
            messages.add(MessageType.LINE_INVALID, f"can't parse '{line}'", lineno)
            continue
        test, pairs = split
        canonical = _CANONICAL_TEST.get(test.upper())
        if canonical is None:
            messages.add(MessageType.TEST_UNKNOWN, f"unknown test '{test}'", lineno)
            continue
        fields: Dict[str, str] = {}
        for key, value in pairs:
            if "|" in value:
                raise NotConcrete(canonical, key, value, lineno)
            fields[key] = value
        resp.tests[canonical] = fields
    return resp


def _ordered(tests: Mapping[str, object]) -> List[str]:
    return [t for t in TEST_IDS if t in tests]


def _test_line(test: str, fields: Dict[str, str]) -> str:
    return f"{test}({'%'.join(f'{k}={v}' for k, v in fields.items())})"


def rule_tree(rule: FingerprintRule) -> TextTree:
    tree = TextTree(f"Fingerprint {rule.name}")
    tree.add_line(f"Class {rule.os_class.to_text()}")
    for test in _ordered(rule.tests):
        tree.add_line(
            _test_line(test, {k: v.to_text() for k, v in rule.tests[test].items()})
        )
    return tree


def format_rule(rule: FingerprintRule) -> str:
    """
    Canonical text of ``rule``: tests in the order TSeq, T1..T7, PU, ranges written
    ``lo-hi``.
    """
    return rule_tree(rule).to_string()


def format_db(rules: List[FingerprintRule]) -> str:
    db = TextTree()
    for i, rule in enumerate(rules):
        if i:
            db.add_line("")
        for line in rule_tree(rule).to_lines():
            db.add_line(line)
    return db.to_string()


def format_response(resp: ProbeResponse) -> str:
    tree = TextTree()
    for test in _ordered(resp.tests):
        tree.add_line(_test_line(test, resp.tests[test]))
    return tree.to_string()


__all__ = (
    "ABSENT",
    "Const",
    "FingerprintRule",
    "HexRange",
    "OneOf",
    "OsClass",
    "ParsedDB",
    "ProbeResponse",
    "TCP_TESTS",
    "TEST_IDS",
    "ValueSpec",
    "format_db",
    "format_response",
    "format_rule",
    "parse_db",
    "parse_response",
    "parse_value",
)
