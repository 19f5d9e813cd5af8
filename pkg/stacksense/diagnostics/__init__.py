from dataclasses import dataclass
from typing import Any, Dict, Iterable, List, Optional, Set, Tuple


class MessageType:
    INPUT_EMPTY = "E001"
    LINE_INVALID = "E101"
    TEST_UNKNOWN = "E102"
    ENTRY_EMPTY = "E103"
    CLASS_INVALID = "E104"
    VALUE_INVALID = "E105"
    NAME_DUPLICATE = "W001"
    LINE_ORPHAN = "W002"
    FIELD_IGNORED = "W003"
    CLASS_EXTRA = "W004"
    NUMERIC_INVALID = "W201"
    OPTIONS_TRUNCATED = "W202"
    CATEGORY_UNKNOWN = "W203"
    FIELD_UNKNOWN = "W204"
    WEIGHT_INVALID = "W301"
    MATCHER_UNUSED = "W302"

    @staticmethod
    def help() -> Dict[str, Tuple[str, str]]:
        return {
            "E001": ("INPUT_EMPTY", "document has no content"),
            "E101": ("LINE_INVALID", "line doesn't follow the Test(key=value%...) grammar"),
            "E102": ("TEST_UNKNOWN", "test id is not one of T1..T7, PU, TSeq"),
            "E103": ("ENTRY_EMPTY", "fingerprint has no tests"),
            "E104": ("CLASS_INVALID", "class line needs 4 fields separated by |"),
            "E105": ("VALUE_INVALID", "value specification is invalid"),
            "W001": ("NAME_DUPLICATE", "fingerprint name appears more than once"),
            "W002": ("LINE_ORPHAN", "line appears before any Fingerprint line"),
            "W003": ("FIELD_IGNORED", "field ignored because the test has Resp=N"),
            "W004": ("CLASS_EXTRA", "only the first Class line is used"),
            "W201": ("NUMERIC_INVALID", "numeric field couldn't be parsed"),
            "W202": ("OPTIONS_TRUNCATED", "more options than option slots"),
            "W203": ("CATEGORY_UNKNOWN", "value not in the field's category list"),
            "W204": ("FIELD_UNKNOWN", "field is not covered by the encoding schema"),
            "W301": ("WEIGHT_INVALID", "distribution line couldn't be parsed"),
            "W302": ("MATCHER_UNUSED", "distribution entry matches no rule"),
        }


@dataclass
class Message:
    """
    A message, usually indicating some problem found in input data.

    Attributes:
        message: Text of the message
        message_type: Code identifying the type of message, i.e., E101 or W201
        lineno: line of the input the message refers to, 0 if it doesn't apply
    """

    message: str
    message_type: str
    lineno: int = 0

    @property
    def fatal(self) -> bool:
        """
        ``True`` for ``E`` codes, which cause the offending entry to be skipped
        """
        return self.message_type.startswith("E")

    def serialize(self) -> Dict[str, Any]:
        """
        Representation of the object using native types
        """
        return {
            "message": self.message,
            "message_type": self.message_type,
            "lineno": self.lineno,
        }

    def to_text(self) -> str:
        """
        A text representation of the object
        """
        return f"{self.lineno}:{self.message_type}:{self.message}"


class Messages(List[Message]):
    """
    A list of :obj:`Message` objects

    Attributes:
        ignore: Populated with a list of message codes (see :obj:`MessageType`)
            it will cause the functions ``append`` and ``extend`` to ignore
            messages of ``message_type`` included in this list.
    """

    def __init__(self, ignore: Optional[Set[str]] = None) -> None:
        super().__init__()
        self.ignore = ignore or set()
        valid_codes = MessageType.help()
        for i in self.ignore:
            if i not in valid_codes:
                raise ValueError(f"don't recognize error code '{i}'")

    def serialize(self) -> List[Any]:
        """
        Representation of the object using native types
        """
        return [m.serialize() for m in self]

    def to_text(self, source: str = "") -> str:
        prefix = f"{source}:" if source else ""
        return "".join(f"{prefix}{m.to_text()}\n" for m in self)

    def append(self, message: Message) -> None:
        if message.message_type not in self.ignore:
            super().append(message)

    def extend(self, messages: Iterable[Message]) -> None:
        msgs = [m for m in messages if m.message_type not in self.ignore]
        super().extend(msgs)

    def add(self, message_type: str, message: str, lineno: int = 0) -> None:
        self.append(Message(message, message_type, lineno))

    @property
    def errors(self) -> List[Message]:
        return [m for m in self if m.fatal]

    @property
    def warnings(self) -> List[Message]:
        return [m for m in self if not m.fatal]
