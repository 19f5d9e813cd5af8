from fnmatch import fnmatchcase
from typing import Dict, List, Optional

from stacksense.fpdb import FingerprintRule


class ClassMatcher:
    """
    This class helps selecting fingerprint rules by their ``Class`` line and name

    Attributes:
        vendor: glob the vendor must match
        family: glob the family must match
        version: glob the version line must match
        device_type: glob the device type must match
        name: rules whose name contains any of these strings will be included
            (every rule if empty)
        exclude: rules whose name contains any of these strings will be excluded
    """

    FIELDS = ("vendor", "family", "version", "device_type")

    def __init__(
        self,
        vendor: str = "*",
        family: str = "*",
        version: str = "*",
        device_type: str = "*",
        name: Optional[List[str]] = None,
        exclude: Optional[List[str]] = None,
    ) -> None:
        self.vendor = vendor
        self.family = family
        self.version = version
        self.device_type = device_type
        self.name = name or [""]
        self.exclude = exclude or []

    def check(self, rule: FingerprintRule) -> bool:
        """
        ``True`` if the rule matches the criteria to be included
        """
        c = rule.os_class
        return (
            fnmatchcase(c.vendor, self.vendor)
            and fnmatchcase(c.family, self.family)
            and fnmatchcase(c.version, self.version)
            and fnmatchcase(c.device_type, self.device_type)
            and any(n in rule.name for n in self.name)
            and not any(e in rule.name for e in self.exclude)
        )

    def select(self, rules: List[FingerprintRule]) -> List[FingerprintRule]:
        return [r for r in rules if self.check(r)]

    def serialize(self) -> Dict[str, object]:
        """
        Inverse of :meth:`from_dict`, defaults left out.
        """
        out: Dict[str, object] = {
            k: getattr(self, k) for k in self.FIELDS if getattr(self, k) != "*"
        }
        if self.name != [""]:
            out["name"] = list(self.name)
        if self.exclude:
            out["exclude"] = list(self.exclude)
        return out

    @classmethod
    def from_dict(cls, data: Dict[str, object]) -> "ClassMatcher":
        """
        Builds a matcher from ``{"family": "Linux", "name": ["2.4"], ...}``, a
        string is accepted wherever a list is expected.
        """
        unknown = set(data) - set(cls.FIELDS) - {"name", "exclude"}
        if unknown:
            raise ValueError(f"unknown matcher keys: {', '.join(sorted(unknown))}")
        globs = {k: str(data[k]) for k in cls.FIELDS if k in data}
        lists = {k: _as_list(data[k]) for k in ("name", "exclude") if k in data}
        return cls(**globs, **lists)  # type: ignore

    @classmethod
    def from_text(cls, text: str) -> "ClassMatcher":
        """
        Builds a matcher from ``family=Windows; name=XP,2003; exclude=Server``.
        """
        data: Dict[str, object] = {}
        for item in text.split(";"):
            item = item.strip()
            if not item:
                continue
            if "=" not in item:
                raise ValueError(f"expected key=value, got '{item}'")
            key, value = (s.strip() for s in item.split("=", 1))
            if key in ("name", "exclude"):
                data[key] = [v.strip() for v in value.split(",")]
            else:
                data[key] = value
        return cls.from_dict(data)

    def to_text(self) -> str:
        parts = [f"{k}={getattr(self, k)}" for k in self.FIELDS if getattr(self, k) != "*"]
        if self.name != [""]:
            parts.append(f"name={','.join(self.name)}")
        if self.exclude:
            parts.append(f"exclude={','.join(self.exclude)}")
        return "; ".join(parts)


def _as_list(value: object) -> List[str]:
    if isinstance(value, str):
        return [value]
    if isinstance(value, list):
        return [str(v) for v in value]
    raise ValueError(f"expected a string or a list, got {value!r}")
