"""
Labels of the hierarchy's nets, derived from the ``Class`` line of every rule.

A label map names the families the relevance net accepts (also the outputs of the
family net, in order) and, for some of them, the version groups a version net
tells apart. A rule belongs to the first version group whose matcher accepts it.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from stacksense import data
from stacksense.fpdb import FingerprintRule
from stacksense.fpdb.matcher import ClassMatcher


logger = logging.getLogger(__name__)

DEFAULT_LABELS = "labels.json"

VersionGroup = Tuple[str, ClassMatcher]


@dataclass
class LabelMap:
    """
    Attributes:
        relevant: families the relevance gate accepts, in family net output order
        versions: family -> ordered version groups
    """

    relevant: List[str]
    versions: Dict[str, List[VersionGroup]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.relevant:
            raise ValueError("a label map needs at least one relevant family")
        if len(set(self.relevant)) != len(self.relevant):
            raise ValueError("relevant families must be unique")
        for family in self.versions:
            if family not in self.relevant:
                raise ValueError(f"version groups given for irrelevant family {family}")

    def is_relevant(self, rule: FingerprintRule) -> bool:
        return rule.os_class.family in self.relevant

    def family_of(self, rule: FingerprintRule) -> Optional[int]:
        """
        Output index of the rule's family, ``None`` if it's not relevant.
        """
        try:
            return self.relevant.index(rule.os_class.family)
        except ValueError:
            return None

    def version_labels(self, family: str) -> List[str]:
        return [label for label, _ in self.versions.get(family, [])]

    def version_of(self, rule: FingerprintRule) -> Optional[int]:
        """
        Index of the first version group of the rule's family accepting it.
        """
        for i, (_, matcher) in enumerate(self.versions.get(rule.os_class.family, [])):
            if matcher.check(rule):
                return i
        return None

    def label_of(self, rule: FingerprintRule) -> str:
        """
        ``family version-group``, the family alone when there is no group, or
        ``irrelevant``.
        """
        family = self.family_of(rule)
        if family is None:
            return "irrelevant"
        name = self.relevant[family]
        version = self.version_of(rule)
        if version is None:
            return name
        return f"{name} {self.versions[name][version][0]}"

    def serialize(self) -> Dict[str, Any]:
        return {
            "relevant": list(self.relevant),
            "versions": {
                family: [[label, m.serialize()] for label, m in groups]
                for family, groups in self.versions.items()
            },
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "LabelMap":
        versions = {
            family: [(str(label), ClassMatcher.from_dict(m)) for label, m in groups]
            for family, groups in raw.get("versions", {}).items()
        }
        return cls(list(raw["relevant"]), versions)


def load_labels(filepath: Optional[Union[str, Path]] = None) -> LabelMap:
    """
    Reads a label map, the shipped one by default.
    """
    if filepath is None:
        raw = data.load_json(DEFAULT_LABELS)
    else:
        with open(filepath, encoding="utf-8") as f:
            raw = json.load(f)
    labels = LabelMap.from_dict(raw)
    logger.debug(
        "labels: %d families, version groups for %s",
        len(labels.relevant),
        ", ".join(labels.versions),
    )
    return labels


def check_coverage(labels: LabelMap, rules: List[FingerprintRule]) -> List[FingerprintRule]:
    """
    Relevant rules of a family with version groups that no group accepts.
    """
    missing = [
        r
        for r in rules
        if r.os_class.family in labels.versions and labels.version_of(r) is None
    ]
    for r in missing:
        logger.warning("%s (%s) is in no version group", r.name, r.os_class.to_text())
    return missing
