"""
What the classifiers say about a host, as text mirroring the run logs of the
scanner and as plain data.
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional

import numpy as np

from stacksense.render import TextTree


class ReduceRow(NamedTuple):
    index: int
    original: int
    name: str


def reduce_table(rows: List[ReduceRow]) -> str:
    tree = TextTree()
    for r in rows:
        tree.add_line(f"{r.index:4d} {r.original:5d}  {r.name}")
    return tree.to_string()


def _score(value: float) -> str:
    return repr(float(value))


@dataclass
class HostReport:
    """
    Attributes:
        relevance: output of the relevance net
        threshold: gate the relevance output was compared with
        family_labels: outputs of the family net, empty if the gate stopped
        family_scores: scores matching ``family_labels``
        family: best scored family
        version_labels: outputs of the family's version net, empty if none
        version_scores: scores matching ``version_labels``
        version: best scored version group
    """

    relevance: float
    threshold: float = 0.0
    family_labels: List[str] = field(default_factory=list)
    family_scores: List[float] = field(default_factory=list)
    family: Optional[str] = None
    version_labels: List[str] = field(default_factory=list)
    version_scores: List[float] = field(default_factory=list)
    version: Optional[str] = None

    @property
    def relevant(self) -> bool:
        return self.relevance >= self.threshold

    @property
    def decided(self) -> str:
        """
        ``irrelevant``, the family or the family followed by the version group.
        """
        if not self.relevant or self.family is None:
            return "irrelevant"
        if self.version is None:
            return self.family
        return f"{self.family} {self.version}"

    def to_text(self) -> str:
        tree = TextTree()
        gate = tree.new_section("Relevant analysis")
        gate.add_line(f"Relevant: {_score(self.relevance)}")
        if not self.relevant:
            tree.add_line("")
            tree.add_line("Host runs no relevant operating system")
            return tree.to_string()

        tree.add_line("")
        families = tree.new_section("Operating System analysis")
        for label, score in zip(self.family_labels, self.family_scores):
            families.add_line(f"{label}: {_score(score)}")
        if self.version_labels:
            tree.add_line("")
            versions = tree.new_section(f"{self.family} version analysis")
            for label, score in zip(self.version_labels, self.version_scores):
                versions.add_line(f"{label}: {_score(score)}")
        tree.add_line("")
        tree.add_line(f"Setting OS to {self.decided}")
        return tree.to_string()

    def serialize(self) -> Dict[str, Any]:
        return {
            "relevance": self.relevance,
            "threshold": self.threshold,
            "relevant": self.relevant,
            "families": dict(zip(self.family_labels, self.family_scores)),
            "family": self.family,
            "versions": dict(zip(self.version_labels, self.version_scores)),
            "version": self.version,
            "decided": self.decided,
        }


@dataclass
class VersionScores:
    label: str
    score: float
    editions: List[str]
    edition_scores: List[float]
    service_packs: List[str]
    service_pack_scores: List[float]

    @property
    def edition(self) -> str:
        return self.editions[int(np.argmax(self.edition_scores))]

    @property
    def service_pack(self) -> str:
        return self.service_packs[int(np.argmax(self.service_pack_scores))]

    def serialize(self) -> Dict[str, Any]:
        return {
            "score": self.score,
            "editions": dict(zip(self.editions, self.edition_scores)),
            "service_packs": dict(zip(self.service_packs, self.service_pack_scores)),
        }


@dataclass
class EndpointReport:
    """
    Attributes:
        versions: scores of every version with its editions and service packs
        outputs: raw outputs of the endpoint net
        empty: the endpoint map had no entries
    """

    versions: List[VersionScores]
    outputs: List[float]
    empty: bool = False

    @classmethod
    def from_outputs(
        cls, outputs: List[float], labels: List[str], groups: Dict[str, Any], empty: bool = False
    ) -> "EndpointReport":
        versions = []
        for v, group in enumerate(groups["per_version"]):
            e0, e1 = group["editions"]
            s0, s1 = group["service_packs"]
            versions.append(
                VersionScores(
                    label=labels[v],
                    score=outputs[v],
                    editions=labels[e0:e1],
                    edition_scores=outputs[e0:e1],
                    service_packs=labels[s0:s1],
                    service_pack_scores=outputs[s0:s1],
                )
            )
        return cls(versions, list(outputs), empty)

    @property
    def best(self) -> VersionScores:
        return max(self.versions, key=lambda v: v.score)

    @property
    def low_confidence(self) -> bool:
        """
        The map was empty or no version scored above 0.
        """
        return self.empty or self.best.score < 0

    @property
    def decided(self) -> str:
        best = self.best
        return f"{best.label} {best.edition} {best.service_pack}"

    def to_text(self) -> str:
        tree = TextTree()
        tree.add_line("Neural Network Output (close to 1 is better):")
        for v in self.versions:
            tree.add_line(f"{v.label}: {_score(v.score)}")
            editions = tree.new_section("Editions:", indent="\t")
            for label, score in zip(v.editions, v.edition_scores):
                editions.add_line(f"{label}: {_score(score)}")
            service_packs = tree.new_section("Service Packs:", indent="\t")
            for label, score in zip(v.service_packs, v.service_pack_scores):
                service_packs.add_line(f"{label}: {_score(score)}")
        if self.low_confidence:
            tree.add_line(" . Low confidence, the endpoint map may be incomplete")
        tree.add_line(f"Setting OS to {self.decided}")
        return tree.to_string()

    def serialize(self) -> Dict[str, Any]:
        return {
            "versions": {v.label: v.serialize() for v in self.versions},
            "decided": self.decided,
            "low_confidence": self.low_confidence,
        }
