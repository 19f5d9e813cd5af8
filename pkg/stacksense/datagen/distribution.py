"""
Empirical OS distributions: how often every rule is drawn when synthesizing data.

A distribution file has one entry per line, a weight followed by a
:obj:`~stacksense.fpdb.matcher.ClassMatcher` in text form::

    74.6 family=Windows; name=XP
    3.4 family=Linux
    default remainder|5.5

Every rule is claimed by the first entry matching it and an entry's weight is split
evenly among the rules it claims. The optional ``default remainder|<weight>`` line
spreads its weight evenly over the rules no entry claimed, relevant or not, so that
relevant families missing from a table still get patterns; without it those rules
are never drawn.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from stacksense import data
from stacksense.diagnostics import MessageType, Messages
from stacksense.exceptions import DistributionError
from stacksense.fpdb import FingerprintRule
from stacksense.fpdb.matcher import ClassMatcher


logger = logging.getLogger(__name__)

DEFAULT_DISTRIBUTION = "w3schools.dist"
DEFAULT_PREFIX = "default remainder|"


@dataclass
class DistributionEntry:
    matcher: ClassMatcher
    weight: float
    lineno: int = 0


@dataclass
class EmpiricalDistribution:
    """
    Attributes:
        entries: weighted matchers, first match wins
        default_weight: weight shared by the rules no entry matches
    """

    entries: List[DistributionEntry] = field(default_factory=list)
    default_weight: float = 0.0

    def __post_init__(self) -> None:
        if not self.entries and self.default_weight <= 0:
            raise DistributionError("distribution has no entries")
        if self.default_weight < 0:
            raise DistributionError("default weight can't be negative")
        for e in self.entries:
            if e.weight < 0:
                raise DistributionError(f"negative weight {e.weight} at line {e.lineno}")

    @classmethod
    def uniform(cls) -> "EmpiricalDistribution":
        """
        Every rule equally likely.
        """
        return cls([], default_weight=1.0)

    def owner(self, rule: FingerprintRule) -> Optional[int]:
        """
        Index of the first entry matching ``rule``.
        """
        for i, e in enumerate(self.entries):
            if e.matcher.check(rule):
                return i
        return None

    def rule_weights(
        self, rules: List[FingerprintRule], messages: Optional[Messages] = None
    ) -> np.ndarray:
        """
        Probability of drawing every rule in ``rules``.

        Entries matching none of the rules are reported as ``W302`` and their
        weight is dropped before normalizing.

        Raises:
            DistributionError: no rule gets any weight
        """
        owners = [self.owner(r) for r in rules]
        claimed = [0] * len(self.entries)
        for o in owners:
            if o is not None:
                claimed[o] += 1
        if messages is not None:
            for e, count in zip(self.entries, claimed):
                if not count:
                    messages.add(
                        MessageType.MATCHER_UNUSED,
                        f"'{e.matcher.to_text()}' matches no rule",
                        e.lineno,
                    )

        unclaimed = owners.count(None)
        weights = np.zeros(len(rules))
        for i, o in enumerate(owners):
            if o is None:
                weights[i] = self.default_weight / unclaimed
            else:
                weights[i] = self.entries[o].weight / claimed[o]
        total = float(weights.sum())
        if total <= 0:
            raise DistributionError("the distribution gives no weight to any rule")
        return weights / total

    def to_text(self) -> str:
        lines = [f"{e.weight:g} {e.matcher.to_text()}".rstrip() for e in self.entries]
        if self.default_weight:
            lines.append(f"{DEFAULT_PREFIX}{self.default_weight:g}")
        return "".join(f"{line}\n" for line in lines)


def parse_distribution(text: str, messages: Optional[Messages] = None) -> EmpiricalDistribution:
    """
    Reads a distribution file. Lines that can't be parsed are reported as ``W301``
    and skipped.

    Raises:
        DistributionError: nothing usable is left
    """
    messages = messages if messages is not None else Messages()
    entries: List[DistributionEntry] = []
    default_weight = 0.0
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("default"):
            if not line.startswith(DEFAULT_PREFIX):
                messages.add(
                    MessageType.WEIGHT_INVALID, f"expected '{DEFAULT_PREFIX}<weight>'", lineno
                )
                continue
            try:
                default_weight = _weight(line[len(DEFAULT_PREFIX):])
            except ValueError as e:
                messages.add(MessageType.WEIGHT_INVALID, str(e), lineno)
            continue
        weight_text, _, matcher_text = line.partition(" ")
        try:
            weight = _weight(weight_text)
            matcher = ClassMatcher.from_text(matcher_text)
        except ValueError as e:
            messages.add(MessageType.WEIGHT_INVALID, str(e), lineno)
            continue
        entries.append(DistributionEntry(matcher, weight, lineno))
    logger.debug("distribution: %d entries, default weight %g", len(entries), default_weight)
    return EmpiricalDistribution(entries, default_weight)


def _weight(text: str) -> float:
    try:
        weight = float(text)
    except ValueError:
        raise ValueError(f"invalid weight '{text}'")
    if not weight >= 0 or weight == float("inf"):
        raise ValueError(f"weight must be a non-negative number, got '{text}'")
    return weight


def load_distribution(
    filepath: Optional[Union[str, Path]] = None, messages: Optional[Messages] = None
) -> EmpiricalDistribution:
    """
    Reads a distribution file, the shipped W3Schools snapshot by default.
    """
    if filepath is None:
        text = data.read_text(DEFAULT_DISTRIBUTION)
    else:
        text = Path(filepath).read_text(encoding="utf-8")
    return parse_distribution(text, messages)
