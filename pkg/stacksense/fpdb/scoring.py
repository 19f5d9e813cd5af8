"""
The classic "best fit" comparison: the share of the fields a rule and a response
have in common on which they agree.
"""
import logging
from dataclasses import dataclass
from typing import List, Tuple

from stacksense.fpdb import FingerprintRule, ProbeResponse


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassicScore:
    """
    Attributes:
        score: ``matched / considered``, 0 when nothing was considered
        considered: fields present in both the rule and the response
        matched: considered fields whose value satisfies the rule
        no_overlap: nothing was considered, the score carries no information
    """

    score: float
    considered: int
    matched: int

    @property
    def no_overlap(self) -> bool:
        return self.considered == 0

    def serialize(self) -> dict:
        return {
            "score": self.score,
            "considered": self.considered,
            "matched": self.matched,
            "no_overlap": self.no_overlap,
        }


def classic_score(resp: ProbeResponse, rule: FingerprintRule) -> ClassicScore:
    """
    Compares ``resp`` against ``rule`` field by field.

    Only tests present in both are compared. ``Resp`` is always compared (it's
    implied ``Y``); when either side has ``Resp=N`` nothing else is.
    """
    considered = 0
    matched = 0
    for test, fields in rule.tests.items():
        if test not in resp.tests:
            continue
        considered += 1
        matched += rule.spec(test, "Resp").matches(resp.value(test, "Resp") or "Y")
        if not (rule.responds(test) and resp.responds(test)):
            continue
        for name, spec in fields.items():
            if name == "Resp":
                continue
            value = resp.value(test, name)
            if value is None:
                continue
            considered += 1
            matched += spec.matches(value)
    score = matched / considered if considered else 0.0
    return ClassicScore(score, considered, matched)


def classic_match(
    resp: ProbeResponse, rules: List[FingerprintRule]
) -> List[Tuple[FingerprintRule, ClassicScore]]:
    """
    Every rule with its score, best first. Equal scores keep database order.
    """
    scored = [(r, classic_score(resp, r)) for r in rules]
    ranked = sorted(scored, key=lambda rs: -rs[1].score)
    if ranked:
        logger.debug("best fit %s with %.3f", ranked[0][0].name, ranked[0][1].score)
    return ranked
