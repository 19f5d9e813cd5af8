import pathlib

import pytest

from stacksense.datagen import sample_response
from stacksense.fpdb import ProbeResponse, parse_db, parse_response
from stacksense.fpdb.scoring import classic_match, classic_score


BASE = pathlib.Path(__file__).parent
db = parse_db(BASE.joinpath("../data/fixture-db.txt").read_text())

# a dense rule and a sparse one agreeing with it on T1
pathology_db = """Fingerprint Linux 2.6.10
Class Linux | Linux | 2.6.X | general purpose
TSeq(Class=RI%gcd=<6%SI=<2D870AA&>6708%IPID=Z%TS=1000HZ)
T1(DF=Y%W=16A0%ACK=S++%Flags=AS%Ops=MNNTNW)
T2(Resp=N)
T3(DF=Y%W=16A0%ACK=S++%Flags=AS%Ops=MNNTNW)
T4(DF=Y%W=0%ACK=O%Flags=R%Ops=)
T5(DF=Y%W=0%ACK=S++%Flags=AR%Ops=)
T6(DF=Y%W=0%ACK=O%Flags=R%Ops=)
T7(DF=Y%W=0%ACK=S++%Flags=AR%Ops=)
PU(DF=N%TOS=192%IPLEN=164%RIPTL=148%RID=E%RIPCK=E%UCK=E%ULEN=134%DAT=E)

Fingerprint HP JetDirect printer
Class HP | embedded | | printer
T1(DF=Y%ACK=S++%Flags=AS)
"""

# Linux 2.6.10 answers behind a middlebox rewriting windows and TTLs
perturbed = """TSeq(Class=RI%gcd=1%SI=1A2B3C%IPID=Z%TS=1000HZ)
T1(DF=Y%W=16D0%ACK=S++%Flags=AS%Ops=MNNTNW)
T2(Resp=N)
T3(DF=Y%W=16D0%ACK=S++%Flags=AS%Ops=MNNTNW)
T4(DF=Y%W=0%ACK=O%Flags=R%Ops=)
T5(DF=Y%W=0%ACK=S++%Flags=AR%Ops=)
T6(DF=Y%W=0%ACK=O%Flags=R%Ops=)
T7(DF=Y%W=0%ACK=S++%Flags=AR%Ops=)
PU(DF=N%TOS=192%IPLEN=164%RIPTL=140%RID=E%RIPCK=E%UCK=E%ULEN=134%DAT=E)
"""


class Test:
    @pytest.mark.parametrize("index", range(20))  # type: ignore
    def test_self_match(self, index: int) -> None:
        rule = db.rules[index]
        for n in range(10):
            s = classic_score(sample_response(rule, [index, n]), rule)
            assert s.score == 1.0
            assert s.matched == s.considered > 0

    def test_self_match_ranks_first(self) -> None:
        rule = db.rules[6]
        ranked = classic_match(sample_response(rule, 0), db.rules)
        assert ranked[0][0] is rule
        assert ranked[0][1].score == 1.0
        assert all(0.0 <= s.score <= 1.0 for _, s in ranked)
        assert all(s.matched <= s.considered for _, s in ranked)

    def test_counts(self) -> None:
        rule = parse_db(pathology_db).rules[0]
        s = classic_score(parse_response(perturbed), rule)
        # Resp of 9 tests, 5 fields of TSeq, 5 of every answered TCP test, 9 of PU
        assert s.considered == 9 + 5 + 6 * 5 + 9
        assert s.matched == s.considered - 3
        assert s.serialize() == {
            "score": s.matched / s.considered,
            "considered": s.considered,
            "matched": s.matched,
            "no_overlap": False,
        }

    def test_resp_mismatch(self) -> None:
        rule = db.rules[15]
        resp = parse_response("T3(DF=Y%W=FFFF)\n")
        s = classic_score(resp, rule)
        assert (s.considered, s.matched) == (1, 0)

    def test_no_overlap(self) -> None:
        s = classic_score(ProbeResponse(), db.rules[0])
        assert s.no_overlap
        assert s.score == 0.0
        assert s.considered == 0

    def test_pathology(self) -> None:
        rules = parse_db(pathology_db).rules
        ranked = classic_match(parse_response(perturbed), rules)
        assert [r.name for r, _ in ranked] == ["HP JetDirect printer", "Linux 2.6.10"]
        assert ranked[0][1].score == 1.0
        assert ranked[1][1].score < 1.0

    def test_single_rule(self) -> None:
        ranked = classic_match(ProbeResponse(), db.rules[:1])
        assert ranked[0][0] is db.rules[0]

    def test_ties_keep_order(self) -> None:
        ranked = classic_match(ProbeResponse(), db.rules)
        assert [r for r, _ in ranked] == db.rules
