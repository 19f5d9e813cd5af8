import pathlib

import pytest

from stacksense.fpdb import parse_db
from stacksense.fpdb.matcher import ClassMatcher
from stacksense.labels import LabelMap, check_coverage, load_labels


BASE = pathlib.Path(__file__).parent
db = parse_db(BASE.joinpath("../data/fixture-db.txt").read_text())
labels = load_labels()


def rule(name: str):  # type: ignore
    return next(r for r in db.rules if r.name == name)


class Test:
    def test_families(self) -> None:
        assert labels.relevant == ["Linux", "Solaris", "OpenBSD", "FreeBSD", "NetBSD", "Windows"]
        assert labels.family_of(rule("Linux 2.4.18")) == 0
        assert labels.family_of(rule("Microsoft Windows XP SP2")) == 5
        assert labels.family_of(rule("Cisco IOS 12.2")) is None
        assert not labels.is_relevant(rule("HP JetDirect printer"))

    @pytest.mark.parametrize(  # type: ignore
        "name,label",
        [
            ("Linux 2.2.14 - 2.2.20", "Linux 2.2"),
            ("Linux 2.6.10", "Linux 2.6"),
            ("Sun Solaris 9", "Solaris 9"),
            ("Sun Solaris 2.6", "Solaris 2.X"),
            ("OpenBSD 2.2 - 2.3", "OpenBSD 2"),
            ("OpenBSD 2.7", "OpenBSD 2.7"),
            ("OpenBSD 3.6 (i386)", "OpenBSD 3"),
            ("FreeBSD 4.10-RELEASE", "FreeBSD"),
            ("Apple Mac OS X 10.3.9", "irrelevant"),
        ],
    )
    def test_label_of(self, name: str, label: str) -> None:
        assert labels.label_of(rule(name)) == label

    def test_version_of(self) -> None:
        assert labels.version_of(rule("OpenBSD 2.7")) == 1
        assert labels.version_of(rule("OpenBSD 2.2 - 2.3")) == 0
        assert labels.version_of(rule("Microsoft Windows XP SP1")) is None
        assert labels.version_labels("OpenBSD") == ["2", "2.7", "3"]
        assert labels.version_labels("Windows") == []

    def test_coverage(self) -> None:
        assert check_coverage(labels, db.rules) == []
        narrow = LabelMap(["Linux"], {"Linux": [("2.4", ClassMatcher(version="2.4*"))]})
        missing = check_coverage(narrow, db.rules)
        assert [r.name for r in missing] == [
            "Linux 2.2.14 - 2.2.20",
            "Linux 2.6.0-test5 x86",
            "Linux 2.6.10",
        ]

    def test_serialize(self) -> None:
        again = LabelMap.from_dict(labels.serialize())
        assert again.relevant == labels.relevant
        assert again.version_labels("Solaris") == labels.version_labels("Solaris")
        assert [again.label_of(r) for r in db.rules] == [labels.label_of(r) for r in db.rules]

    @pytest.mark.parametrize(  # type: ignore
        "relevant,versions",
        [([], {}), (["Linux", "Linux"], {}), (["Linux"], {"Solaris": []})],
    )
    def test_invalid(self, relevant: list, versions: dict) -> None:
        with pytest.raises(ValueError):
            LabelMap(relevant, versions)
