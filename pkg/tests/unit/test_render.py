from stacksense.render import TextTree

expected_simple = """Relevant analysis
Relevant: 0.99
Operating System analysis
Linux: 0.98
Solaris: -0.97
Setting OS to Linux 2.6
"""

expected_indented = """Windows 2000: 0.996
Editions:
\tProfessional: -0.9
\tServer: 0.95
Service Packs:
\tsp0: -0.8
\tsp1: 0.9
"""

expected_double_nested = """Fingerprint Linux 2.6.10
  Class Linux | Linux | 2.6.X | general purpose
  Tests
    T1(DF=Y)
    T2(Resp=N)
"""


class Test:
    def test_simple(self) -> None:
        report = TextTree()
        gate = report.new_section("Relevant analysis")
        gate.add_line("Relevant: 0.99")
        families = report.new_section("Operating System analysis")
        families.add_line("Linux: 0.98")
        families.add_line("Solaris: -0.97")
        report.add_line("Setting OS to Linux 2.6")
        assert report.to_string() == expected_simple

    def test_indented(self) -> None:
        report = TextTree()
        report.add_line("Windows 2000: 0.996")
        editions = report.new_section("Editions:", indent="\t")
        editions.add_line("Professional: -0.9")
        editions.add_line("Server: 0.95")
        service_packs = report.new_section("Service Packs:", indent="\t")
        service_packs.add_line("sp0: -0.8")
        service_packs.add_line("sp1: 0.9")
        assert report.to_string() == expected_indented

    def test_double_nest(self) -> None:
        db = TextTree()
        rule = db.new_section("Fingerprint Linux 2.6.10", indent="  ")
        rule.add_line("Class Linux | Linux | 2.6.X | general purpose")
        tests = rule.new_section("Tests", indent="  ")
        tests.add_line("T1(DF=Y)")
        tests.add_line("T2(Resp=N)")
        assert db.to_string() == expected_double_nested

