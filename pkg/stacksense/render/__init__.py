from typing import List, Optional, Union


class TextTree:
    """
    Sectioned plain text, the layout of both fingerprint databases and classification
    reports::

        Fingerprint Linux 2.6.10
        Class Linux | Linux | 2.6.X | general purpose
        T1(DF=Y%W=16A0%ACK=S++%Flags=AS%Ops=MNNTNW)

        Operating System analysis
        Linux: 1.0
        Solaris: -1.0

    A section starts with its header line (the root has none) and its lines and
    subsections follow, prefixed with the section's ``indent``::

        >>> report = TextTree()
        >>> os = report.new_section("Operating System analysis")
        >>> os.add_line("Linux: 1.0")
        >>> os.add_line("Solaris: -1.0")
        >>> report.add_line("Setting OS to Linux 2.6")
    """

    def __init__(self, header: Optional[str] = None, indent: str = "") -> None:
        self._header = header
        self._indent = indent
        self._children: List[Union[str, "TextTree"]] = []

    def new_section(self, header: str, indent: str = "") -> "TextTree":
        """
        Appends an empty section and returns it.
        """
        section = TextTree(header, indent)
        self._children.append(section)
        return section

    def add_line(self, line: str) -> None:
        self._children.append(line)

    def to_string(self) -> str:
        out = [] if self._header is None else [self._header]
        for child in self._children:
            lines = child.to_lines() if isinstance(child, TextTree) else [child]
            out.extend(f"{self._indent}{line}" for line in lines)
        return "".join(f"{line}\n" for line in out)

    def to_lines(self) -> List[str]:
        return self.to_string().splitlines()
