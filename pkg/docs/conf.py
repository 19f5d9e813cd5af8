#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# stacksense documentation build configuration file.
import os
import sys

sys.path.insert(0, os.path.abspath("../"))

from stacksense import __version__  # noqa: E402

# -- General configuration ------------------------------------------------
extensions = ["sphinx.ext.autodoc", "sphinx.ext.napoleon"]
templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "stacksense"
copyright = "2024, stacksense developers"
author = "stacksense developers"
version = __version__
release = version

language = None
exclude_patterns = ["_build", "Thumbs.db", ".DS_Store"]
pygments_style = "sphinx"
todo_include_todos = False

autodoc_member_order = "bysource"

# -- Options for HTML output ----------------------------------------------
html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "stacksensedoc"

# -- Options for LaTeX, manual page and Texinfo output --------------------
latex_documents = [
    (master_doc, "stacksense.tex", "stacksense Documentation", author, "manual")
]
man_pages = [(master_doc, "stacksense", "stacksense Documentation", [author], 1)]
texinfo_documents = [
    (
        master_doc,
        "stacksense",
        "stacksense Documentation",
        author,
        "stacksense",
        "OS identification from stack fingerprints with layered neural nets.",
        "Miscellaneous",
    )
]
