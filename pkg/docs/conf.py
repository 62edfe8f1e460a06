# Sphinx configuration of the TurboLike.py documentation.

import os
import sys
sys.path.insert(0, os.path.abspath(".."))

project = "TurboLike.py"
copyright = "2026 The TurboLike.py authors"
author = "The TurboLike.py authors"
release = "0.1.0"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
]
intersphinx_mapping = {
    "python": ("https://docs.python.org/3/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
}
exclude_patterns = ["_build"]

# The API reference follows the order of the source modules.
autodoc_member_order = "bysource"

html_theme = "alabaster"
html_theme_options = {
    "description": "Density evolution and erasure decoding of turbo-like codes",
    "show_related": False,
}
