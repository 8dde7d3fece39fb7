import datetime

import mmdbn

project = "mmdbn"
release = version = mmdbn.__version__
author = "The mmdbn developers"
copyright = f"{datetime.date.today().year}, {author}"

extensions = [
    "myst_parser",
    "numpydoc",
    "sphinx_copybutton",
    "sphinx_rtd_theme",
    "sphinx.ext.autodoc",
    "sphinx.ext.autosummary",
    "sphinx.ext.intersphinx",
]

html_theme = "sphinx_rtd_theme"
html_title = f"mmdbn {version}"

# Signatures in the API pages come from the numpydoc parameter sections.
autodoc_typehints = "none"
autosummary_generate = True
numpydoc_show_class_members = False

intersphinx_mapping = {
    "numpy": ("https://numpy.org/doc/stable/", None),
    "pandas": ("https://pandas.pydata.org/docs/", None),
    "python": ("https://docs.python.org/3", None),
}

# Strip shell and REPL prompts from copied code blocks.
copybutton_prompt_text = r">>> |\.\.\. |\$ "
copybutton_prompt_is_regexp = True
