# Configuration file for the Sphinx documentation builder.
#
# This file only contains a selection of the most common options. For a full
# list see the documentation:
# https://www.sphinx-doc.org/en/master/usage/configuration.html

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('..'))
from navqt.core import common as c
import sphinx_theme

# -- Project information -----------------------------------------------------

project = 'navqt-docs'
copyright = '2026, Kelly Ferrone'
author = 'Kelly Ferrone'

# The full version, including alpha/beta/rc tags
release = '0.1.0'


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.napoleon',
    'sphinx.ext.todo',
    'sphinx.ext.mathjax',
    'myst_parser',
    'sphinx_jinja',
    'sphinx_rtd_theme',
    'sphinx_copybutton',
    'sphinx-jsonschema'
    ]

templates_path = ['_templates']

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']


# -- Options for HTML output -------------------------------------------------

html_theme = 'stanford_theme'
html_theme_path = [sphinx_theme.get_html_theme_path('stanford-theme')]

html_static_path = ['_static']

intersphinx_mapping = {}

myst_enable_extensions = [
  "colon_fence",
  "deflist",
  "dollarmath",
  "linkify",
  "substitution"
]

# the packaged defaults rendered into the configuration page
jinja_contexts = {
    'experiment': c.konfig('experiment'),
    'grid': {'spec': c.konfig('grid')['grid']},
}

jinja_base = os.path.abspath('.')
