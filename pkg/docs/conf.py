# -*- coding: utf-8 -*-
#
# tlsfit documentation build configuration file.

import sys, os

sys.path.insert(0, os.path.abspath('..'))

from tlsfit.version import __version__

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.todo', 'sphinx.ext.coverage']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'tlsfit'
copyright = u'2026, the tlsfit authors'

version = __version__
release = '.'.join(__version__.split('.')[:2])

exclude_patterns = ['_build']
pygments_style = 'sphinx'
autodoc_member_order = 'bysource'

html_theme = 'default'
html_static_path = ['_static']
htmlhelp_basename = 'tlsfitdoc'

latex_documents = [
  ('index', 'tlsfit.tex', u'tlsfit Documentation',
   u'the tlsfit authors', 'manual'),
]

man_pages = [
    ('index', 'tlsfit', u'tlsfit Documentation',
     [u'the tlsfit authors'], 1)
]
