from docutils.core import publish_doctree

from conftest import extract_readme_doctests, python_blocks

DOCUMENT = """\
Title
=====

Some text with ``inline`` literals.

.. code:: python

    >>> 1 + 1
    2

.. code:: bash

    cct-searcher cct --scenario smib
"""


def test_only_python_blocks_are_selected():
    blocks = list(publish_doctree(DOCUMENT).traverse(condition=python_blocks))
    assert [block.rawsource for block in blocks] == [">>> 1 + 1\n2"]


def test_extract_readme_doctests(tmp_path):
    source, target = tmp_path / "README.rst", tmp_path / "doctests.txt"
    source.write_text(DOCUMENT)
    assert extract_readme_doctests(str(source), str(target)) == 1
    assert target.read_text().startswith(">>> 1 + 1\n2")
