"""Collect the python blocks of README.rst into test_readme.txt so pytest
runs them as doctests next to the package."""
import numpy as np
import pytest
from _pytest.doctest import DoctestItem
from docutils.core import publish_doctree

README = "README.rst"
DOCTEST_FILE = "test_readme.txt"


def python_blocks(node) -> bool:
    return node.tagname == "literal_block" and "python" in node.attributes.get(
        "classes", ()
    )


def extract_readme_doctests(source: str = README, target: str = DOCTEST_FILE) -> int:
    with open(source, "r") as f:
        doctree = publish_doctree(f.read())
    blocks = list(doctree.traverse(condition=python_blocks))
    with open(target, "w") as f:
        for block in blocks:
            f.write(block.rawsource)
            f.write("\n\n")
    return len(blocks)


extract_readme_doctests()


@pytest.fixture(autouse=True)
def _numpy_legacy_scalar_repr(request):
    """Doctests were written against numpy<2 scalar reprs (0.5, not
    np.float64(0.5)); print them the same way on numpy>=2."""
    if not isinstance(request.node, DoctestItem) or np.lib.NumpyVersion(
        np.__version__
    ) < "2.0.0":
        yield
        return
    with np.printoptions(legacy="1.25"):
        yield
