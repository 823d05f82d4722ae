#!/usr/bin/env python
import os

from setuptools import find_packages, setup


def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


setup(
    name="cct_searcher",
    version="0.1.0",
    author="Power Systems Dynamics Group",
    author_email="cct-searcher@googlegroups.com",
    description=(
        "Critical clearing times of constrained power systems and their "
        "parameter sensitivities."
    ),
    license="BSD-3",
    keywords="power systems transient stability critical clearing time sensitivity",
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"cct_searcher": ["py.typed", "scenarios/*.ini"]},
    long_description=read("README.rst"),
    python_requires=">=3.6",
    include_package_data=True,
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: BSD License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.6",
        "Programming Language :: Python :: 3.7",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
    ],
    # fmt: off
    # Disable formatting until this is solved https://github.com/psf/black/issues/1288
    install_requires=[
        "logzero>=1.5.0",
        "sympy>=1.6.1",
        "psutil>=5.7.2",
        "pympler>=0.8",
        "typing-extensions>=3.7.4.2",
        "tabulate>=0.8.7",
        "numpy>=1.19.1",
        "scipy>=1.5.2",
    ],
    # fmt: on
    entry_points={"console_scripts": ["cct-searcher = cct_searcher.cli:main"]},
)
