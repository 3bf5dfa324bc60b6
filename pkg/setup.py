# Copyright (c) 2019 Mikaël Capelle
#
# Permission is hereby granted, free of charge, to any person obtaining a copy
# of this software and associated documentation files (the "Software"), to deal
# in the Software without restriction, including without limitation the rights
# to use, copy, modify, merge, publish, distribute, sublicense, and/or sell
# copies of the Software, and to permit persons to whom the Software is
# furnished to do so, subject to the following conditions:
#
# The above copyright notice and this permission notice shall be included in all
# copies or substantial portions of the Software.
#
# THE SOFTWARE IS PROVIDED "AS IS", WITHOUT WARRANTY OF ANY KIND, EXPRESS OR
# IMPLIED, INCLUDING BUT NOT LIMITED TO THE WARRANTIES OF MERCHANTABILITY,
# FITNESS FOR A PARTICULAR PURPOSE AND NONINFRINGEMENT. IN NO EVENT SHALL THE
# AUTHORS OR COPYRIGHT HOLDERS BE LIABLE FOR ANY CLAIM, DAMAGES OR OTHER
# LIABILITY, WHETHER IN AN ACTION OF CONTRACT, TORT OR OTHERWISE, ARISING FROM,
# OUT OF OR IN CONNECTION WITH THE SOFTWARE OR THE USE OR OTHER DEALINGS IN THE
# SOFTWARE.

from setuptools import setup, find_packages

with open("README.md", "r") as fp:
    long_description = fp.read()

install_requires = ["numpy", "scipy", "pillow", "PyMaxflow"]

test_requires = ["pytest", "mypy", "black", "flake8", "flake8-black"]

setup(
    name="gflbs",
    version="0.1.0",
    author="Mikaël Capelle",
    author_email="capelle.mikael@gmail.com",
    install_requires=install_requires,
    test_requires=test_requires,
    extras_require={"test": test_requires},
    packages=find_packages(exclude=["tests"]),
    entry_points={"console_scripts": ["gflbs=gflbs.cli:main"]},
    description="Background subtraction by low-rank and generalized fused lasso "
    "decomposition",
    long_description=long_description,
    license="MIT",
    python_requires=">=3.9",
)
