from kvnlab import version
from pathlib import Path
from setuptools import find_packages, setup

# Pull in the long description from the README
long_description = Path("README.md").read_text(encoding="utf-8")

# Get requirements from requirements.in
requirements = Path("requirements/requirements.in").read_text(encoding="utf-8").splitlines()
# Remove lines that are empty or start with # (comments)
requirements = [line for line in requirements if line and not line.startswith("#")]

setup(
    name="kvnlab",
    python_requires=">=3.9",
    version=version,
    description="Koopman-von Neumann phase-space propagators, the Maxwell spinor and quantum-classical hybrids.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    keywords="Koopman-von Neumann, phase space, Wigner function, split operator, Maxwell, simulation",
    install_requires=requirements,
    entry_points={
        "console_scripts": [
            "kvnlab = kvnlab.cli:cli",
        ],
    },
    packages=find_packages(include=["kvnlab", "kvnlab.*"]),
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "Topic :: Scientific/Engineering :: Physics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
    ],
)
