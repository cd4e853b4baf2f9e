from pathlib import Path

from setuptools import setup

long_description = (Path(__file__).parent / "README.md").read_text()

setup(
    name="cclab",
    python_requires=">=3.11",
    description=(
        "Convexity Lab: numerical checks of ball convexity in singular"
        " constant scalar curvature metrics"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=[
        "cclab",
        "cclab.test",
    ],
    entry_points={
        "console_scripts": [
            "cclab = cclab.cli:cclab",
        ]
    },
    license="GPL v3",
    version="0.1.0",
    install_requires=["numpy>=1.24", "scipy>=1.10", "click>=8", "pathvalidate>=2.5"],
    extras_require={"test": ["pytest>=7", "pytest-cov>=4"]},
)
