"""Setup script for pyspforecast package.

This setup.py is provided for backward compatibility.
The project is configured primarily through pyproject.toml.
"""

import os

from setuptools import setup

version = "0.1.0"

try:
    # the single source of truth is __version__ in the package
    init_path = os.path.join(os.path.dirname(__file__), "pyspforecast", "__init__.py")
    with open(init_path, "r", encoding="utf-8") as f:
        for line in f:
            if line.startswith("__version__"):
                version = line.split("=")[1].strip().strip('"').strip("'")
                break
except OSError:
    pass

setup(
    name="pyspforecast",
    version=version,
    description="SARIMA and from-scratch LSTM forecasting of daily stock index prices",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    author="pyspforecast contributors",
    license="MIT",
    packages=["pyspforecast"],
    python_requires=">=3.9",
    install_requires=["numpy>=1.20", "pandas>=1.3", "scipy>=1.7"],
    entry_points={"console_scripts": ["pyspforecast=pyspforecast.cli:main"]},
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Topic :: Scientific/Engineering",
    ],
    keywords="time-series forecasting sarima arima lstm stock-prices",
    package_data={
        "pyspforecast": ["py.typed"],
    },
    include_package_data=True,
    zip_safe=False,
)
