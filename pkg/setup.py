from setuptools import setup, find_packages

setup(
    name="hdqr",
    version="0.1.0",
    description="Inference for high-dimensional quantile regression",
    packages=find_packages(exclude=["tests", "tests.*", "examples", "examples.*"]),
    python_requires=">=3.8",
    install_requires=[
        "numpy",
        "scipy",
        "pandas",
        "matplotlib",
    ],
    entry_points={
        "console_scripts": [
            "hdqr=cli.main:main",
        ],
    },
)
