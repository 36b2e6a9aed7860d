from setuptools import setup, find_packages

setup(
    name="subelliptic-eigen",
    version="1.0.0",
    description="First eigenpair of the subelliptic p-Laplacian on Hormander vector-field frames",
    author="Your Name",
    packages=find_packages(exclude=["tests", "examples", "examples.*"]),
    install_requires=[
        "numpy>=1.26.2",
        "scipy>=1.12.0",
        "sympy>=1.12",
        "pandas>=2.1.3",
        "pydantic>=2.5.0",
        "pydantic-settings>=2.1.0",
        "python-dotenv>=1.0.0"
    ],
    extras_require={
        "test": ["pytest>=7.4.3"]
    },
    python_requires=">=3.10",
    entry_points={
        "console_scripts": [
            "subeig=src.main:main"
        ]
    }
)
