from setuptools import setup, find_packages

setup(
    name="sazig",
    version="0.1.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    include_package_data=True,
    install_requires=[
        "numpy>=1.24.0",
        "pandas>=2.0.0",
        "scipy>=1.10.0",
        "rich>=13.0.0",
    ],
    extras_require={"test": ["pytest"]},
    entry_points={
        "console_scripts": [
            "sazig=sazig.main:cli",
        ],
    },
    author="Your Name",
    description="Shared-parameter zero-inflated Gamma matrix factorization.",
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.9',
)
