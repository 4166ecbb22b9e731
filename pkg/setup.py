import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

with open("hlctdp/version.txt", "r") as f:
    version = f.read().strip()

setuptools.setup(
    name="hlctdp",
    version=version,
    description="hub location with capacity, transit-time and demand levels: instance generation, MILP models, "
                "preprocessing and an exact solver",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests", "tests.*"]),
    install_requires=[
        'numpy',
        'pandas',
        'tqdm',
    ],
    extras_require={
        'test': ['pytest'],
    },
    package_data={
        "hlctdp": ["version.txt", "resources/*.json"]
    },
    include_package_data=True,
    entry_points={
        "console_scripts": ["hlctdp=hlctdp.cli:main"],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.8',
)
