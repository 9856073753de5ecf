from setuptools import setup, find_packages

setup(
    name="geolift",
    version="0.1.0",
    description="Latent position recovery with spectral embedding and Isomap.",
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    package_data={"geolift": ["py.typed"]},
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "scikit-learn>=1.1",
        "pandas>=1.5",
    ],
    entry_points={
        "console_scripts": [
            "geolift=geolift.cli:main",
        ],
    },
)
