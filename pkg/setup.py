from setuptools import setup, find_packages

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

setup(
    name="ponhv",
    version="0.1.0",
    description="SLA-aware scheduling hypervisor for shared PON upstream bandwidth maps",
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="MIT",
    python_requires=">=3.10",
    packages=find_packages(
        include=["ponhv", "ponhv.*", "experiments", "experiments.*"],
        exclude=["scripts", "scripts.*"],
    ),
    include_package_data=True,
    package_data={"experiments": ["templates/experiments/*.svg"]},
    install_requires=[
        "Django>=5.0",
        "numpy>=1.24",
        "scipy>=1.10",
    ],
    classifiers=[
        "Development Status :: 4 - Beta",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3.13",
        "Framework :: Django",
        "Topic :: System :: Networking",
    ],
    keywords=["pon", "dba", "bandwidth-map", "hypervisor", "sla", "scheduling"],
)
