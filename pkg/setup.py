import io
import os
from setuptools import setup, find_packages

ROOT_DIR = os.path.dirname(__file__)

setup(
    name="ray-trpca",
    packages=find_packages(),
    version="0.1.0",
    description=("Moving target separation in SAR data with tensor robust "
                 "PCA, parallelized with Ray"),
    long_description=io.open(
        os.path.join(ROOT_DIR, "README.md"), "r", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    install_requires=open("./requirements.txt").read(),
    package_data={"ray_trpca": ["env_info.sh"]},
    entry_points={
        "console_scripts": ["ray-trpca=ray_trpca.cli:_entry_point"],
    },
)
