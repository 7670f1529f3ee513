from pathlib import Path

from setuptools import find_packages, setup

CURRENT_DIR = Path(__file__).parent


def get_long_description() -> str:
    return (CURRENT_DIR / "README.md").read_text(encoding="utf8")


setup(
    name="cryptonet",
    version="0.1.0",
    description="Correlation networks and trade flows of crypto markets",
    long_description=get_long_description(),
    long_description_content_type="text/markdown",
    install_requires=(CURRENT_DIR / "requirements.txt").read_text().splitlines(),
    packages=find_packages(exclude=["tests", "tests.*"]),
    package_data={"cryptonet": ["components/report/*.json"]},
    license="MIT",
    python_requires=">=3.8, <4",
    entry_points={
        "console_scripts": ["cryptonet=cryptonet.command_line_entrypoint:main"],
    },
)
