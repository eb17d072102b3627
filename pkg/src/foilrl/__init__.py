"""Airfoil shape optimization: PPO agents, cross-fidelity transfer, PSO baseline."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def bundled_airfoil_dir() -> Path:
    """Directory holding the packaged coordinate files."""
    return Path(str(resources.files("foilrl") / "data" / "airfoils"))
