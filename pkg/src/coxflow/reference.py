"""Packaged reference statistics for the linear response at sigma = 1.

The limit-variance acceptance checks compare replicated simulations against
cycle-oracle constants.  Re-deriving those constants on every test run would
dominate the runtime, so they are generated once by scripts/freeze_reference.py
on a ladder of Euler steps and shipped with the package; the coarser ladder
levels double as step-convergence evidence for the frozen values.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .cycles import CycleStatistics
from .io import read_cycle_stats

__all__ = ["LADDER", "reference_cycle_stats", "reference_filename", "data_dir"]

# level -> (Euler step, number of cycles); "fine" is the packaged reference
LADDER = {
    "coarse": (2e-4, 400_000),
    "mid": (1e-4, 1_000_000),
    "fine": (5e-5, 1_000_000),
}


def reference_filename(kind: str, level: str) -> str:
    step, _ = LADDER[level]
    return f"cycle_stats_{kind}_sigma1_step{step:g}.csv"


def data_dir() -> Path:
    return Path(__file__).resolve().parent / "data"


def reference_cycle_stats(kind: str = "linear", level: str = "fine") -> CycleStatistics:
    """Load a frozen cycle-statistics table shipped with the package."""
    if level not in LADDER:
        raise ValueError(f"unknown ladder level {level!r}; choose from {sorted(LADDER)}")
    name = reference_filename(kind, level)
    path = resources.files("coxflow").joinpath("data", name)
    with resources.as_file(path) as p:
        if not p.exists():
            raise FileNotFoundError(
                f"reference table {name} is missing; run scripts/freeze_reference.py"
            )
        return read_cycle_stats(p)
