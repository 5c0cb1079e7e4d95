"""Generate the packaged reference cycle statistics.

Runs the regenerative-cycle oracle for the linear response at sigma=1 on a
ladder of Euler steps and writes each result into src/coxflow/data/.  The
finest level is the packaged reference; the coarser levels stay alongside it
as step-convergence evidence.  Run from the repository root:

    python3 scripts/freeze_reference.py
"""

import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from coxflow.cycles import cycle_statistics  # noqa: E402
from coxflow.io import write_cycle_stats  # noqa: E402
from coxflow.model import ResponseFunction  # noqa: E402
from coxflow.reference import LADDER, data_dir, reference_filename  # noqa: E402

SEED = 20260824


def main():
    h = ResponseFunction.linear()
    out = data_dir()
    out.mkdir(parents=True, exist_ok=True)
    for stream, (level, (step, n_cycles)) in enumerate(LADDER.items()):
        t0 = time.time()
        stats = cycle_statistics(
            1.0, h, n_cycles=n_cycles, step=step, seed=SEED, stream=stream
        )
        path = out / reference_filename("linear", level)
        write_cycle_stats(stats, path)
        print(
            f"{level}: step={step:g} n={n_cycles} "
            f"mean_tau1={stats.mean_tau1:.6f}({stats.se_mean_tau1:.1e}) "
            f"var_zh={stats.var_zh:.6f}({stats.se_var_zh:.1e}) "
            f"[{time.time() - t0:.0f}s] -> {path}",
            flush=True,
        )


if __name__ == "__main__":
    main()
