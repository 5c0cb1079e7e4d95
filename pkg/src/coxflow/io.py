"""CSV and metadata serialization.

Every artifact is a comma-separated file with a header row, ``.`` decimal
point and LF line endings, paired where needed with a ``<name>.meta`` sidecar
of ``key=value`` lines.  Each writer has a reader so the loop closes: what
one module emits, its consumer can parse back.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Optional

import numpy as np

from .cycles import CycleStatistics
from .estimation import EstimationResult, EventStream
from .model import ModelParams, SimulationRecord

__all__ = [
    "write_metadata",
    "read_metadata",
    "write_record",
    "read_event_stream",
    "write_estimation",
    "read_estimation",
    "write_cycle_stats",
    "read_cycle_stats",
]


class CsvFormatError(ValueError):
    """Malformed input file; carries path and line context."""


def _meta_path(path: Path) -> Path:
    return path.with_suffix(path.suffix + ".meta")


def write_metadata(path: Path, entries: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        for key, value in entries.items():
            fh.write(f"{key}={value}\n")


def read_metadata(path: Path) -> dict:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise CsvFormatError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def write_record(record: SimulationRecord, path) -> Path:
    """Write one simulated path as `time,w,y,accepted,bid_level` plus a
    metadata sidecar; bid_level is empty on non-event rows.
    """
    path = Path(path)
    accepted = np.zeros(len(record.skeleton_times), dtype=int)
    accepted[record.event_index] = 1
    bids = {int(i): int(b) for i, b in zip(record.event_index, record.bid_levels)}
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "w", "y", "accepted", "bid_level"])
        for i, (t, w, y) in enumerate(
            zip(record.skeleton_times, record.w_values, record.y_values)
        ):
            writer.writerow(
                [repr(float(t)), repr(float(w)), repr(float(y)), int(accepted[i]), bids.get(i, "")]
            )
    p = record.params
    write_metadata(
        _meta_path(path),
        {
            "sigma": repr(p.sigma),
            "mu": repr(p.mu),
            "horizon": repr(p.horizon),
            "bins": p.bins,
            "p0": p.p0,
            "seed": p.seed,
            "u0": repr(record.u0),
            "response": record.response_kind,
        },
    )
    return path


def read_event_stream(path, horizon: Optional[float] = None) -> EventStream:
    """Load an event stream from a record CSV (non-accepted rows dropped) or
    from a minimal `time[,bid_level]` CSV.  The horizon comes from the
    metadata sidecar unless given explicitly.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{path}: no such file")
    meta = {}
    mp = _meta_path(path)
    if mp.exists():
        meta = read_metadata(mp)
    if horizon is None:
        if "horizon" not in meta:
            raise CsvFormatError(
                f"{path}: no horizon given and no metadata sidecar {mp.name}"
            )
        horizon = float(meta["horizon"])

    times = []
    bids = []
    with open(path) as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}:1: empty file") from None
        header = [c.strip() for c in header]
        if "time" not in header:
            raise CsvFormatError(f"{path}:1: header must contain a 'time' column")
        i_time = header.index("time")
        i_accepted = header.index("accepted") if "accepted" in header else None
        i_bid = header.index("bid_level") if "bid_level" in header else None
        for lineno, row in enumerate(reader, 2):
            if not row:
                continue
            try:
                if i_accepted is not None and int(row[i_accepted]) == 0:
                    continue
                times.append(float(row[i_time]))
                if i_bid is not None:
                    cell = row[i_bid].strip()
                    bids.append(int(cell) if cell else None)
            except (ValueError, IndexError) as exc:
                raise CsvFormatError(f"{path}:{lineno}: {exc}") from None

    bid_levels = None
    if bids and all(b is not None for b in bids):
        bid_levels = np.array(bids, dtype=np.int64)
    return EventStream(
        event_times=np.array(times, dtype=float),
        horizon=horizon,
        bid_levels=bid_levels,
    )


def write_estimation(result: EstimationResult, out_dir, prefix: str = "estimate") -> tuple[Path, Path]:
    """Write the shape estimate on the grid {j/k} and its inverse at the
    sorted jump points.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    k = result.bins
    h_path = out_dir / f"{prefix}_h_hat.csv"
    grid = np.arange(k) / k
    with open(h_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["u", "h_hat"])
        for u, v in zip(grid, result.theta_sorted):
            writer.writerow([repr(float(u)), repr(float(v))])
    inv_path = out_dir / f"{prefix}_h_inv_hat.csv"
    with open(inv_path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "h_inv_hat"])
        for t in result.theta_sorted:
            writer.writerow([repr(float(t)), repr(float(result.h_inv_hat(t)))])
    write_metadata(
        _meta_path(h_path), {"mu_hat": repr(result.mu_hat), "bins": k}
    )
    return h_path, inv_path


def read_estimation(h_path) -> EstimationResult:
    h_path = Path(h_path)
    meta = read_metadata(_meta_path(h_path))
    data = np.loadtxt(h_path, delimiter=",", skiprows=1, ndmin=2)
    return EstimationResult.from_theta(float(meta["mu_hat"]), data[:, 1])


def write_cycle_stats(stats: CycleStatistics, path) -> Path:
    """Scalar block then the covariance matrix block `t1,t2,rho,se`."""
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key in (
            "sigma",
            "step",
            "n_cycles",
            "mean_tau1",
            "se_mean_tau1",
            "mean_tau1_sq",
            "se_mean_tau1_sq",
            "mean_zh",
            "se_mean_zh",
            "var_zh",
            "se_var_zh",
        ):
            writer.writerow([key, repr(getattr(stats, key))])
        writer.writerow([])
        writer.writerow(["t1", "t2", "rho", "se"])
        for i, t1 in enumerate(stats.t_grid):
            for j, t2 in enumerate(stats.t_grid):
                writer.writerow(
                    [repr(float(t1)), repr(float(t2)),
                     repr(float(stats.rho_grid[i, j])), repr(float(stats.se_rho[i, j]))]
                )
    return path


def read_cycle_stats(path) -> CycleStatistics:
    path = Path(path)
    scalars = {}
    pairs = []
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        in_matrix = False
        for row in reader:
            if not row or row == [""]:
                continue
            if row[0] == "t1":
                in_matrix = True
                continue
            if not in_matrix:
                scalars[row[0]] = float(row[1])
            else:
                pairs.append([float(c) for c in row])
    arr = np.array(pairs)
    t_grid = np.unique(arr[:, 0])
    m = len(t_grid)
    rho = arr[:, 2].reshape(m, m)
    se = arr[:, 3].reshape(m, m)
    n = int(scalars["n_cycles"])
    zeros = np.zeros(m)
    return CycleStatistics(
        sigma=scalars["sigma"],
        step=scalars["step"],
        n_cycles=n,
        t_grid=t_grid,
        mean_tau1=scalars["mean_tau1"],
        se_mean_tau1=scalars["se_mean_tau1"],
        mean_tau1_sq=scalars["mean_tau1_sq"],
        se_mean_tau1_sq=scalars["se_mean_tau1_sq"],
        mean_zh=scalars.get("mean_zh", 0.0),
        se_mean_zh=scalars.get("se_mean_zh", 0.0),
        var_zh=scalars["var_zh"],
        se_var_zh=scalars["se_var_zh"],
        rho_grid=rho,
        se_rho=se,
        mean_ze=zeros,
        se_mean_ze=zeros,
        mean_y_integral=0.0,
        se_mean_y_integral=0.0,
        mean_occ=zeros,
        se_mean_occ=zeros,
    )
