"""File formats: series CSV, snapshots, profile data and gnuplot scripts.

Everything written here is a pure function of the data (no timestamps), so
re-running a command reproduces the files byte for byte.
"""

import csv
import json
from pathlib import Path

import numpy as np

from .diagnostics import SERIES_FIELDS, DiagnosticsSeries


def _g17(v):
    return format(float(v), ".17g")


def emit_series(series, path):
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(SERIES_FIELDS) + "\n")
        for row in series.rows():
            fh.write(",".join(_g17(v) for v in row) + "\n")
    return path


def read_series(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SERIES_FIELDS:
            raise ValueError(f"unexpected series header {header}")
        cols = {k: [] for k in SERIES_FIELDS}
        for row in reader:
            for k, v in zip(SERIES_FIELDS, row):
                cols[k].append(float(v))
    return DiagnosticsSeries.from_arrays(**cols)


def write_table(path, header, rows):
    """Whitespace-separated data with a ``#`` header line (gnuplot friendly)."""
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for row in rows:
            fh.write(" ".join(_g17(v) for v in row) + "\n")
    return Path(path)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else _g17(v) for v in row) + "\n")
    return Path(path)


def write_json(path, obj):
    with open(path, "w", newline="\n") as fh:
        fh.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return Path(path)


def write_profile(profile, path):
    return write_table(path, ["x", "phi"], zip(profile.x_samples, profile.phi_values))


def write_snapshots(snapshots, directory):
    """One ``.npy`` per snapshot plus ``snapshots.csv`` (index, t, shift, file)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows, paths = [], []
    for k, s in enumerate(snapshots):
        name = f"theta_{k:04d}.npy"
        np.save(directory / name, np.ascontiguousarray(s.theta, dtype="<f8"))
        rows.append((str(k), _g17(s.t), _g17(s.shift), name))
        paths.append(directory / name)
    write_csv(directory / "snapshots.csv", ["index", "t", "shift", "file"], rows)
    return paths


def read_snapshots(directory):
    from .coupled import Snapshot

    directory = Path(directory)
    out = []
    with open(directory / "snapshots.csv", newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(Snapshot(float(row["t"]), float(row["shift"]), np.load(directory / row["file"])))
    return out


def gnuplot_script(path, dat, title, xlabel, ylabel, using, logscale=False, extra=""):
    lines = [
        "set terminal pngcairo size 800,600",
        f"set output '{Path(path).with_suffix('.png').name}'",
        f"set title '{title}'",
        f"set xlabel '{xlabel}'",
        f"set ylabel '{ylabel}'",
        "set grid",
    ]
    if logscale:
        lines.append("set logscale xy")
    if extra:
        lines.append(extra)
    lines.append(f"plot '{Path(dat).name}' using {using} with linespoints title '{ylabel}'")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return Path(path)


def plot_series(series, directory):
    d = Path(directory)
    t = series["t"]
    write_table(d / "bbar.dat", ["t", "Bbar"], zip(t, series["Bbar"]))
    gnuplot_script(d / "bbar.plt", d / "bbar.dat", "time-averaged burning rate", "t", "Bbar", "1:2")
    write_table(d / "front.dat", ["t", "front_pos"], zip(t, series["front_pos"]))
    gnuplot_script(d / "front.plt", d / "front.dat", "front position", "t", "front_pos", "1:2")


def plot_decay(series, directory):
    d = Path(directory)
    rows = [(t, v) for t, v in zip(series.times, series.linf) if t > 0]
    write_table(d / "decay.dat", ["t", "linf"], rows)
    gnuplot_script(d / "decay.plt", d / "decay.dat", "sup-norm decay", "t", "linf", "1:2", logscale=True)


def plot_sweep(rows, c0, directory):
    d = Path(directory)
    data = sorted(
        (r["rho"] / r["nu"] + (r["rho"] / r["nu"]) ** 2, abs(r["Bbar"] - c0)) for r in rows
    )
    write_table(d / "sweep.dat", ["eps", "abs_Bbar_minus_c0"], data)
    gnuplot_script(d / "sweep.plt", d / "sweep.dat", "burning-rate deviation", "rho/nu + rho^2/nu^2",
                   "abs_Bbar_minus_c0", "1:2")
