"""CSV emission with a commented header block, plus figure rendering."""

from __future__ import annotations

import csv
import io
from pathlib import Path


def write_csv(path, columns, rows, header_lines) -> None:
    """RFC-4180-style CSV preceded by '#'-prefixed header lines (config + units)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow(row)
    path.write_text(buf.getvalue())


def read_csv(path):
    """Read back a '#'-headed CSV; returns (header_lines, columns, rows-of-str)."""
    header, columns, rows = [], None, []
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                header.append(line[1:].strip())
                continue
            reader = csv.reader(io.StringIO(line))
            rec = next(reader)
            if columns is None:
                columns = rec
            else:
                rows.append(rec)
    return header, columns, rows


def save_curve_plot(path, curves, xlabel, ylabel, title="", logx=False, logy=False):
    """Render simple labeled curves to a file (png decided by the suffix)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for label, x, y in curves:
        ax.plot(x, y, marker="o", markersize=3, linewidth=1.2, label=label)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    ax.legend(frameon=False)
    fig.tight_layout()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
