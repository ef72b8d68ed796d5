"""Fixed-format CSV writers shared by every module (12 fractional digits)."""
from __future__ import annotations

import os

import numpy as np


def fmt(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, int, np.integer)):
        return str(int(x))
    x = float(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    s = f"{x:.12f}"
    return "0.000000000000" if s == "-0.000000000000" else s


def write_table(path, header, rows):
    """Write ``rows`` (iterable of sequences) under ``header``."""
    os.makedirs(os.path.dirname(os.fspath(path)) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_matrix(path, grid, matrix):
    """Square matrix with grid times as row and column labels."""
    header = ["t"] + [fmt(t) for t in grid]
    rows = ([t, *row] for t, row in zip(grid, np.asarray(matrix)))
    write_table(path, header, rows)


def write_ensemble(path, grid, paths):
    """Replication-major long format ``rep,t,value``."""
    paths = np.atleast_2d(paths)
    rows = ((r, t, v) for r in range(paths.shape[0]) for t, v in zip(grid, paths[r]))
    write_table(path, ["rep", "t", "value"], rows)


def read_table(path):
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, data
